#pragma once

// Seeded random streams and the handful of distributions the samplers need.
//
// Every consumer (an individual, a chain, a replication) gets its own stream
// derived from a base seed and a tuple of stream ids, so results never depend
// on how work is split across threads.

#include "mhmm/model.hpp"

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mhmm {

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Deterministic seed for the substream identified by `ids` under `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) noexcept;

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) : engine_(derive_seed(seed, ids)) {}

    double uniform();                  // (0, 1)
    double normal() { return std_normal_(engine_); }
    double normal(double mean, double sd) { return mean + sd * normal(); }
    double gamma(double shape, double rate);
    /// Inverse-gamma with density proportional to x^{-shape-1} exp(-scale / x).
    double inverse_gamma(double shape, double scale) { return 1.0 / gamma(shape, scale); }
    double chi_squared(double df) { return gamma(0.5 * df, 0.5); }
    Count poisson(double mean);
    /// Index drawn with probability proportional to `weights` (need not be normalized).
    int categorical(const Eigen::Ref<const Vector>& weights);
    std::size_t index(std::size_t n);  // uniform in [0, n)

    /// mean + L z with z standard normal.
    Vector mvnormal(const Vector& mean, const Matrix& chol_lower);
    /// Draw from IW(scale, df): density proportional to
    /// |X|^{-(df+p+1)/2} exp(-tr(scale X^{-1}) / 2). Throws CovarianceError
    /// when scale is not SPD and ConfigError when df <= p - 1.
    Matrix inverse_wishart(const Matrix& scale, double df);

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> std_normal_{0.0, 1.0};
};

/// Lower factor F with F F^T = cov for symmetric positive semi-definite cov.
/// Zero matrices map to zero factors, so draws collapse onto the mean.
/// Throws CovarianceError for asymmetric or indefinite input.
Matrix psd_factor(const Matrix& cov);

}  // namespace mhmm
