#pragma once

// Core parameterization of the multilevel Poisson-lognormal HMM.
//
// States are zero-based everywhere inside the library (0..M-1); files and
// reports use one-based labels. A transition row is parameterized by M-1
// multinomial-logit intercepts with destination 0 as the reference category.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mhmm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Count = std::int64_t;
/// K x T matrix of counts for one individual.
using CountMatrix = Eigen::Matrix<Count, Eigen::Dynamic, Eigen::Dynamic>;
/// Hidden state sequence, zero-based state labels.
using StatePath = std::vector<int>;

/// Entries of a probability row below this value are floored before the
/// logit link is applied.
inline constexpr double kProbabilityFloor = 1e-4;

struct ModelSpec {
    int m_states = 0;
    int k_series = 0;
    std::vector<std::size_t> lengths;  // T_n per individual

    std::size_t n_individuals() const noexcept { return lengths.size(); }

    /// Throws ConfigError unless M >= 2, K >= 1, N >= 1 and every T_n >= 2.
    void validate() const;
};

struct TransitionMatrix {
    Matrix probs;  // M x M, row-stochastic

    int states() const noexcept { return static_cast<int>(probs.rows()); }
    void validate(double tol = 1e-12) const;
};

struct TransitionLogits {
    Matrix intercepts;  // M x (M-1)

    int states() const noexcept { return static_cast<int>(intercepts.rows()); }
    TransitionMatrix to_matrix() const;
    static TransitionLogits from_matrix(const TransitionMatrix& tpm,
                                        double floor = kProbabilityFloor);
};

struct EmissionParams {
    Matrix log_means;  // K x M, log b_ki

    Matrix means() const { return log_means.array().exp().matrix(); }
};

struct InitialDistribution {
    Vector pi;

    static InitialDistribution uniform(int m_states);
    void validate(double tol = 1e-12) const;
};

/// Population-level parameters of the multilevel model.
struct GroupParams {
    Matrix alpha_bar;          // M x (M-1)
    std::vector<Matrix> psi;   // M blocks of (M-1) x (M-1)
    Matrix b_bar;              // K x M, log scale
    Matrix tau;                // K x M, variances of log b_nki

    int states() const noexcept { return static_cast<int>(alpha_bar.rows()); }
    int series() const noexcept { return static_cast<int>(b_bar.rows()); }
    /// Checks shapes, SPD psi blocks and strictly positive tau.
    void validate() const;
};

struct IndividualParams {
    TransitionLogits alpha;
    EmissionParams b;
};

struct HyperPriors {
    Matrix m0;       // M x (M-1)
    double k0 = 1.0;
    Matrix psi0;     // (M-1) x (M-1)
    double df0 = 0.0;
    Matrix l0;       // K x M
    Matrix tau0;     // K x M
    Matrix c;        // K x M, inverse-gamma shape
    Matrix d;        // K x M, inverse-gamma rate

    /// Weakly informative defaults: m0 = 0, K0 = 1, psi0 = I, df0 = (M-1)+3,
    /// l0 = log of the pooled per-series mean count, tau0 = 4, c = d = 0.01.
    static HyperPriors defaults(int m_states, const Vector& pooled_series_means);
    void validate(int m_states, int k_series) const;
};

/// Multinomial-logit link: M-1 intercepts to an M-entry probability row.
/// Throws InvalidParameter on non-finite input.
Vector logit_to_probs(const Vector& logits);

/// Inverse link: entry j-1 of the result is ln(p_j / p_0). Entries below
/// `floor` are raised to `floor` and the row renormalized first. Throws
/// SingularLink if the reference entry is exactly zero.
Vector probs_to_logit(const Vector& probs, double floor = kProbabilityFloor);

/// ln Poisson(q | lambda) = q ln(lambda) - lambda - ln(q!).
double poisson_log_pmf(Count q, double lambda);

/// Sum over series of poisson_log_pmf(obs[k], means[k]).
double emission_log_likelihood(const Eigen::Ref<const Eigen::Matrix<Count, Eigen::Dynamic, 1>>& obs,
                               const Vector& means);

/// ln(q!) through the log-gamma function.
double log_factorial(Count q);

/// Log density of N(x | mean, cov) given the Cholesky factor of cov.
double mvnormal_log_density(const Vector& x, const Vector& mean, const Eigen::LLT<Matrix>& cov_llt);

/// Log density of N(x | mean, variance).
double normal_log_density(double x, double mean, double variance);

}  // namespace mhmm
