#pragma once

// Random-walk Metropolis kernels for the individual-level parameters.

#include "mhmm/model.hpp"
#include "mhmm/random.hpp"

#include <cmath>
#include <cstddef>
#include <vector>

namespace mhmm {

/// Proposal scale with Robbins-Monro adaptation of its logarithm toward a
/// target acceptance rate. Adapts only until freeze() is called.
class ScaleTuner {
public:
    ScaleTuner() = default;
    ScaleTuner(double initial_scale, double target) : log_scale_(std::log(initial_scale)), target_(target), set_(true) {}

    bool initialized() const noexcept { return set_; }
    double scale() const noexcept { return std::exp(log_scale_); }
    double target() const noexcept { return target_; }
    bool adapting() const noexcept { return adapting_; }

    void reset(double initial_scale, double target) { *this = ScaleTuner(initial_scale, target); }
    void record(bool accepted);
    void freeze() noexcept { adapting_ = false; }

    std::size_t proposals() const noexcept { return proposals_; }
    std::size_t accepts() const noexcept { return accepts_; }
    /// Acceptance rate over proposals made after freeze(); over all proposals
    /// if the tuner never froze.
    double acceptance_rate() const noexcept;
    double burn_in_acceptance_rate() const noexcept;

private:
    double log_scale_ = 0.0;
    double target_ = 0.44;
    bool set_ = false;
    bool adapting_ = true;
    std::size_t steps_ = 0;
    std::size_t proposals_ = 0;
    std::size_t accepts_ = 0;
    std::size_t frozen_proposals_ = 0;
    std::size_t frozen_accepts_ = 0;
};

/// sum_j n_j ln a_j for one transition row under the logit link.
double multinomial_logit_log_likelihood(const Eigen::Ref<const Eigen::VectorXi>& row_counts, const Vector& logits);

/// One random-walk step for the intercepts of a single origin state. The
/// proposal is current + scale * L z with L L^T the proposal covariance.
/// Target: multinomial log-likelihood of the row counts plus the normal prior.
Vector metropolis_update_alpha_row(const Eigen::Ref<const Eigen::VectorXi>& row_counts, const Vector& current,
                                   const Vector& prior_mean, const Eigen::LLT<Matrix>& prior_cov,
                                   const Matrix& proposal_chol, ScaleTuner& tuner, Rng& rng);

/// Updates every row of an individual's intercepts. Proposal covariance for
/// state i is psi_i + ridge * I. `tuners` holds one tuner per state;
/// uninitialized tuners start at 2.38 / sqrt(M-1).
TransitionLogits metropolis_update_alpha_n(const Eigen::MatrixXi& counts, const TransitionLogits& current,
                                           const Matrix& alpha_bar, const std::vector<Matrix>& psi,
                                           std::vector<ScaleTuner>& tuners, Rng& rng, double ridge = 0.1,
                                           double target_uni = 0.44, double target_multi = 0.23);

/// Unnormalized log target of u = log b:
/// q_sum u - t_occ e^u + ln N(u | b_bar, tau).
double log_b_target(double u, double q_sum, double t_occ, double b_bar, double tau);

/// One random-walk step on log b_nki. An uninitialized tuner starts at
/// 2.4 / sqrt(t_occ e^u + 1 / tau) with target `target_uni`.
double metropolis_update_b_nki(double q_sum, double t_occ, double current, double b_bar, double tau,
                               ScaleTuner& tuner, Rng& rng, double target_uni = 0.44);

}  // namespace mhmm
