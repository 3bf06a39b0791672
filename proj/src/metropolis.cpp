#include "mhmm/metropolis.hpp"

#include "mhmm/error.hpp"

#include <algorithm>
#include <cmath>

namespace mhmm {

void ScaleTuner::record(bool accepted) {
    ++proposals_;
    if (accepted) ++accepts_;
    if (adapting_) {
        ++steps_;
        const double gain = std::min(1.0, 3.0 / std::pow(static_cast<double>(steps_) + 2.0, 0.6));
        log_scale_ += gain * ((accepted ? 1.0 : 0.0) - target_);
    } else {
        ++frozen_proposals_;
        if (accepted) ++frozen_accepts_;
    }
}

double ScaleTuner::acceptance_rate() const noexcept {
    if (frozen_proposals_ > 0) return static_cast<double>(frozen_accepts_) / static_cast<double>(frozen_proposals_);
    return proposals_ > 0 ? static_cast<double>(accepts_) / static_cast<double>(proposals_) : 0.0;
}

double ScaleTuner::burn_in_acceptance_rate() const noexcept {
    const std::size_t n = proposals_ - frozen_proposals_;
    return n > 0 ? static_cast<double>(accepts_ - frozen_accepts_) / static_cast<double>(n) : 0.0;
}

double multinomial_logit_log_likelihood(const Eigen::Ref<const Eigen::VectorXi>& row_counts, const Vector& logits) {
    const Eigen::Index m = row_counts.size();
    double shift = 0.0;
    for (Eigen::Index j = 0; j < logits.size(); ++j) shift = std::max(shift, logits(j));
    double denom = std::exp(-shift);
    double numer = 0.0;
    long total = row_counts(0);
    for (Eigen::Index j = 1; j < m; ++j) {
        denom += std::exp(logits(j - 1) - shift);
        numer += row_counts(j) * logits(j - 1);
        total += row_counts(j);
    }
    return numer - static_cast<double>(total) * (shift + std::log(denom));
}

Vector metropolis_update_alpha_row(const Eigen::Ref<const Eigen::VectorXi>& row_counts, const Vector& current,
                                   const Vector& prior_mean, const Eigen::LLT<Matrix>& prior_cov,
                                   const Matrix& proposal_chol, ScaleTuner& tuner, Rng& rng) {
    Vector z(current.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = rng.normal();
    const Vector proposal = current + tuner.scale() * (proposal_chol * z);
    const double log_ratio = multinomial_logit_log_likelihood(row_counts, proposal) +
                             mvnormal_log_density(proposal, prior_mean, prior_cov) -
                             multinomial_logit_log_likelihood(row_counts, current) -
                             mvnormal_log_density(current, prior_mean, prior_cov);
    const bool accept = std::isfinite(log_ratio) && std::log(rng.uniform()) < log_ratio;
    tuner.record(accept);
    return accept ? proposal : current;
}

TransitionLogits metropolis_update_alpha_n(const Eigen::MatrixXi& counts, const TransitionLogits& current,
                                           const Matrix& alpha_bar, const std::vector<Matrix>& psi,
                                           std::vector<ScaleTuner>& tuners, Rng& rng, double ridge,
                                           double target_uni, double target_multi) {
    const int m = current.states();
    if (static_cast<int>(tuners.size()) != m) tuners.resize(static_cast<std::size_t>(m));
    TransitionLogits out = current;
    const Eigen::Index dim = m - 1;
    for (int i = 0; i < m; ++i) {
        const Matrix& cov = psi[static_cast<std::size_t>(i)];
        const Eigen::LLT<Matrix> prior(cov);
        if (prior.info() != Eigen::Success) throw CovarianceError("group covariance is not SPD");
        const Eigen::LLT<Matrix> prop(cov + ridge * Matrix::Identity(dim, dim));
        if (prop.info() != Eigen::Success) throw CovarianceError("proposal covariance is not SPD");
        auto& tuner = tuners[static_cast<std::size_t>(i)];
        if (!tuner.initialized()) {
            tuner.reset(2.38 / std::sqrt(static_cast<double>(dim)), dim == 1 ? target_uni : target_multi);
        }
        out.intercepts.row(i) =
            metropolis_update_alpha_row(counts.row(i).transpose(), current.intercepts.row(i).transpose(),
                                        alpha_bar.row(i).transpose(), prior, prop.matrixL(), tuner, rng)
                .transpose();
    }
    return out;
}

double log_b_target(double u, double q_sum, double t_occ, double b_bar, double tau) {
    const double r = u - b_bar;
    return q_sum * u - t_occ * std::exp(u) - 0.5 * r * r / tau;
}

double metropolis_update_b_nki(double q_sum, double t_occ, double current, double b_bar, double tau,
                               ScaleTuner& tuner, Rng& rng, double target_uni) {
    if (!tuner.initialized()) {
        tuner.reset(2.4 / std::sqrt(t_occ * std::exp(current) + 1.0 / tau), target_uni);
    }
    const double proposal = current + tuner.scale() * rng.normal();
    const double log_ratio =
        log_b_target(proposal, q_sum, t_occ, b_bar, tau) - log_b_target(current, q_sum, t_occ, b_bar, tau);
    const bool accept = std::isfinite(log_ratio) && std::log(rng.uniform()) < log_ratio;
    tuner.record(accept);
    return accept ? proposal : current;
}

}  // namespace mhmm
