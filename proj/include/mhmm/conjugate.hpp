#pragma once

// Conjugate Gibbs updates of the group-level parameters.

#include "mhmm/model.hpp"
#include "mhmm/random.hpp"

#include <span>
#include <vector>

namespace mhmm {

/// Normal-inverse-Wishart: psi ~ IW(scale, df), mean | psi ~ N(location, psi / kappa).
struct NiwParams {
    Vector location;
    double kappa = 1.0;
    Matrix scale;
    double df = 0.0;
};

/// Full conditional of (alpha_bar_i, psi_i) given the individual intercept
/// rows alpha_ni for one origin state. With no rows it is the prior.
NiwParams transition_group_posterior(std::span<const Vector> rows, const Vector& m0, double k0,
                                     const Matrix& psi0, double df0);

struct NiwDraw {
    Vector mean;
    Matrix cov;
};

NiwDraw draw_niw(const NiwParams& params, Rng& rng);

struct TransitionGroupDraw {
    Matrix alpha_bar;         // M x (M-1)
    std::vector<Matrix> psi;  // M blocks
};

/// Joint draw of every (alpha_bar_i, psi_i) from its full conditional.
TransitionGroupDraw gibbs_update_transition_group(const std::vector<TransitionLogits>& alpha_all,
                                                  const HyperPriors& hyper, Rng& rng);

/// Inverse-gamma with density proportional to x^{-shape-1} exp(-scale / x).
struct InverseGammaParams {
    double shape = 0.0;
    double scale = 0.0;
};

struct NormalParams {
    double mean = 0.0;
    double variance = 1.0;
};

/// Full conditional of tau_ki given b_bar_ki and the individual log means.
InverseGammaParams emission_variance_posterior(std::span<const double> log_b, double b_bar, double c, double d);

/// Full conditional of b_bar_ki given tau_ki and the individual log means.
NormalParams emission_mean_posterior(std::span<const double> log_b, double tau, double l0, double tau0);

struct EmissionGroupDraw {
    Matrix b_bar;  // K x M
    Matrix tau;    // K x M
};

/// Per (k, i): tau_ki from its inverse-gamma conditional given the current
/// b_bar_ki, then b_bar_ki given the fresh tau_ki.
/// `log_b_all[n]` is the K x M matrix of individual log means.
EmissionGroupDraw gibbs_update_emission_group(const std::vector<Matrix>& log_b_all, const Matrix& b_bar_current,
                                              const HyperPriors& hyper, Rng& rng);

}  // namespace mhmm
