#pragma once

// Scaled forward recursion, forward-filter backward-sample, and the smoothing
// pass. These kernels are shared by the sampler and the decoder.

#include "mhmm/model.hpp"
#include "mhmm/random.hpp"

namespace mhmm {

struct ForwardTable {
    Matrix filtered;   // T x M, row t = P(S_t | O_1..t)
    Vector log_scale;  // T, log of the per-step normalizers
    double log_likelihood = 0.0;
};

/// T x M matrix of sum_k ln Poisson(O[k][t] | exp(log_means[k][i])).
Matrix emission_log_matrix(const CountMatrix& obs, const Matrix& log_means);

/// Same as above with sum_k ln(O[k][t]!) already computed per occasion.
Matrix emission_log_matrix(const CountMatrix& obs, const Matrix& log_means, const Vector& log_factorial_sums);

/// Per-occasion sum over series of ln(O[k][t]!).
Vector log_factorial_sums(const CountMatrix& obs);

/// Forward recursion on precomputed log emissions. Throws FilteringDegeneracy
/// naming the first occasion at which every state has zero mass.
ForwardTable forward_filter_log(const Matrix& log_emissions, const TransitionMatrix& tpm,
                                const InitialDistribution& pi);

ForwardTable forward_filter(const CountMatrix& obs, const IndividualParams& params, const InitialDistribution& pi);

/// Exact draw from P(S_1..T | O_1..T): S_T from the last filtered row, then
/// S_t | S_{t+1}=j proportional to F[t][i] a_ij.
StatePath backward_sample(const ForwardTable& fwd, const TransitionMatrix& tpm, Rng& rng);

/// T x M smoothed marginals P(S_t | O_1..T) from the scaled backward pass.
Matrix smoothed_marginals(const ForwardTable& fwd, const Matrix& log_emissions, const TransitionMatrix& tpm);

/// M x M transition counts of a path.
Eigen::MatrixXi transition_counts(const StatePath& path, int m_states);

}  // namespace mhmm
