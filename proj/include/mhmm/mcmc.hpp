#pragma once

// Metropolis-within-Gibbs sampler for the multilevel Poisson-lognormal HMM
// and its complete-pooling (single-level) counterpart.
//
// One iteration: forward-filter backward-sample every individual's hidden
// path; Gibbs draws of (alpha_bar_i, psi_i) and (tau_ki, b_bar_ki); random-walk
// Metropolis on every individual's intercept rows and log Poisson means.

#include "mhmm/metropolis.hpp"
#include "mhmm/model.hpp"
#include "mhmm/simulate.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mhmm {

enum class Pooling { multilevel, complete };

const char* to_string(Pooling p) noexcept;
Pooling pooling_from_string(const std::string& s);

struct McmcConfig {
    std::size_t n_iter = 4000;
    std::size_t burn_in = 2000;
    std::size_t n_chains = 1;
    std::uint64_t seed = 0;
    /// Defaults from HyperPriors::defaults() on the data when unset.
    std::optional<HyperPriors> hyper;
    /// Data-driven starting values (k-means on square-root counts) when unset.
    std::optional<GroupParams> start;
    double adapt_target_uni = 0.44;
    double adapt_target_multi = 0.23;
    Pooling pooling = Pooling::multilevel;
    /// Store sampled paths every `path_thin` iterations; 0 stores none.
    std::size_t path_thin = 10;
    /// Proposal covariance of intercept row i is psi_i + ridge * I.
    double proposal_ridge = 0.1;
    /// Fixed initial state distribution; uniform when unset.
    std::optional<InitialDistribution> pi;
    /// Apply the post-hoc state relabeling pass to each finished chain.
    bool relabel = true;

    void validate() const;
};

struct AcceptanceRecord {
    std::string block;
    std::size_t proposals = 0;
    double burn_in_rate = 0.0;
    double sampling_rate = 0.0;
};

/// Every iteration of one chain. For complete pooling, `group[r].psi` and
/// `group[r].tau` are empty and each individual entry repeats the shared
/// parameters.
struct ChainStore {
    int m_states = 0;
    int k_series = 0;
    Pooling pooling = Pooling::multilevel;
    std::size_t burn_in = 0;
    std::uint64_t seed = 0;
    std::size_t chain_index = 0;
    InitialDistribution pi;
    HyperPriors hyper;

    std::vector<GroupParams> group;
    std::vector<std::vector<IndividualParams>> individual;
    std::vector<std::size_t> path_iterations;
    std::vector<std::vector<StatePath>> paths;
    /// ln P(O | individual parameters of iteration r), paths integrated out.
    std::vector<double> log_likelihood;
    /// log_likelihood plus every prior and hyper-prior term.
    std::vector<double> log_posterior;
    std::vector<AcceptanceRecord> acceptance;

    std::size_t iterations() const noexcept { return group.size(); }
    std::size_t n_individuals() const noexcept { return individual.empty() ? 0 : individual.front().size(); }
};

/// Starting values: k-means on square-root counts seeds the emission means
/// (states ordered by ascending mean on series 1) and the TPM has 0.7 on its
/// diagonal.
GroupParams default_start(const ObservationSet& obs, int m_states);

/// One chain; chain_index > 0 perturbs the starting values.
ChainStore run_chain(const ObservationSet& obs, int m_states, const McmcConfig& cfg, std::size_t chain_index);

/// cfg.n_chains independent chains.
std::vector<ChainStore> run_mcmc(const ObservationSet& obs, int m_states, const McmcConfig& cfg);

/// Permutation `perm` with new state a taken from old state perm[a].
using StatePermutation = std::vector<int>;

void permute_states(GroupParams& g, const StatePermutation& perm);
void permute_states(IndividualParams& p, const StatePermutation& perm);
void permute_states(StatePath& path, const StatePermutation& perm);
void permute_states(ChainStore& chain, const StatePermutation& perm);

/// Greedy matching of emission-mean columns: repeatedly pairs the closest
/// remaining (reference, candidate) columns. Result maps reference state a
/// to candidate state perm[a].
StatePermutation greedy_match(const Matrix& reference_log_means, const Matrix& candidate_log_means);

/// Relabels every iteration against the emission means of iteration 0.
/// Returns the number of iterations that were permuted.
std::size_t relabel_chain(ChainStore& chain);

/// Log density of IW(x | scale, df).
double inverse_wishart_log_density(const Matrix& x, const Matrix& scale, double df);
/// Log density of the inverse-gamma with the given shape and scale.
double inverse_gamma_log_density(double x, double shape, double scale);

}  // namespace mhmm
