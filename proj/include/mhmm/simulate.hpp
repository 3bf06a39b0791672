#pragma once

#include "mhmm/model.hpp"
#include "mhmm/random.hpp"

#include <cstdint>
#include <vector>

namespace mhmm {

/// Ragged multivariate count data: one K x T_n matrix per individual.
struct ObservationSet {
    int k_series = 0;
    std::vector<CountMatrix> counts;

    std::size_t n_individuals() const noexcept { return counts.size(); }
    std::vector<std::size_t> lengths() const;
    /// Per-series mean count over all individuals and occasions.
    Vector pooled_series_means() const;
    /// Throws DataError on empty data, inconsistent K or negative counts.
    void validate() const;
};

/// Group-level generating values of a simulation. psi and tau may contain
/// zeros; a zero block means no between-individual spread in that component.
struct ScenarioConfig {
    ModelSpec spec;
    TransitionMatrix group_tpm;
    Matrix group_log_means;    // K x M
    std::vector<Matrix> psi;   // M blocks (M-1) x (M-1), positive semi-definite
    Matrix tau;                // K x M, >= 0
    std::uint64_t seed = 0;
    InitialDistribution pi;

    void validate() const;
    /// Group parameters on the model scale (logit intercepts of group_tpm).
    GroupParams group_params() const;
};

struct Dataset {
    ObservationSet obs;
    std::vector<StatePath> true_paths;
    GroupParams true_group;
    std::vector<IndividualParams> true_individual;
};

/// Individual intercepts ~ N(alpha_bar_i, psi_i) row by row and
/// log b_nki ~ N(b_bar_ki, tau_ki). Zero variances reproduce the group value
/// exactly. Accepts positive semi-definite psi blocks.
IndividualParams draw_individual_params(const GroupParams& group, Rng& rng);

StatePath sample_hidden_path(const TransitionMatrix& tpm, const InitialDistribution& pi, std::size_t t_len,
                             Rng& rng);

/// K x T counts with O[k][t] ~ Poisson(b[k][S_t]).
CountMatrix sample_counts(const StatePath& path, const EmissionParams& b, Rng& rng);

/// Deterministic in cfg (including seed); individual n uses its own substream.
Dataset generate_scenario(const ScenarioConfig& cfg);

/// Generating values shared by the four heterogeneity presets: M = 4, K = 1,
/// b_bar = log(1, 11, 38, 119) and the empirical breath-anomaly TPM.
TransitionMatrix preset_group_tpm();
Matrix preset_group_log_means();

/// Scenario 1..4: none, transitions only, emissions only, both heterogeneous.
/// Heterogeneous transitions use psi = diag(0.9) per state, heterogeneous
/// emissions use tau = (0.9, 0.7, 0.5, 0.2) across states.
ScenarioConfig scenario_preset(int scenario, std::size_t n_individuals, std::size_t t_len,
                               std::uint64_t seed);

}  // namespace mhmm
