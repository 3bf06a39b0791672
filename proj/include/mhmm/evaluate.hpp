#pragma once

// Point estimates from chains, Monte Carlo performance metrics, decoding
// accuracy, probability-scale heterogeneity and posterior predictive checks.

#include "mhmm/mcmc.hpp"
#include "mhmm/simulate.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace mhmm {

enum class Estimator { map, median };

Estimator estimator_from_string(const std::string& s);

struct ScalarSummary {
    double point = 0.0;
    double cri_low = 0.0;
    double cri_high = 0.0;
};

/// Linear-interpolation sample quantile (type 7).
double quantile(std::vector<double> values, double prob);

/// Point estimate and central 95% interval of one scalar's draws. With
/// Estimator::map the point is the draw at the largest log posterior.
ScalarSummary summarize_draws(std::span<const double> draws, std::span<const double> log_posterior,
                              Estimator estimator);

/// Group-level summary on the reporting scale:
///   a_bar[i,j]     transition probabilities (logit_to_probs of alpha_bar)
///   b_bar[k,i]     log Poisson means
///   psi[i,j]       diagonal of psi_i, j = 2..M           (multilevel only)
///   tau[k,i]                                              (multilevel only)
///   adhoc_var[i,j] variance across individuals of a_nij   (multilevel only)
struct EstimateSummary {
    std::vector<std::string> names;
    Vector point;
    Vector cri_low;
    Vector cri_high;
    std::size_t map_iteration = 0;

    Eigen::Index index_of(const std::string& name) const;
};

/// Names produced by map_estimate() for a model of this shape.
std::vector<std::string> summary_names(int m_states, int k_series, Pooling pooling);

/// Summary over iterations [burn_in, end). Throws ConfigError when nothing
/// is left after burn-in.
EstimateSummary map_estimate(const ChainStore& chain, std::size_t burn_in, Estimator estimator = Estimator::map);

/// Index of the post-burn-in iteration with the largest log posterior.
std::size_t map_iteration(const ChainStore& chain, std::size_t burn_in);

/// Per-individual point estimates: the MAP iteration's parameters, or
/// per-scalar posterior medians of the logits and log means.
std::vector<IndividualParams> point_individual_params(const ChainStore& chain, std::size_t burn_in,
                                                      Estimator estimator = Estimator::map);

/// True values in summary_names() order. adhoc_var is computed from the
/// individual parameters that generated the data.
Vector truth_scalars(const GroupParams& truth, const std::vector<IndividualParams>& true_individual,
                     Pooling pooling);

struct McRow {
    std::string name;
    double truth = 0.0;
    double mean_estimate = 0.0;
    double bias = 0.0;
    double relative_bias = 0.0;  // bias itself when |truth| < 1e-8
    double emp_se = 0.0;
    double mse = 0.0;
    double coverage = 0.0;
    double bias_corrected_coverage = 0.0;
    std::size_t replications = 0;
};

struct McReport {
    std::vector<McRow> rows;

    const McRow& row(const std::string& name) const;
};

/// Metrics across replications. `truths[r]` holds replication r's true
/// values aligned with estimates[r].names. Needs at least 2 replications.
McReport mc_metrics(const std::vector<EstimateSummary>& estimates, const std::vector<Vector>& truths);

/// Same, with one truth shared by every replication.
McReport mc_metrics(const std::vector<EstimateSummary>& estimates, const Vector& truth);

enum class F1Average { macro, micro };

struct AgreementScores {
    double balanced_accuracy = 0.0;
    double f1 = 0.0;
    double kappa = 0.0;
};

struct DecodingMetrics {
    AgreementScores pooled;
    Eigen::MatrixXd confusion;  // rows: true state, cols: decoded state
    std::vector<AgreementScores> per_individual;
};

AgreementScores agreement_from_confusion(const Eigen::MatrixXd& confusion, F1Average average = F1Average::macro);

/// Metrics on the confusion matrix pooled over individuals and occasions.
/// Throws DataError on labels outside [0, M) or mismatched lengths.
DecodingMetrics decoding_metrics(const std::vector<StatePath>& true_paths, const std::vector<StatePath>& decoded_paths,
                                 int m_states, F1Average average = F1Average::macro);

/// M x M sample variances (n - 1 denominator) of a_nij across individuals.
Matrix adhoc_tpm_variance(const std::vector<IndividualParams>& individual_params);

inline constexpr std::array<const char*, 4> kPpcStatistics{"mean", "sd", "max", "prop_zero"};

/// mean, SD, max and proportion of zeros of one series pooled over individuals.
std::array<double, 4> series_statistics(const ObservationSet& obs, int series);

struct PpcReport {
    std::size_t r_rep = 0;
    std::vector<std::array<double, 4>> observed;                 // [series]
    std::vector<std::vector<std::array<double, 4>>> replicates;  // [rep][series]
    std::vector<std::array<double, 4>> tail_probability;         // P(T_rep >= T_obs), [series]
    Matrix observed_individual_means;                            // K x N
    std::vector<Matrix> replicate_individual_means;              // [rep], K x N
};

/// Replicates datasets of the observed shape from post-burn-in draws and
/// compares summary statistics. Throws ConfigError when r_rep < 1.
PpcReport posterior_predictive(const ChainStore& chain, const ObservationSet& obs, std::size_t r_rep, Rng& rng,
                               std::size_t burn_in);

}  // namespace mhmm
