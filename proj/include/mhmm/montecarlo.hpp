#pragma once

// Repeated simulate -> fit -> align -> decode -> score, aggregated into
// Monte Carlo performance tables.

#include "mhmm/decode.hpp"
#include "mhmm/evaluate.hpp"
#include "mhmm/io.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mhmm {

struct MonteCarloConfig {
    ScenarioConfig scenario;  // seed is replaced per replication
    McmcConfig mcmc;          // seed is replaced per replication and model
    /// Hyper-prior overrides applied on top of each dataset's defaults.
    Json hyper_overrides = Json::object();
    std::vector<Pooling> poolings{Pooling::multilevel};
    std::size_t replications = 25;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    Estimator estimator = Estimator::map;
    F1Average f1 = F1Average::macro;
    /// Per-replication checkpoints live here when set.
    std::optional<std::filesystem::path> checkpoint_dir;
    /// Identifies the configuration in checkpoints; stale ones are recomputed.
    std::string config_hash;

    void validate() const;
};

struct ModelFit {
    Pooling pooling = Pooling::multilevel;
    EstimateSummary estimate;  // aligned to the true state labels
    Vector truth;
    AgreementScores decoding;
};

struct ReplicationResult {
    std::size_t index = 0;
    bool ok = false;
    std::string error;
    std::vector<ModelFit> fits;  // one per requested pooling, same order
};

struct MetricInterval {
    std::string metric;
    double mean = 0.0;
    double lower = 0.0;  // 2.5% across replications
    double upper = 0.0;  // 97.5%
};

struct ModelSummary {
    Pooling pooling = Pooling::multilevel;
    McReport report;
    std::vector<MetricInterval> decoding;  // balanced_accuracy, f1, kappa
};

struct MonteCarloResult {
    std::vector<ReplicationResult> replications;
    std::vector<ModelSummary> models;
    std::size_t failed = 0;
};

/// One replication; never throws for sampler or data failures, which are
/// reported through ok/error instead.
ReplicationResult run_replication(const MonteCarloConfig& cfg, std::size_t index);

/// All replications on cfg.workers threads, reusing matching checkpoints.
/// Output does not depend on the worker count.
MonteCarloResult run_montecarlo(const MonteCarloConfig& cfg);

/// Aggregates successful replications; models with fewer than 2 successes
/// are left out.
std::vector<ModelSummary> summarize_replications(const std::vector<ReplicationResult>& reps,
                                                 const std::vector<Pooling>& poolings);

/// Parameter table: `parameter,truth` then per model `<MODEL>_estimate,
/// _bias,_rel_bias,_emp_se,_mse,_coverage,_bc_coverage` (MODEL is MHMM or
/// HMM). Cells a model does not estimate are left empty.
std::string mc_report_csv(const MonteCarloResult& result);

/// `model,metric,mean,lower,upper` plus `failed_replications` as a trailer.
std::string mc_decoding_csv(const MonteCarloResult& result);

const char* model_label(Pooling p) noexcept;

Json replication_to_json(const ReplicationResult& r);
ReplicationResult replication_from_json(const Json& j);

}  // namespace mhmm
