#pragma once

#include "mhmm/io.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace mhmm::cli {

/// Exit status of a fit whose group-level R-hat exceeds the threshold.
inline constexpr int kExitNotConverged = 3;

/// Options shared by every subcommand. The JSON document has optional
/// top-level "seed" and "workers" plus the sections "scenario", "mcmc",
/// "decode", "ppc", "montecarlo" and "fit". Command-line values win.
struct RunConfig {
    Json doc = Json::object();
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::filesystem::path out;

    /// Loads `path` when non-empty.
    void load(const std::filesystem::path& path);
    Json section(const std::string& name) const;
    /// ConfigError when neither the command line nor the file gives a seed.
    std::uint64_t require_seed() const;
    std::size_t worker_count() const;
};

struct SimulateOptions {
    std::optional<int> preset;
    std::optional<std::size_t> individuals;
    std::optional<std::size_t> length;
};

struct FitOptions {
    std::filesystem::path data;
    std::optional<std::string> pooling;
    std::optional<std::size_t> chains;
    std::optional<int> states;
    std::optional<double> rhat_threshold;
};

struct DecodeOptions {
    std::filesystem::path chains;
    std::filesystem::path data;
    std::optional<std::string> estimator;
    std::optional<std::string> local;
    std::optional<std::size_t> burn_in;
};

struct PpcOptions {
    std::filesystem::path chains;
    std::filesystem::path data;
    std::optional<std::size_t> replicates;
    std::optional<std::size_t> burn_in;
    std::size_t bins = 30;
};

struct MonteCarloOptions {
    std::optional<std::size_t> replications;
    bool both_models = false;
};

struct ReportOptions {
    std::filesystem::path chains;
    std::optional<std::size_t> burn_in;
    std::optional<std::string> estimator;
};

// Each returns the process exit status and writes human-readable progress to `log`.
int cmd_simulate(const RunConfig& cfg, const SimulateOptions& opt, std::ostream& log);
int cmd_fit(const RunConfig& cfg, const FitOptions& opt, std::ostream& log);
int cmd_decode(const RunConfig& cfg, const DecodeOptions& opt, std::ostream& log);
int cmd_ppc(const RunConfig& cfg, const PpcOptions& opt, std::ostream& log);
int cmd_montecarlo(const RunConfig& cfg, const MonteCarloOptions& opt, std::ostream& log);
int cmd_report(const RunConfig& cfg, const ReportOptions& opt, std::ostream& log);

}  // namespace mhmm::cli
