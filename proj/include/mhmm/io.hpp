#pragma once

// Files on disk: the long-format dataset CSV, truth sidecars, JSON run
// configuration, and the ChainStore directory.
//
// Dataset CSV: header `individual,time,series,count`, one row per count.
// Individuals keep the order of first appearance, time runs 1..T_n without
// gaps, series ids are 1..K and every occasion carries every series.
//
// Truth sidecars (written next to the dataset):
//   truth.json  {"format": "mhmm-truth", "version": 1, "m_states", "k_series",
//                "lengths", "pi", "group": {...}, "individuals": [...]}
//   paths.csv   first line `# mhmm-paths v1`, then `individual,time,state`
//               with 1-based states.
//
// ChainStore directory:
//   manifest.json  {"format": "mhmm-chains", "version", "spec", "config_hash",
//                   "seed", "chain_count", "pooling", "burn_in", "pi", "hyper"}
//   chain_<c>/     group.csv, individual.csv, trace.csv, paths.csv,
//                  acceptance.csv (columnar, full double precision)

#include "mhmm/decode.hpp"
#include "mhmm/evaluate.hpp"
#include "mhmm/mcmc.hpp"
#include "mhmm/simulate.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mhmm {

using Json = nlohmann::json;

const char* software_version() noexcept;

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(const std::string& bytes) noexcept;
std::string hex64(std::uint64_t v);
/// Hash of the canonical (sorted-key, compact) serialization.
std::string config_hash(const Json& config);

/// CSV field with RFC 4180 quoting when it holds a comma, quote or newline.
std::string csv_field(const std::string& s);
/// Splits one CSV line, honouring double-quoted fields; fields are trimmed.
std::vector<std::string> split_csv_line(const std::string& line);

/// %.17g formatting: parses back to the identical double.
std::string format_exact(double v);

// ---- dataset ---------------------------------------------------------------

/// Throws DataError naming the offending row (1-based, header is row 1).
/// With `k_series` set, series ids above it are rejected as unknown.
ObservationSet parse_observations_csv(std::istream& in, std::optional<int> k_series = std::nullopt);
ObservationSet read_observations_csv(const std::filesystem::path& path, std::optional<int> k_series = std::nullopt);
void write_observations_csv(const std::filesystem::path& path, const ObservationSet& obs);

void write_truth(const std::filesystem::path& dir, const Dataset& data, const InitialDistribution& pi);
/// Reads truth.json and paths.csv from `dir` into the non-observation fields.
Dataset read_truth(const std::filesystem::path& dir);

// ---- JSON conversions ------------------------------------------------------

Json matrix_to_json(const Matrix& m);
/// Accepts a nested array of rows, a flat array (one row, or one column when
/// `rows` > 1) or a scalar broadcast to rows x cols. Negative sizes mean
/// "whatever the JSON has".
Matrix matrix_from_json(const Json& j, Eigen::Index rows = -1, Eigen::Index cols = -1);

Json group_to_json(const GroupParams& g);
GroupParams group_from_json(const Json& j);
Json hyper_to_json(const HyperPriors& h);
/// Overrides individual fields of `base` with those present in `j`.
HyperPriors hyper_from_json(const Json& j, HyperPriors base);

/// Scenario section: {"preset": 1..4, "n_individuals", "length"} and/or
/// explicit "m_states", "k_series", "n_individuals", "length" | "lengths",
/// "tpm", "log_means" | "means", "psi" | "psi_diag", "tau", "pi".
/// Explicit keys override the preset. The seed comes from the caller.
ScenarioConfig scenario_from_json(const Json& j, std::uint64_t seed);
Json scenario_to_json(const ScenarioConfig& cfg);

/// Mcmc section: "iterations", "burn_in", "chains", "pooling", "path_thin",
/// "proposal_ridge", "adapt_target_uni", "adapt_target_multi", "relabel",
/// "start", "pi". Hyper-prior overrides ("hyper") need the data and are
/// applied by resolve_hyper().
McmcConfig mcmc_from_json(const Json& j, std::uint64_t seed);

/// Data-dependent defaults overridden by section["hyper"] when present.
HyperPriors resolve_hyper(const Json& mcmc_section, const ObservationSet& obs, int m_states);

/// Reads a JSON file; IoError when unreadable, ConfigError when malformed.
Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// ---- ChainStore directory ----------------------------------------------------

struct ChainManifest {
    Json spec;  // {"m_states", "k_series", "lengths"}
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string version;
    std::size_t chain_count = 0;
};

void write_chain_store(const std::filesystem::path& dir, const std::vector<ChainStore>& chains,
                       const ChainManifest& manifest);
ChainManifest read_manifest(const std::filesystem::path& dir);
/// IoError when the manifest is missing.
std::vector<ChainStore> read_chain_store(const std::filesystem::path& dir);

// ---- decode output -----------------------------------------------------------

/// `time,state,prob_state_1..prob_state_M` with 1-based time and state.
void write_decode_csv(const std::filesystem::path& path, const DecodeResult& result);

}  // namespace mhmm
