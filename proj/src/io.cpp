#include "mhmm/io.hpp"

#include "mhmm/diagnostics.hpp"
#include "mhmm/error.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#ifndef MHMM_VERSION
#define MHMM_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;

namespace mhmm {

namespace {

std::string trim_copy(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

}  // namespace

const char* software_version() noexcept { return MHMM_VERSION; }

std::uint64_t fnv1a64(const std::string& bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string config_hash(const Json& config) { return hex64(fnv1a64(config.dump())); }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
            was_quoted = true;
        } else if (c == ',') {
            out.push_back(was_quoted ? field : trim_copy(field));
            field.clear();
            was_quoted = false;
        } else {
            field += c;
        }
    }
    out.push_back(was_quoted ? field : trim_copy(field));
    return out;
}

std::string format_exact(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

std::string trim(const std::string& s) { return trim_copy(s); }

std::vector<std::string> split(const std::string& line) { return split_csv_line(line); }

bool parse_int(const std::string& s, std::int64_t& out) {
    if (s.empty()) return false;
    const char* b = s.data();
    const char* e = b + s.size();
    if (*b == '+') ++b;
    const auto [ptr, ec] = std::from_chars(b, e, out);
    return ec == std::errc{} && ptr == e;
}

double parse_double(const std::string& s, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw DataError(where + ": '" + s + "' is not a number");
    return v;
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    return in;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

void check_written(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) throw IoError("failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

[[noreturn]] void row_error(std::size_t row, const std::string& what) {
    throw DataError("row " + std::to_string(row) + ": " + what);
}

}  // namespace

// ---- dataset ---------------------------------------------------------------

ObservationSet parse_observations_csv(std::istream& in, std::optional<int> k_series) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("dataset is empty");
    const auto header = split(trim(line));
    if (header != std::vector<std::string>{"individual", "time", "series", "count"}) {
        throw DataError("row 1: header must be individual,time,series,count");
    }
    struct Individual {
        std::string id;
        std::vector<std::map<int, Count>> occasions;
    };
    std::vector<Individual> people;
    std::map<std::string, std::size_t> index;
    int max_series = 0;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        line = trim(line);
        if (line.empty()) continue;
        const auto f = split(line);
        if (f.size() != 4) row_error(row, "expected 4 fields, found " + std::to_string(f.size()));
        if (f[0].empty()) row_error(row, "missing individual id");
        std::int64_t time = 0;
        std::int64_t series = 0;
        std::int64_t count = 0;
        if (!parse_int(f[1], time)) row_error(row, "time '" + f[1] + "' is not an integer");
        if (!parse_int(f[2], series)) row_error(row, "series '" + f[2] + "' is not an integer");
        if (!parse_int(f[3], count)) row_error(row, "count '" + f[3] + "' is not an integer");
        if (count < 0) row_error(row, "negative count " + f[3]);
        if (series < 1 || (k_series && series > *k_series)) row_error(row, "unknown series id " + f[2]);
        auto [it, inserted] = index.emplace(f[0], people.size());
        if (inserted) people.push_back({f[0], {}});
        Individual& who = people[it->second];
        const auto seen = static_cast<std::int64_t>(who.occasions.size());
        if (time < 1) row_error(row, "time " + f[1] + " is below 1");
        if (time > seen + 1) {
            row_error(row, "time " + f[1] + " for individual " + f[0] + " skips occasion " + std::to_string(seen + 1));
        }
        if (time == seen + 1) who.occasions.emplace_back();
        auto& occ = who.occasions[static_cast<std::size_t>(time - 1)];
        if (!occ.emplace(static_cast<int>(series), count).second) {
            row_error(row, "duplicate entry for individual " + f[0] + ", time " + f[1] + ", series " + f[2]);
        }
        max_series = std::max(max_series, static_cast<int>(series));
    }
    if (people.empty()) throw DataError("dataset has no rows");
    ObservationSet obs;
    obs.k_series = k_series ? *k_series : max_series;
    for (const auto& who : people) {
        CountMatrix c(obs.k_series, static_cast<Eigen::Index>(who.occasions.size()));
        for (std::size_t t = 0; t < who.occasions.size(); ++t) {
            for (int s = 1; s <= obs.k_series; ++s) {
                const auto hit = who.occasions[t].find(s);
                if (hit == who.occasions[t].end()) {
                    throw DataError("individual " + who.id + ", time " + std::to_string(t + 1) + ": series " +
                                    std::to_string(s) + " is missing");
                }
                c(s - 1, static_cast<Eigen::Index>(t)) = hit->second;
            }
        }
        obs.counts.push_back(std::move(c));
    }
    obs.validate();
    return obs;
}

ObservationSet read_observations_csv(const fs::path& path, std::optional<int> k_series) {
    auto in = open_in(path);
    try {
        return parse_observations_csv(in, k_series);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_observations_csv(const fs::path& path, const ObservationSet& obs) {
    auto out = open_out(path);
    out << "individual,time,series,count\n";
    for (std::size_t n = 0; n < obs.n_individuals(); ++n) {
        const auto& c = obs.counts[n];
        for (Eigen::Index t = 0; t < c.cols(); ++t) {
            for (Eigen::Index k = 0; k < c.rows(); ++k) out << n + 1 << ',' << t + 1 << ',' << k + 1 << ',' << c(k, t) << '\n';
        }
    }
    check_written(out, path);
}

// ---- JSON conversions ------------------------------------------------------

Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const Json& j, Eigen::Index rows, Eigen::Index cols) {
    auto fail = [&](const std::string& why) -> Matrix { throw ConfigError("matrix value " + j.dump() + ": " + why); };
    if (j.is_number()) {
        if (rows < 0 || cols < 0) return fail("a scalar needs a known shape");
        return Matrix::Constant(rows, cols, j.get<double>());
    }
    if (!j.is_array()) return fail("expected a number or an array");
    Matrix m;
    if (j.empty()) {
        m.resize(0, 0);
    } else if (j.front().is_array()) {
        const auto r = static_cast<Eigen::Index>(j.size());
        const auto c = static_cast<Eigen::Index>(j.front().size());
        m.resize(r, c);
        for (Eigen::Index i = 0; i < r; ++i) {
            const Json& row = j[static_cast<std::size_t>(i)];
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c) return fail("ragged rows");
            for (Eigen::Index k = 0; k < c; ++k) {
                if (!row[static_cast<std::size_t>(k)].is_number()) return fail("non-numeric entry");
                m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
            }
        }
    } else {
        const auto len = static_cast<Eigen::Index>(j.size());
        const bool column = rows > 1 && cols == 1;
        m.resize(column ? len : 1, column ? 1 : len);
        for (Eigen::Index i = 0; i < len; ++i) {
            if (!j[static_cast<std::size_t>(i)].is_number()) return fail("non-numeric entry");
            m(i) = j[static_cast<std::size_t>(i)].get<double>();
        }
    }
    if ((rows >= 0 && m.rows() != rows) || (cols >= 0 && m.cols() != cols)) {
        return fail("expected shape " + std::to_string(rows) + " x " + std::to_string(cols));
    }
    return m;
}

namespace {

Vector vector_from_json(const Json& j, Eigen::Index len) {
    const Matrix m = matrix_from_json(j, len, 1);
    return m.col(0);
}

Json vector_to_json(const Vector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& section) {
    if (!j.is_object()) throw ConfigError(section + " must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + section);
    }
}

template <typename T>
T get_as(const Json& j, const std::string& key, const std::string& section) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(section + "." + key + " has the wrong type");
    }
}

std::size_t get_count(const Json& j, const std::string& key, const std::string& section) {
    const Json& v = j.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        throw ConfigError(section + "." + key + " must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

Json individual_to_json(const IndividualParams& p) {
    return Json{{"alpha", matrix_to_json(p.alpha.intercepts)}, {"log_b", matrix_to_json(p.b.log_means)}};
}

IndividualParams individual_from_json(const Json& j) {
    return IndividualParams{TransitionLogits{matrix_from_json(j.at("alpha"))}, EmissionParams{matrix_from_json(j.at("log_b"))}};
}

}  // namespace

Json group_to_json(const GroupParams& g) {
    Json psi = Json::array();
    for (const auto& p : g.psi) psi.push_back(matrix_to_json(p));
    return Json{{"alpha_bar", matrix_to_json(g.alpha_bar)},
                {"psi", psi},
                {"b_bar", matrix_to_json(g.b_bar)},
                {"tau", matrix_to_json(g.tau)}};
}

GroupParams group_from_json(const Json& j) {
    check_keys(j, {"alpha_bar", "psi", "b_bar", "tau"}, "group parameters");
    GroupParams g;
    if (!j.contains("alpha_bar") || !j.contains("b_bar")) throw ConfigError("group parameters need alpha_bar and b_bar");
    g.alpha_bar = matrix_from_json(j.at("alpha_bar"));
    g.b_bar = matrix_from_json(j.at("b_bar"));
    if (j.contains("psi")) {
        for (const auto& p : j.at("psi")) g.psi.push_back(matrix_from_json(p));
    }
    if (j.contains("tau")) g.tau = matrix_from_json(j.at("tau"));
    return g;
}

Json hyper_to_json(const HyperPriors& h) {
    return Json{{"m0", matrix_to_json(h.m0)},   {"k0", h.k0},
                {"psi0", matrix_to_json(h.psi0)}, {"df0", h.df0},
                {"l0", matrix_to_json(h.l0)},   {"tau0", matrix_to_json(h.tau0)},
                {"c", matrix_to_json(h.c)},     {"d", matrix_to_json(h.d)}};
}

HyperPriors hyper_from_json(const Json& j, HyperPriors base) {
    check_keys(j, {"m0", "k0", "psi0", "df0", "l0", "tau0", "c", "d"}, "hyper");
    auto mat = [&](const char* key, Matrix& target) {
        if (j.contains(key)) target = matrix_from_json(j.at(key), target.rows(), target.cols());
    };
    mat("m0", base.m0);
    mat("psi0", base.psi0);
    mat("l0", base.l0);
    mat("tau0", base.tau0);
    mat("c", base.c);
    mat("d", base.d);
    if (j.contains("k0")) base.k0 = get_as<double>(j, "k0", "hyper");
    if (j.contains("df0")) base.df0 = get_as<double>(j, "df0", "hyper");
    return base;
}

ScenarioConfig scenario_from_json(const Json& j, std::uint64_t seed) {
    const std::string sec = "scenario";
    check_keys(j, {"preset", "m_states", "k_series", "n_individuals", "length", "lengths", "tpm", "log_means", "means",
                   "psi", "psi_diag", "tau", "pi"},
               sec);
    const std::size_t n_ind = j.contains("n_individuals") ? get_count(j, "n_individuals", sec) : 20;
    const std::size_t t_len = j.contains("length") ? get_count(j, "length", sec) : 200;
    ScenarioConfig cfg;
    if (j.contains("preset")) {
        cfg = scenario_preset(get_as<int>(j, "preset", sec), n_ind, t_len, seed);
    } else {
        if (!j.contains("m_states") || !j.contains("tpm") || !(j.contains("log_means") || j.contains("means"))) {
            throw ConfigError("scenario needs a preset or m_states, tpm and log_means");
        }
        const int m = get_as<int>(j, "m_states", sec);
        const int k = j.contains("k_series") ? get_as<int>(j, "k_series", sec) : 1;
        if (m < 2 || k < 1) throw ConfigError("scenario needs m_states >= 2 and k_series >= 1");
        cfg.spec = ModelSpec{m, k, std::vector<std::size_t>(n_ind, t_len)};
        cfg.psi.assign(static_cast<std::size_t>(m), Matrix::Zero(m - 1, m - 1));
        cfg.tau = Matrix::Zero(k, m);
        cfg.pi = InitialDistribution::uniform(m);
        cfg.seed = seed;
    }
    const int m = cfg.spec.m_states;
    const int k = cfg.spec.k_series;
    if (j.contains("lengths")) {
        cfg.spec.lengths = get_as<std::vector<std::size_t>>(j, "lengths", sec);
    } else if (j.contains("n_individuals") || j.contains("length")) {
        cfg.spec.lengths.assign(n_ind, t_len);
    }
    if (j.contains("tpm")) cfg.group_tpm = TransitionMatrix{matrix_from_json(j.at("tpm"), m, m)};
    if (j.contains("log_means")) cfg.group_log_means = matrix_from_json(j.at("log_means"), k, m);
    if (j.contains("means")) {
        const Matrix means = matrix_from_json(j.at("means"), k, m);
        if ((means.array() <= 0.0).any()) throw ConfigError("scenario means must be positive");
        cfg.group_log_means = means.array().log().matrix();
    }
    if (j.contains("psi")) {
        const Json& p = j.at("psi");
        if (!p.is_array() || static_cast<int>(p.size()) != m) throw ConfigError("scenario.psi needs one matrix per state");
        cfg.psi.clear();
        for (const auto& block : p) cfg.psi.push_back(matrix_from_json(block, m - 1, m - 1));
    }
    if (j.contains("psi_diag")) {
        const Json& p = j.at("psi_diag");
        cfg.psi.assign(static_cast<std::size_t>(m), Matrix::Zero(m - 1, m - 1));
        for (int i = 0; i < m; ++i) {
            const Json& entry = p.is_array() ? p.at(static_cast<std::size_t>(i)) : p;
            cfg.psi[static_cast<std::size_t>(i)].diagonal() = vector_from_json(entry, m - 1);
        }
    }
    if (j.contains("tau")) cfg.tau = matrix_from_json(j.at("tau"), k, m);
    if (j.contains("pi")) cfg.pi = InitialDistribution{vector_from_json(j.at("pi"), m)};
    cfg.seed = seed;
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("invalid scenario: ") + e.what());
    }
    return cfg;
}

Json scenario_to_json(const ScenarioConfig& cfg) {
    Json psi = Json::array();
    for (const auto& p : cfg.psi) psi.push_back(matrix_to_json(p));
    return Json{{"m_states", cfg.spec.m_states},
                {"k_series", cfg.spec.k_series},
                {"lengths", cfg.spec.lengths},
                {"tpm", matrix_to_json(cfg.group_tpm.probs)},
                {"log_means", matrix_to_json(cfg.group_log_means)},
                {"psi", psi},
                {"tau", matrix_to_json(cfg.tau)},
                {"pi", vector_to_json(cfg.pi.pi)}};
}

McmcConfig mcmc_from_json(const Json& j, std::uint64_t seed) {
    const std::string sec = "mcmc";
    check_keys(j, {"m_states", "iterations", "burn_in", "chains", "pooling", "path_thin", "proposal_ridge",
                   "adapt_target_uni", "adapt_target_multi", "relabel", "start", "pi", "hyper"},
               sec);
    McmcConfig cfg;
    cfg.seed = seed;
    if (j.contains("iterations")) cfg.n_iter = get_count(j, "iterations", sec);
    if (j.contains("burn_in")) cfg.burn_in = get_count(j, "burn_in", sec);
    if (j.contains("chains")) cfg.n_chains = get_count(j, "chains", sec);
    if (j.contains("pooling")) cfg.pooling = pooling_from_string(get_as<std::string>(j, "pooling", sec));
    if (j.contains("path_thin")) cfg.path_thin = get_count(j, "path_thin", sec);
    if (j.contains("proposal_ridge")) cfg.proposal_ridge = get_as<double>(j, "proposal_ridge", sec);
    if (j.contains("adapt_target_uni")) cfg.adapt_target_uni = get_as<double>(j, "adapt_target_uni", sec);
    if (j.contains("adapt_target_multi")) cfg.adapt_target_multi = get_as<double>(j, "adapt_target_multi", sec);
    if (j.contains("relabel")) cfg.relabel = get_as<bool>(j, "relabel", sec);
    if (j.contains("start")) cfg.start = group_from_json(j.at("start"));
    if (j.contains("pi")) cfg.pi = InitialDistribution{vector_from_json(j.at("pi"), -1)};
    cfg.validate();
    return cfg;
}

HyperPriors resolve_hyper(const Json& mcmc_section, const ObservationSet& obs, int m_states) {
    HyperPriors h = HyperPriors::defaults(m_states, obs.pooled_series_means());
    if (mcmc_section.is_object() && mcmc_section.contains("hyper")) h = hyper_from_json(mcmc_section.at("hyper"), h);
    h.validate(m_states, obs.k_series);
    return h;
}

Json read_json_file(const fs::path& path) {
    auto in = open_in(path);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": malformed JSON (" + e.what() + ")");
    }
}

void write_text_file(const fs::path& path, const std::string& text) {
    auto out = open_out(path);
    out << text;
    check_written(out, path);
}

// ---- truth sidecars --------------------------------------------------------

void write_truth(const fs::path& dir, const Dataset& data, const InitialDistribution& pi) {
    ensure_dir(dir);
    Json individuals = Json::array();
    for (const auto& p : data.true_individual) individuals.push_back(individual_to_json(p));
    const Json truth{{"format", "mhmm-truth"},
                     {"version", 1},
                     {"m_states", data.true_group.states()},
                     {"k_series", data.obs.k_series},
                     {"lengths", data.obs.lengths()},
                     {"pi", vector_to_json(pi.pi)},
                     {"group", group_to_json(data.true_group)},
                     {"individuals", individuals}};
    write_text_file(dir / "truth.json", truth.dump(2) + "\n");
    auto out = open_out(dir / "paths.csv");
    out << "# mhmm-paths v1\nindividual,time,state\n";
    for (std::size_t n = 0; n < data.true_paths.size(); ++n) {
        for (std::size_t t = 0; t < data.true_paths[n].size(); ++t) out << n + 1 << ',' << t + 1 << ',' << data.true_paths[n][t] + 1 << '\n';
    }
    check_written(out, dir / "paths.csv");
}

Dataset read_truth(const fs::path& dir) {
    const Json truth = read_json_file(dir / "truth.json");
    if (truth.value("format", "") != "mhmm-truth" || truth.value("version", 0) != 1) {
        throw ConfigError((dir / "truth.json").string() + " is not a version 1 truth file");
    }
    Dataset d;
    d.obs.k_series = truth.at("k_series").get<int>();
    d.true_group = group_from_json(truth.at("group"));
    for (const auto& p : truth.at("individuals")) d.true_individual.push_back(individual_from_json(p));
    const auto lengths = truth.at("lengths").get<std::vector<std::size_t>>();
    auto in = open_in(dir / "paths.csv");
    std::string line;
    std::getline(in, line);
    if (trim(line) != "# mhmm-paths v1") throw DataError((dir / "paths.csv").string() + ": unsupported header");
    std::getline(in, line);
    d.true_paths.resize(lengths.size());
    for (std::size_t n = 0; n < lengths.size(); ++n) d.true_paths[n].assign(lengths[n], -1);
    std::size_t row = 2;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto f = split(trim(line));
        std::int64_t n = 0, t = 0, s = 0;
        if (f.size() != 3 || !parse_int(f[0], n) || !parse_int(f[1], t) || !parse_int(f[2], s) || n < 1 ||
            n > static_cast<std::int64_t>(lengths.size()) || t < 1 ||
            t > static_cast<std::int64_t>(lengths[static_cast<std::size_t>(n - 1)])) {
            row_error(row, "malformed path entry '" + line + "'");
        }
        d.true_paths[static_cast<std::size_t>(n - 1)][static_cast<std::size_t>(t - 1)] = static_cast<int>(s - 1);
    }
    return d;
}

// ---- ChainStore directory ----------------------------------------------------

namespace {

GroupParams unflatten_group(const std::vector<double>& v, int m, int k, Pooling pooling) {
    GroupParams g;
    std::size_t p = 0;
    g.alpha_bar.resize(m, m - 1);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m - 1; ++j) g.alpha_bar(i, j) = v[p++];
    }
    if (pooling == Pooling::multilevel) {
        for (int i = 0; i < m; ++i) {
            Matrix s(m - 1, m - 1);
            for (int j = 0; j < m - 1; ++j) {
                for (int l = j; l < m - 1; ++l) s(j, l) = s(l, j) = v[p++];
            }
            g.psi.push_back(s);
        }
    }
    g.b_bar.resize(k, m);
    for (int s = 0; s < k; ++s) {
        for (int i = 0; i < m; ++i) g.b_bar(s, i) = v[p++];
    }
    if (pooling == Pooling::multilevel) {
        g.tau.resize(k, m);
        for (int s = 0; s < k; ++s) {
            for (int i = 0; i < m; ++i) g.tau(s, i) = v[p++];
        }
    } else {
        g.tau.resize(0, 0);
    }
    return g;
}

std::vector<std::vector<double>> read_numeric_csv(const fs::path& path, std::size_t columns) {
    auto in = open_in(path);
    std::string line;
    std::getline(in, line);
    std::vector<std::vector<double>> rows;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto f = split(trim(line));
        if (f.size() != columns) {
            throw DataError(path.string() + ": row " + std::to_string(row) + " has " + std::to_string(f.size()) +
                            " fields, expected " + std::to_string(columns));
        }
        std::vector<double> vals;
        vals.reserve(columns);
        for (const auto& s : f) vals.push_back(parse_double(s, path.string() + ": row " + std::to_string(row)));
        rows.push_back(std::move(vals));
    }
    return rows;
}

std::vector<std::vector<std::string>> read_text_csv(const fs::path& path) {
    auto in = open_in(path);
    std::string line;
    std::getline(in, line);
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (!trim(line).empty()) rows.push_back(split(trim(line)));
    }
    return rows;
}

fs::path chain_dir(const fs::path& dir, std::size_t c) { return dir / ("chain_" + std::to_string(c + 1)); }

}  // namespace

void write_chain_store(const fs::path& dir, const std::vector<ChainStore>& chains, const ChainManifest& manifest) {
    if (chains.empty()) throw ConfigError("no chains to write");
    ensure_dir(dir);
    const ChainStore& first = chains.front();
    const int m = first.m_states;
    const int k = first.k_series;
    Json chain_info = Json::array();
    for (const auto& c : chains) chain_info.push_back(Json{{"chain_index", c.chain_index}, {"iterations", c.iterations()}});
    const Json man{{"format", "mhmm-chains"},
                   {"version", manifest.version},
                   {"spec", manifest.spec},
                   {"config_hash", manifest.config_hash},
                   {"seed", manifest.seed},
                   {"chain_count", chains.size()},
                   {"m_states", m},
                   {"k_series", k},
                   {"pooling", to_string(first.pooling)},
                   {"burn_in", first.burn_in},
                   {"pi", vector_to_json(first.pi.pi)},
                   {"hyper", hyper_to_json(first.hyper)},
                   {"chains", chain_info}};
    const auto names = group_scalar_names(m, k, first.pooling);
    for (std::size_t c = 0; c < chains.size(); ++c) {
        const ChainStore& ch = chains[c];
        const fs::path cdir = chain_dir(dir, c);
        ensure_dir(cdir);
        {
            auto out = open_out(cdir / "group.csv");
            out << "iteration";
            for (const auto& n : names) out << ',' << csv_field(n);
            out << '\n';
            for (std::size_t r = 0; r < ch.iterations(); ++r) {
                out << r + 1;
                const Vector flat = flatten_group(ch.group[r], ch.pooling);
                for (Eigen::Index q = 0; q < flat.size(); ++q) out << ',' << format_exact(flat(q));
                out << '\n';
            }
            check_written(out, cdir / "group.csv");
        }
        {
            auto out = open_out(cdir / "individual.csv");
            out << "iteration,individual";
            for (int i = 1; i <= m; ++i) {
                for (int j = 2; j <= m; ++j) out << ",\"alpha[" << i << ',' << j << "]\"";
            }
            for (int s = 1; s <= k; ++s) {
                for (int i = 1; i <= m; ++i) out << ",\"log_b[" << s << ',' << i << "]\"";
            }
            out << '\n';
            for (std::size_t r = 0; r < ch.iterations(); ++r) {
                for (std::size_t n = 0; n < ch.individual[r].size(); ++n) {
                    const auto& p = ch.individual[r][n];
                    out << r + 1 << ',' << n + 1;
                    for (int i = 0; i < m; ++i) {
                        for (int j = 0; j < m - 1; ++j) out << ',' << format_exact(p.alpha.intercepts(i, j));
                    }
                    for (int s = 0; s < k; ++s) {
                        for (int i = 0; i < m; ++i) out << ',' << format_exact(p.b.log_means(s, i));
                    }
                    out << '\n';
                }
            }
            check_written(out, cdir / "individual.csv");
        }
        {
            auto out = open_out(cdir / "trace.csv");
            out << "iteration,log_likelihood,log_posterior\n";
            for (std::size_t r = 0; r < ch.iterations(); ++r) {
                out << r + 1 << ',' << format_exact(ch.log_likelihood[r]) << ',' << format_exact(ch.log_posterior[r]) << '\n';
            }
            check_written(out, cdir / "trace.csv");
        }
        {
            // One row per stored (iteration, individual); states are space separated.
            auto out = open_out(cdir / "paths.csv");
            out << "iteration,individual,states\n";
            for (std::size_t q = 0; q < ch.path_iterations.size(); ++q) {
                for (std::size_t n = 0; n < ch.paths[q].size(); ++n) {
                    out << ch.path_iterations[q] + 1 << ',' << n + 1 << ',';
                    for (std::size_t t = 0; t < ch.paths[q][n].size(); ++t) out << (t ? " " : "") << ch.paths[q][n][t] + 1;
                    out << '\n';
                }
            }
            check_written(out, cdir / "paths.csv");
        }
        {
            auto out = open_out(cdir / "acceptance.csv");
            out << "block,proposals,burn_in_rate,sampling_rate\n";
            for (const auto& a : ch.acceptance) {
                out << csv_field(a.block) << ',' << a.proposals << ',' << format_exact(a.burn_in_rate) << ','
                    << format_exact(a.sampling_rate) << '\n';
            }
            check_written(out, cdir / "acceptance.csv");
        }
    }
    write_text_file(dir / "manifest.json", man.dump(2) + "\n");
}

ChainManifest read_manifest(const fs::path& dir) {
    if (!fs::exists(dir / "manifest.json")) throw IoError("no ChainStore manifest in " + dir.string());
    const Json man = read_json_file(dir / "manifest.json");
    if (man.value("format", "") != "mhmm-chains") throw ConfigError((dir / "manifest.json").string() + " is not a ChainStore manifest");
    ChainManifest out;
    out.spec = man.at("spec");
    out.config_hash = man.at("config_hash").get<std::string>();
    out.seed = man.at("seed").get<std::uint64_t>();
    out.version = man.at("version").get<std::string>();
    out.chain_count = man.at("chain_count").get<std::size_t>();
    return out;
}

std::vector<ChainStore> read_chain_store(const fs::path& dir) {
    const ChainManifest manifest = read_manifest(dir);
    const Json man = read_json_file(dir / "manifest.json");
    const int m = man.at("m_states").get<int>();
    const int k = man.at("k_series").get<int>();
    const Pooling pooling = pooling_from_string(man.at("pooling").get<std::string>());
    const auto names = group_scalar_names(m, k, pooling);
    std::vector<ChainStore> chains;
    for (std::size_t c = 0; c < manifest.chain_count; ++c) {
        const fs::path cdir = chain_dir(dir, c);
        ChainStore ch;
        ch.m_states = m;
        ch.k_series = k;
        ch.pooling = pooling;
        ch.burn_in = man.at("burn_in").get<std::size_t>();
        ch.seed = manifest.seed;
        ch.chain_index = man.at("chains").at(c).at("chain_index").get<std::size_t>();
        ch.pi = InitialDistribution{vector_from_json(man.at("pi"), m)};
        ch.hyper.m0 = Matrix::Zero(m, m - 1);
        ch.hyper.psi0 = Matrix::Identity(m - 1, m - 1);
        ch.hyper.l0 = ch.hyper.tau0 = ch.hyper.c = ch.hyper.d = Matrix::Zero(k, m);
        ch.hyper = hyper_from_json(man.at("hyper"), ch.hyper);
        for (const auto& row : read_numeric_csv(cdir / "group.csv", names.size() + 1)) {
            ch.group.push_back(unflatten_group(std::vector<double>(row.begin() + 1, row.end()), m, k, pooling));
        }
        const std::size_t ind_cols = 2 + static_cast<std::size_t>(m * (m - 1) + k * m);
        for (const auto& row : read_numeric_csv(cdir / "individual.csv", ind_cols)) {
            const auto r = static_cast<std::size_t>(row[0]) - 1;
            if (r >= ch.group.size()) throw DataError((cdir / "individual.csv").string() + ": iteration out of range");
            if (ch.individual.size() <= r) ch.individual.resize(r + 1);
            IndividualParams p{TransitionLogits{Matrix(m, m - 1)}, EmissionParams{Matrix(k, m)}};
            std::size_t q = 2;
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < m - 1; ++j) p.alpha.intercepts(i, j) = row[q++];
            }
            for (int s = 0; s < k; ++s) {
                for (int i = 0; i < m; ++i) p.b.log_means(s, i) = row[q++];
            }
            ch.individual[r].push_back(std::move(p));
        }
        if (ch.individual.size() != ch.group.size()) throw DataError(cdir.string() + ": individual and group draws differ in length");
        for (const auto& row : read_numeric_csv(cdir / "trace.csv", 3)) {
            ch.log_likelihood.push_back(row[1]);
            ch.log_posterior.push_back(row[2]);
        }
        {
            auto in = open_in(cdir / "paths.csv");
            std::string line;
            std::getline(in, line);
            while (std::getline(in, line)) {
                const auto f = split(trim(line));
                if (f.size() != 3) continue;
                std::int64_t r = 0;
                std::int64_t n = 0;
                if (!parse_int(f[0], r) || !parse_int(f[1], n)) throw DataError((cdir / "paths.csv").string() + ": malformed row");
                if (ch.path_iterations.empty() || ch.path_iterations.back() != static_cast<std::size_t>(r - 1)) {
                    ch.path_iterations.push_back(static_cast<std::size_t>(r - 1));
                    ch.paths.emplace_back();
                }
                StatePath path;
                std::istringstream ss(f[2]);
                int s = 0;
                while (ss >> s) path.push_back(s - 1);
                ch.paths.back().push_back(std::move(path));
            }
        }
        for (const auto& row : read_text_csv(cdir / "acceptance.csv")) {
            std::int64_t proposals = 0;
            if (row.size() != 4 || !parse_int(row[1], proposals)) {
                throw DataError((cdir / "acceptance.csv").string() + ": malformed row");
            }
            ch.acceptance.push_back({row[0], static_cast<std::size_t>(proposals), parse_double(row[2], "acceptance"),
                                     parse_double(row[3], "acceptance")});
        }
        chains.push_back(std::move(ch));
    }
    return chains;
}

// ---- decode output -----------------------------------------------------------

void write_decode_csv(const fs::path& path, const DecodeResult& result) {
    auto out = open_out(path);
    const Eigen::Index m = result.state_probs.cols();
    out << "time,state";
    for (Eigen::Index i = 1; i <= m; ++i) out << ",prob_state_" << i;
    out << '\n';
    char buf[32];
    for (std::size_t t = 0; t < result.path.size(); ++t) {
        out << t + 1 << ',' << result.path[t] + 1;
        for (Eigen::Index i = 0; i < m; ++i) {
            std::snprintf(buf, sizeof buf, "%.10g", result.state_probs(static_cast<Eigen::Index>(t), i));
            out << ',' << buf;
        }
        out << '\n';
    }
    check_written(out, path);
}

}  // namespace mhmm
