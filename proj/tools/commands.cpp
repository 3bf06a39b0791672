#include "commands.hpp"

#include "mhmm/decode.hpp"
#include "mhmm/diagnostics.hpp"
#include "mhmm/error.hpp"
#include "mhmm/montecarlo.hpp"
#include "mhmm/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace mhmm::cli {

void RunConfig::load(const fs::path& path) {
    if (path.empty()) return;
    if (!fs::exists(path)) throw IoError("config file " + path.string() + " does not exist");
    doc = read_json_file(path);
    if (!doc.is_object()) throw ConfigError(path.string() + ": top level must be an object");
    for (const auto& [key, value] : doc.items()) {
        static const std::vector<std::string> known{"seed", "workers", "scenario", "mcmc", "decode", "ppc", "montecarlo", "fit"};
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError(path.string() + ": unknown section '" + key + "'");
        }
    }
}

Json RunConfig::section(const std::string& name) const {
    if (!doc.contains(name)) return Json::object();
    const Json& s = doc.at(name);
    if (!s.is_object()) throw ConfigError("section '" + name + "' must be an object");
    return s;
}

std::uint64_t RunConfig::require_seed() const {
    if (seed) return *seed;
    if (doc.contains("seed")) {
        if (!doc.at("seed").is_number_unsigned()) throw ConfigError("seed must be a non-negative integer");
        return doc.at("seed").get<std::uint64_t>();
    }
    throw ConfigError("a seed is required (--seed or \"seed\" in the config file)");
}

std::size_t RunConfig::worker_count() const {
    std::size_t w = 1;
    if (workers) {
        w = *workers;
    } else if (doc.contains("workers")) {
        if (!doc.at("workers").is_number_unsigned()) throw ConfigError("workers must be a positive integer");
        w = doc.at("workers").get<std::size_t>();
    }
    if (w < 1) throw ConfigError("workers must be at least 1");
    return w;
}

namespace {

std::string fmt(double v, const char* spec = "%.6g") {
    char buf[48];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

void prepare_out(const fs::path& dir) {
    if (dir.empty()) throw ConfigError("an output directory is required (--out)");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
    const fs::path probe = dir / ".write_probe";
    {
        std::ofstream test(probe);
        if (!test) throw IoError("output directory " + dir.string() + " is not writable");
    }
    fs::remove(probe, ec);
}

void require_file(const fs::path& p, const char* what) {
    if (p.empty()) throw ConfigError(std::string("missing ") + what);
    if (!fs::exists(p)) throw IoError(std::string(what) + " " + p.string() + " does not exist");
}

std::string file_hash(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open " + p.string() + " for reading");
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return hex64(fnv1a64(bytes));
}

void write_manifest(const fs::path& dir, const std::string& command, const Json& inputs, std::uint64_t seed) {
    const Json man{{"command", command},
                   {"config_hash", config_hash(inputs)},
                   {"seed", seed},
                   {"version", software_version()},
                   {"inputs", inputs}};
    write_text_file(dir / "manifest.json", man.dump(2) + "\n");
}

std::size_t resolve_burn_in(const std::optional<std::size_t>& opt, const Json& section, const ChainStore& chain) {
    std::size_t b = chain.burn_in;
    if (opt) {
        b = *opt;
    } else if (section.contains("burn_in")) {
        b = section.at("burn_in").get<std::size_t>();
    }
    if (b >= chain.iterations()) throw ConfigError("burn-in " + std::to_string(b) + " leaves no draws");
    return b;
}

ObservationSet read_data_for(const fs::path& data, const ChainStore& chain) {
    require_file(data, "dataset");
    ObservationSet obs = read_observations_csv(data, chain.k_series);
    if (obs.n_individuals() != chain.n_individuals()) {
        throw ConfigError("dataset has " + std::to_string(obs.n_individuals()) + " individuals but the chain has " +
                          std::to_string(chain.n_individuals()));
    }
    return obs;
}

std::vector<ChainStore> load_chains(const fs::path& dir) {
    if (dir.empty()) throw ConfigError("missing ChainStore directory (--chains)");
    auto chains = read_chain_store(dir);
    if (chains.empty()) throw DataError("ChainStore " + dir.string() + " holds no chains");
    return chains;
}

void write_diagnostics(const fs::path& path, const std::vector<ParameterDiagnostic>& diag) {
    std::ostringstream out;
    out << "parameter,rhat,ess\n";
    for (const auto& d : diag) out << csv_field(d.name) << ',' << fmt(d.rhat, "%.6f") << ',' << fmt(d.ess, "%.1f") << '\n';
    write_text_file(path, out.str());
}

}  // namespace

// ---- simulate ----------------------------------------------------------------

int cmd_simulate(const RunConfig& cfg, const SimulateOptions& opt, std::ostream& log) {
    Json scen = cfg.section("scenario");
    if (opt.preset) scen["preset"] = *opt.preset;
    if (opt.individuals) scen["n_individuals"] = *opt.individuals;
    if (opt.length) scen["length"] = *opt.length;
    if (scen.empty()) throw ConfigError("simulate needs a scenario section or --preset");
    const std::uint64_t seed = cfg.require_seed();
    const ScenarioConfig sc = scenario_from_json(scen, seed);
    prepare_out(cfg.out);
    const Dataset data = generate_scenario(sc);
    write_observations_csv(cfg.out / "observations.csv", data.obs);
    write_truth(cfg.out, data, sc.pi);
    write_manifest(cfg.out, "simulate", Json{{"scenario", scenario_to_json(sc)}, {"seed", seed}}, seed);

    const auto lengths = data.obs.lengths();
    const auto [t_min, t_max] = std::minmax_element(lengths.begin(), lengths.end());
    log << "N = " << data.obs.n_individuals() << ", K = " << data.obs.k_series << ", T = " << *t_min;
    if (*t_max != *t_min) log << ".." << *t_max;
    log << "\nmean count by true state:\n";
    const int m = sc.spec.m_states;
    Matrix sums = Matrix::Zero(data.obs.k_series, m);
    Vector visits = Vector::Zero(m);
    for (std::size_t n = 0; n < data.obs.n_individuals(); ++n) {
        for (std::size_t t = 0; t < data.true_paths[n].size(); ++t) {
            const int s = data.true_paths[n][t];
            sums.col(s) += data.obs.counts[n].col(static_cast<Eigen::Index>(t)).cast<double>();
            visits(s) += 1.0;
        }
    }
    for (int k = 0; k < data.obs.k_series; ++k) {
        log << "  series " << k + 1 << ":";
        for (int i = 0; i < m; ++i) log << ' ' << (visits(i) > 0 ? fmt(sums(k, i) / visits(i), "%.2f") : std::string("-"));
        log << '\n';
    }
    log << "wrote " << (cfg.out / "observations.csv").string() << '\n';
    return 0;
}

// ---- fit -----------------------------------------------------------------------

int cmd_fit(const RunConfig& cfg, const FitOptions& opt, std::ostream& log) {
    require_file(opt.data, "dataset");
    const std::uint64_t seed = cfg.require_seed();
    Json section = cfg.section("mcmc");
    if (opt.pooling) section["pooling"] = *opt.pooling;
    if (opt.chains) section["chains"] = *opt.chains;
    if (opt.states) section["m_states"] = *opt.states;
    if (!section.contains("m_states")) throw ConfigError("number of states is required (--states or mcmc.m_states)");
    const int m = section.at("m_states").get<int>();
    McmcConfig mc = mcmc_from_json(section, seed);
    const Json fit_section = cfg.section("fit");
    const double threshold =
        opt.rhat_threshold ? *opt.rhat_threshold : fit_section.value("rhat_threshold", 1.1);

    const ObservationSet obs = read_observations_csv(opt.data);
    mc.hyper = resolve_hyper(section, obs, m);
    prepare_out(cfg.out);

    std::vector<ChainStore> chains(mc.n_chains);
    std::vector<std::exception_ptr> failures(mc.n_chains);
    const std::size_t workers = std::min(cfg.worker_count(), mc.n_chains);
    auto run = [&](std::size_t first) {
        for (std::size_t c = first; c < mc.n_chains; c += workers) {
            try {
                chains[c] = run_chain(obs, m, mc, c);
            } catch (...) {
                failures[c] = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        run(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
        for (auto& t : pool) t.join();
    }
    for (std::size_t c = 0; c < failures.size(); ++c) {
        if (!failures[c]) continue;
        try {
            std::rethrow_exception(failures[c]);
        } catch (const std::exception& e) {
            throw SamplerAbort("chain " + std::to_string(c + 1) + ": " + e.what());
        }
    }

    ChainManifest man;
    man.spec = Json{{"m_states", m}, {"k_series", obs.k_series}, {"lengths", obs.lengths()}};
    man.config_hash = config_hash(Json{{"data", file_hash(opt.data)}, {"mcmc", section}, {"seed", seed}});
    man.seed = seed;
    man.version = software_version();
    man.chain_count = chains.size();
    write_chain_store(cfg.out, chains, man);
    write_text_file(cfg.out / "trace_log_posterior.svg", svg_trace(chains.front().log_posterior, "log posterior, chain 1"));

    log << "fitted " << chains.size() << " chain(s) of " << mc.n_iter << " iterations (" << to_string(mc.pooling)
        << " pooling), burn-in " << mc.burn_in << '\n';
    log << "acceptance rates after burn-in (chain 1):\n";
    for (const auto& a : chains.front().acceptance) {
        log << "  " << a.block << ": " << fmt(a.sampling_rate, "%.3f") << " (burn-in " << fmt(a.burn_in_rate, "%.3f") << ")\n";
    }
    if (chains.size() < 2) {
        log << "R-hat needs at least 2 chains (--chains 2); convergence check skipped\n";
        return 0;
    }
    const auto diag = diagnostics(chains, mc.burn_in);
    write_diagnostics(cfg.out / "diagnostics.csv", diag);
    const auto worst = std::max_element(diag.begin(), diag.end(),
                                        [](const ParameterDiagnostic& a, const ParameterDiagnostic& b) { return a.rhat < b.rhat; });
    const auto min_ess = std::min_element(diag.begin(), diag.end(),
                                          [](const ParameterDiagnostic& a, const ParameterDiagnostic& b) { return a.ess < b.ess; });
    log << "max R-hat " << fmt(worst->rhat, "%.4f") << " (" << worst->name << "), min ESS " << fmt(min_ess->ess, "%.0f")
        << " (" << min_ess->name << ")\n";
    if (worst->rhat > threshold) {
        log << "not converged: R-hat above " << fmt(threshold) << '\n';
        return kExitNotConverged;
    }
    return 0;
}

// ---- decode ----------------------------------------------------------------------

int cmd_decode(const RunConfig& cfg, const DecodeOptions& opt, std::ostream& log) {
    const auto chains = load_chains(opt.chains);
    const ChainStore& chain = chains.front();
    const ObservationSet obs = read_data_for(opt.data, chain);
    const Json section = cfg.section("decode");
    const Estimator est = estimator_from_string(opt.estimator ? *opt.estimator : section.value("estimator", "map"));
    const LocalProbabilities local =
        local_probabilities_from_string(opt.local ? *opt.local : section.value("local", "filtered"));
    const std::size_t burn_in = resolve_burn_in(opt.burn_in, section, chain);
    prepare_out(cfg.out);
    const auto results = decode_dataset(obs, chain, burn_in, est, local);
    for (std::size_t n = 0; n < results.size(); ++n) {
        write_decode_csv(cfg.out / ("individual_" + std::to_string(n + 1) + ".csv"), results[n]);
    }
    const ChainManifest man = read_manifest(opt.chains);
    write_manifest(cfg.out, "decode",
                   Json{{"chains", man.config_hash},
                        {"data", file_hash(opt.data)},
                        {"estimator", est == Estimator::map ? "map" : "median"},
                        {"local", local == LocalProbabilities::filtered ? "filtered" : "smoothed"},
                        {"burn_in", burn_in}},
                   man.seed);
    log << "decoded " << results.size() << " individual(s) into " << cfg.out.string() << '\n';
    return 0;
}

// ---- ppc -------------------------------------------------------------------------

int cmd_ppc(const RunConfig& cfg, const PpcOptions& opt, std::ostream& log) {
    const auto chains = load_chains(opt.chains);
    const ChainStore& chain = chains.front();
    const ObservationSet obs = read_data_for(opt.data, chain);
    const Json section = cfg.section("ppc");
    const std::size_t r_rep = opt.replicates ? *opt.replicates : section.value("replicates", std::size_t{500});
    const std::size_t burn_in = resolve_burn_in(opt.burn_in, section, chain);
    const ChainManifest man = read_manifest(opt.chains);
    const std::uint64_t seed = cfg.seed ? *cfg.seed : (cfg.doc.contains("seed") ? cfg.require_seed() : man.seed);
    prepare_out(cfg.out);
    Rng rng(seed, {0x505043});
    const PpcReport rep = posterior_predictive(chain, obs, r_rep, rng, burn_in);

    std::ostringstream summary;
    summary << "series,statistic,observed,replicate_mean,replicate_sd,tail_probability\n";
    for (int k = 0; k < obs.k_series; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        for (std::size_t q = 0; q < kPpcStatistics.size(); ++q) {
            std::vector<double> values;
            for (const auto& r : rep.replicates) values.push_back(r[ks][q]);
            double mean = 0.0;
            for (double v : values) mean += v;
            mean /= static_cast<double>(values.size());
            double ss = 0.0;
            for (double v : values) ss += (v - mean) * (v - mean);
            const double sd = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
            summary << k + 1 << ',' << kPpcStatistics[q] << ',' << fmt(rep.observed[ks][q], "%.6f") << ','
                    << fmt(mean, "%.6f") << ',' << fmt(sd, "%.6f") << ',' << fmt(rep.tail_probability[ks][q], "%.4f") << '\n';

            const auto bins = histogram(values, opt.bins);
            std::ostringstream hist;
            hist << "bin_lower,bin_upper,count\n";
            for (const auto& b : bins) hist << fmt(b.lower, "%.6f") << ',' << fmt(b.upper, "%.6f") << ',' << b.count << '\n';
            const std::string stem = std::string("ppc_") + kPpcStatistics[q] + "_series" + std::to_string(k + 1);
            write_text_file(cfg.out / (stem + ".csv"), hist.str());
            write_text_file(cfg.out / (stem + ".svg"),
                            svg_histogram(bins, std::string(kPpcStatistics[q]) + ", series " + std::to_string(k + 1),
                                          rep.observed[ks][q]));
        }
    }
    write_text_file(cfg.out / "ppc_summary.csv", summary.str());

    std::ostringstream ind;
    ind << "series,individual,observed_mean,replicate_mean,replicate_lower,replicate_upper\n";
    for (Eigen::Index k = 0; k < rep.observed_individual_means.rows(); ++k) {
        for (Eigen::Index n = 0; n < rep.observed_individual_means.cols(); ++n) {
            std::vector<double> v;
            for (const auto& r : rep.replicate_individual_means) v.push_back(r(k, n));
            double mean = 0.0;
            for (double x : v) mean += x;
            ind << k + 1 << ',' << n + 1 << ',' << fmt(rep.observed_individual_means(k, n), "%.6f") << ','
                << fmt(mean / static_cast<double>(v.size()), "%.6f") << ',' << fmt(quantile(v, 0.025), "%.6f") << ','
                << fmt(quantile(v, 0.975), "%.6f") << '\n';
        }
    }
    write_text_file(cfg.out / "ppc_individual_means.csv", ind.str());
    write_manifest(cfg.out, "ppc",
                   Json{{"chains", man.config_hash}, {"data", file_hash(opt.data)}, {"replicates", r_rep},
                        {"burn_in", burn_in}, {"bins", opt.bins}},
                   seed);
    log << r_rep << " replicate datasets; summary in " << (cfg.out / "ppc_summary.csv").string() << '\n';
    return 0;
}

// ---- montecarlo --------------------------------------------------------------------

int cmd_montecarlo(const RunConfig& cfg, const MonteCarloOptions& opt, std::ostream& log) {
    const std::uint64_t seed = cfg.require_seed();
    const Json scen = cfg.section("scenario");
    if (scen.empty()) throw ConfigError("montecarlo needs a scenario section");
    Json mcmc = cfg.section("mcmc");
    Json section = cfg.section("montecarlo");
    if (opt.replications) section["replications"] = *opt.replications;
    if (opt.both_models) section["models"] = Json::array({"multilevel", "complete"});
    for (const auto& [key, value] : section.items()) {
        static const std::vector<std::string> known{"replications", "models", "estimator", "f1", "checkpoints"};
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError("unknown key '" + key + "' in montecarlo");
        }
    }

    MonteCarloConfig mc;
    mc.scenario = scenario_from_json(scen, seed);
    if (mcmc.contains("m_states") && mcmc.at("m_states").get<int>() != mc.scenario.spec.m_states) {
        throw ConfigError("mcmc.m_states differs from the scenario's state count");
    }
    if (mcmc.contains("pooling")) throw ConfigError("montecarlo selects pooling through montecarlo.models");
    mc.mcmc = mcmc_from_json(mcmc, seed);
    if (mcmc.contains("hyper")) mc.hyper_overrides = mcmc.at("hyper");
    mc.replications = section.value("replications", std::size_t{25});
    if (mc.replications < 1) throw ConfigError("montecarlo.replications must be at least 1");
    mc.poolings.clear();
    for (const auto& p : section.value("models", Json::array({"multilevel"}))) {
        mc.poolings.push_back(pooling_from_string(p.get<std::string>()));
    }
    mc.estimator = estimator_from_string(section.value("estimator", "map"));
    const std::string f1 = section.value("f1", "macro");
    if (f1 != "macro" && f1 != "micro") throw ConfigError("montecarlo.f1 must be macro or micro");
    mc.f1 = f1 == "macro" ? F1Average::macro : F1Average::micro;
    mc.seed = seed;
    mc.workers = cfg.worker_count();

    // Worker count is deliberately outside the hash: results do not depend on it.
    const Json inputs{{"scenario", scenario_to_json(mc.scenario)}, {"mcmc", mcmc}, {"montecarlo", section}, {"seed", seed}};
    mc.config_hash = config_hash(inputs);
    prepare_out(cfg.out);
    if (section.value("checkpoints", true)) mc.checkpoint_dir = cfg.out / "checkpoints";

    log << "running " << mc.replications << " replication(s) on " << mc.workers << " worker(s)\n";
    const MonteCarloResult result = run_montecarlo(mc);
    write_text_file(cfg.out / "mc_report.csv", mc_report_csv(result));
    write_text_file(cfg.out / "mc_decoding.csv", mc_decoding_csv(result));
    write_manifest(cfg.out, "montecarlo", inputs, seed);
    for (const auto& r : result.replications) {
        if (!r.ok) log << "replication " << r.index + 1 << " failed: " << r.error << '\n';
    }
    log << result.failed << " of " << mc.replications << " replication(s) failed\n";
    for (const auto& m : result.models) {
        for (const auto& d : m.decoding) {
            log << "  " << model_label(m.pooling) << ' ' << d.metric << ' ' << fmt(d.mean, "%.3f") << " ["
                << fmt(d.lower, "%.3f") << ", " << fmt(d.upper, "%.3f") << "]\n";
        }
    }
    if (result.failed == mc.replications) {
        log << "every replication failed\n";
        return 1;
    }
    return 0;
}

// ---- report -------------------------------------------------------------------------

int cmd_report(const RunConfig& cfg, const ReportOptions& opt, std::ostream& log) {
    const auto chains = load_chains(opt.chains);
    const ChainStore& chain = chains.front();
    const std::size_t burn_in = resolve_burn_in(opt.burn_in, Json::object(), chain);
    const Estimator est = estimator_from_string(opt.estimator.value_or("map"));
    const EstimateSummary s = map_estimate(chain, burn_in, est);
    std::ostringstream table;
    table << "parameter,estimate,cri_low,cri_high\n";
    for (std::size_t q = 0; q < s.names.size(); ++q) {
        const auto i = static_cast<Eigen::Index>(q);
        table << csv_field(s.names[q]) << ',' << fmt(s.point(i), "%.6f") << ',' << fmt(s.cri_low(i), "%.6f") << ','
              << fmt(s.cri_high(i), "%.6f") << '\n';
    }
    log << table.str();
    if (!cfg.out.empty()) {
        prepare_out(cfg.out);
        write_text_file(cfg.out / "summary.csv", table.str());
        if (chains.size() >= 2) write_diagnostics(cfg.out / "diagnostics.csv", diagnostics(chains, burn_in));
    }
    return 0;
}

}  // namespace mhmm::cli
