#include "mhmm/montecarlo.hpp"

#include "mhmm/error.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace mhmm {

void MonteCarloConfig::validate() const {
    if (replications < 1) throw ConfigError("Monte Carlo needs at least 1 replication");
    if (workers < 1) throw ConfigError("workers must be at least 1");
    if (poolings.empty()) throw ConfigError("no pooling mode requested");
    scenario.validate();
    mcmc.validate();
}

const char* model_label(Pooling p) noexcept { return p == Pooling::multilevel ? "MHMM" : "HMM"; }

ReplicationResult run_replication(const MonteCarloConfig& cfg, std::size_t index) {
    ReplicationResult out;
    out.index = index;
    try {
        ScenarioConfig scen = cfg.scenario;
        scen.seed = derive_seed(cfg.seed, {0x5349, index});
        const Dataset data = generate_scenario(scen);
        const int m = scen.spec.m_states;
        for (const Pooling pooling : cfg.poolings) {
            McmcConfig mc = cfg.mcmc;
            mc.pooling = pooling;
            mc.seed = derive_seed(cfg.seed, {0x4d43, index, static_cast<std::uint64_t>(pooling)});
            mc.n_chains = 1;
            HyperPriors hyper = HyperPriors::defaults(m, data.obs.pooled_series_means());
            if (!cfg.hyper_overrides.empty()) hyper = hyper_from_json(cfg.hyper_overrides, hyper);
            mc.hyper = hyper;
            mc.pi = scen.pi;
            ChainStore chain = run_chain(data.obs, m, mc, 0);
            const std::size_t best = map_iteration(chain, mc.burn_in);
            permute_states(chain, greedy_match(data.true_group.b_bar, chain.group[best].b_bar));

            ModelFit fit;
            fit.pooling = pooling;
            fit.estimate = map_estimate(chain, mc.burn_in, cfg.estimator);
            fit.truth = truth_scalars(data.true_group, data.true_individual, pooling);
            const auto decoded = decode_dataset(data.obs, chain, mc.burn_in, cfg.estimator);
            std::vector<StatePath> paths;
            for (const auto& d : decoded) paths.push_back(d.path);
            fit.decoding = decoding_metrics(data.true_paths, paths, m, cfg.f1).pooled;
            out.fits.push_back(std::move(fit));
        }
        out.ok = true;
    } catch (const std::exception& e) {
        out.ok = false;
        out.fits.clear();
        out.error = e.what();
    }
    return out;
}

namespace {

Json vector_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from(const Json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

fs::path checkpoint_path(const fs::path& dir, std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "rep_%04zu.json", index + 1);
    return dir / buf;
}

std::optional<ReplicationResult> load_checkpoint(const MonteCarloConfig& cfg, std::size_t index) {
    if (!cfg.checkpoint_dir) return std::nullopt;
    const fs::path p = checkpoint_path(*cfg.checkpoint_dir, index);
    if (!fs::exists(p)) return std::nullopt;
    try {
        const Json j = read_json_file(p);
        if (j.value("config_hash", "") != cfg.config_hash) return std::nullopt;
        ReplicationResult r = replication_from_json(j.at("result"));
        if (r.index != index) return std::nullopt;
        return r;
    } catch (const std::exception&) {
        return std::nullopt;  // unreadable or truncated: recompute
    }
}

void save_checkpoint(const MonteCarloConfig& cfg, const ReplicationResult& r) {
    if (!cfg.checkpoint_dir) return;
    const fs::path p = checkpoint_path(*cfg.checkpoint_dir, r.index);
    const fs::path tmp = p.string() + ".tmp";
    write_text_file(tmp, Json{{"config_hash", cfg.config_hash}, {"result", replication_to_json(r)}}.dump() + "\n");
    fs::rename(tmp, p);
}

std::string fixed(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

Json replication_to_json(const ReplicationResult& r) {
    Json fits = Json::array();
    for (const auto& f : r.fits) {
        fits.push_back(Json{{"pooling", to_string(f.pooling)},
                            {"names", f.estimate.names},
                            {"point", vector_json(f.estimate.point)},
                            {"cri_low", vector_json(f.estimate.cri_low)},
                            {"cri_high", vector_json(f.estimate.cri_high)},
                            {"map_iteration", f.estimate.map_iteration},
                            {"truth", vector_json(f.truth)},
                            {"balanced_accuracy", f.decoding.balanced_accuracy},
                            {"f1", f.decoding.f1},
                            {"kappa", f.decoding.kappa}});
    }
    return Json{{"index", r.index}, {"ok", r.ok}, {"error", r.error}, {"fits", fits}};
}

ReplicationResult replication_from_json(const Json& j) {
    ReplicationResult r;
    r.index = j.at("index").get<std::size_t>();
    r.ok = j.at("ok").get<bool>();
    r.error = j.at("error").get<std::string>();
    for (const auto& f : j.at("fits")) {
        ModelFit fit;
        fit.pooling = pooling_from_string(f.at("pooling").get<std::string>());
        fit.estimate.names = f.at("names").get<std::vector<std::string>>();
        fit.estimate.point = vector_from(f.at("point"));
        fit.estimate.cri_low = vector_from(f.at("cri_low"));
        fit.estimate.cri_high = vector_from(f.at("cri_high"));
        fit.estimate.map_iteration = f.at("map_iteration").get<std::size_t>();
        fit.truth = vector_from(f.at("truth"));
        fit.decoding = {f.at("balanced_accuracy").get<double>(), f.at("f1").get<double>(), f.at("kappa").get<double>()};
        r.fits.push_back(std::move(fit));
    }
    return r;
}

std::vector<ModelSummary> summarize_replications(const std::vector<ReplicationResult>& reps,
                                                 const std::vector<Pooling>& poolings) {
    std::vector<ModelSummary> out;
    for (std::size_t p = 0; p < poolings.size(); ++p) {
        std::vector<EstimateSummary> estimates;
        std::vector<Vector> truths;
        std::map<std::string, std::vector<double>> metrics;
        for (const auto& r : reps) {
            if (!r.ok || r.fits.size() != poolings.size()) continue;
            const ModelFit& f = r.fits[p];
            estimates.push_back(f.estimate);
            truths.push_back(f.truth);
            metrics["balanced_accuracy"].push_back(f.decoding.balanced_accuracy);
            metrics["f1"].push_back(f.decoding.f1);
            metrics["kappa"].push_back(f.decoding.kappa);
        }
        if (estimates.size() < 2) continue;
        ModelSummary s;
        s.pooling = poolings[p];
        s.report = mc_metrics(estimates, truths);
        for (const char* name : {"balanced_accuracy", "f1", "kappa"}) {
            const auto& v = metrics[name];
            double sum = 0.0;
            for (double x : v) sum += x;
            s.decoding.push_back({name, sum / static_cast<double>(v.size()), quantile(v, 0.025), quantile(v, 0.975)});
        }
        out.push_back(std::move(s));
    }
    return out;
}

MonteCarloResult run_montecarlo(const MonteCarloConfig& cfg) {
    cfg.validate();
    if (cfg.checkpoint_dir) {
        std::error_code ec;
        fs::create_directories(*cfg.checkpoint_dir, ec);
        if (ec) throw IoError("cannot create checkpoint directory " + cfg.checkpoint_dir->string());
    }
    MonteCarloResult result;
    result.replications.resize(cfg.replications);
    std::atomic<std::size_t> next{0};
    std::mutex io_mutex;
    std::exception_ptr io_failure;
    auto worker = [&] {
        for (std::size_t i = next++; i < cfg.replications; i = next++) {
            if (auto cached = load_checkpoint(cfg, i)) {
                result.replications[i] = std::move(*cached);
                continue;
            }
            result.replications[i] = run_replication(cfg, i);
            try {
                save_checkpoint(cfg, result.replications[i]);
            } catch (...) {
                const std::lock_guard lock(io_mutex);
                if (!io_failure) io_failure = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::min(cfg.workers, cfg.replications);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < n_threads; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (io_failure) std::rethrow_exception(io_failure);
    for (const auto& r : result.replications) result.failed += r.ok ? 0 : 1;
    result.models = summarize_replications(result.replications, cfg.poolings);
    return result;
}

std::string mc_report_csv(const MonteCarloResult& result) {
    std::ostringstream out;
    out << "parameter,truth";
    for (const auto& m : result.models) {
        const std::string l = model_label(m.pooling);
        for (const char* col : {"_estimate", "_bias", "_rel_bias", "_emp_se", "_mse", "_coverage", "_bc_coverage"}) {
            out << ',' << l << col;
        }
    }
    out << '\n';
    if (result.models.empty()) return out.str();
    // The first model carries the full parameter list (MHMM when requested).
    std::vector<std::string> names;
    std::map<std::string, double> truth;
    for (const auto& m : result.models) {
        for (const auto& row : m.report.rows) {
            if (!truth.count(row.name)) {
                names.push_back(row.name);
                truth[row.name] = row.truth;
            }
        }
    }
    for (const auto& name : names) {
        out << csv_field(name) << ',' << fixed(truth[name]);
        for (const auto& m : result.models) {
            const auto it = std::find_if(m.report.rows.begin(), m.report.rows.end(),
                                         [&](const McRow& r) { return r.name == name; });
            if (it == m.report.rows.end()) {
                out << ",,,,,,,";
                continue;
            }
            for (double v : {it->mean_estimate, it->bias, it->relative_bias, it->emp_se, it->mse, it->coverage,
                             it->bias_corrected_coverage}) {
                out << ',' << fixed(v);
            }
        }
        out << '\n';
    }
    return out.str();
}

std::string mc_decoding_csv(const MonteCarloResult& result) {
    std::ostringstream out;
    out << "model,metric,mean,lower,upper\n";
    for (const auto& m : result.models) {
        for (const auto& d : m.decoding) {
            out << model_label(m.pooling) << ',' << d.metric << ',' << fixed(d.mean) << ',' << fixed(d.lower) << ','
                << fixed(d.upper) << '\n';
        }
    }
    out << "# failed_replications," << result.failed << '\n';
    return out.str();
}

}  // namespace mhmm
