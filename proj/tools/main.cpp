#include "commands.hpp"

#include "mhmm/error.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace mhmm::cli;

int main(int argc, char** argv) {
    CLI::App app{"Multilevel hidden Markov models for multivariate count time series"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::string out;
    auto common = [&](CLI::App* sub, bool needs_out = true) {
        sub->add_option("--config", config_path, "JSON configuration file");
        sub->add_option("--seed", seed, "random seed");
        sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
        auto* o = sub->add_option("--out", out, "output directory");
        if (needs_out) o->required();
    };

    SimulateOptions sim;
    auto* simulate = app.add_subcommand("simulate", "generate a dataset from a scenario");
    common(simulate);
    simulate->add_option("--preset", sim.preset, "heterogeneity scenario 1..4")->check(CLI::Range(1, 4));
    simulate->add_option("--individuals", sim.individuals, "number of individuals");
    simulate->add_option("--length", sim.length, "occasions per individual");

    FitOptions fit;
    std::string fit_data;
    auto* fit_cmd = app.add_subcommand("fit", "run the sampler on a dataset");
    common(fit_cmd);
    fit_cmd->add_option("--data", fit_data, "dataset CSV")->required();
    fit_cmd->add_option("--pooling", fit.pooling, "multilevel or complete");
    fit_cmd->add_option("--chains", fit.chains, "number of chains")->check(CLI::PositiveNumber);
    fit_cmd->add_option("--states", fit.states, "number of hidden states");
    fit_cmd->add_option("--rhat-threshold", fit.rhat_threshold, "largest acceptable R-hat");

    DecodeOptions dec;
    std::string dec_chains;
    std::string dec_data;
    auto* decode = app.add_subcommand("decode", "Viterbi paths and state probabilities");
    common(decode);
    decode->add_option("--chains", dec_chains, "ChainStore directory")->required();
    decode->add_option("--data", dec_data, "dataset CSV")->required();
    decode->add_option("--estimator", dec.estimator, "map or median");
    decode->add_option("--local", dec.local, "filtered or smoothed");
    decode->add_option("--burn-in", dec.burn_in, "draws to discard");

    PpcOptions ppc;
    std::string ppc_chains;
    std::string ppc_data;
    auto* ppc_cmd = app.add_subcommand("ppc", "posterior predictive checks");
    common(ppc_cmd);
    ppc_cmd->add_option("--chains", ppc_chains, "ChainStore directory")->required();
    ppc_cmd->add_option("--data", ppc_data, "dataset CSV")->required();
    ppc_cmd->add_option("--replicates", ppc.replicates, "replicate datasets");
    ppc_cmd->add_option("--burn-in", ppc.burn_in, "draws to discard");
    ppc_cmd->add_option("--bins", ppc.bins, "histogram bins")->check(CLI::PositiveNumber);

    MonteCarloOptions mc;
    auto* montecarlo = app.add_subcommand("montecarlo", "repeated simulate/fit/decode with summary tables");
    common(montecarlo);
    montecarlo->add_option("--replications", mc.replications, "number of replications");
    montecarlo->add_flag("--both", mc.both_models, "fit the multilevel and complete-pooling models");

    ReportOptions rep;
    std::string rep_chains;
    auto* report = app.add_subcommand("report", "posterior summary of a ChainStore");
    common(report, false);
    report->add_option("--chains", rep_chains, "ChainStore directory")->required();
    report->add_option("--burn-in", rep.burn_in, "draws to discard");
    report->add_option("--estimator", rep.estimator, "map or median");

    CLI11_PARSE(app, argc, argv);

    try {
        cfg.load(config_path);
        cfg.seed = seed;
        cfg.workers = workers;
        cfg.out = out;
        if (simulate->parsed()) return cmd_simulate(cfg, sim, std::cout);
        if (fit_cmd->parsed()) {
            fit.data = fit_data;
            return cmd_fit(cfg, fit, std::cout);
        }
        if (decode->parsed()) {
            dec.chains = dec_chains;
            dec.data = dec_data;
            return cmd_decode(cfg, dec, std::cout);
        }
        if (ppc_cmd->parsed()) {
            ppc.chains = ppc_chains;
            ppc.data = ppc_data;
            return cmd_ppc(cfg, ppc, std::cout);
        }
        if (montecarlo->parsed()) return cmd_montecarlo(cfg, mc, std::cout);
        if (report->parsed()) {
            rep.chains = rep_chains;
            return cmd_report(cfg, rep, std::cout);
        }
    } catch (const mhmm::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: invalid configuration value: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
