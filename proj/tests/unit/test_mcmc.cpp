#include "oracles.hpp"
#include "quadrature.hpp"

#include "mhmm/error.hpp"
#include "mhmm/mcmc.hpp"
#include "mhmm/simulate.hpp"

#include <doctest.h>

#include <cmath>

using namespace mhmm;

namespace {

McmcConfig short_config(std::size_t iters, std::size_t burn, std::uint64_t seed) {
    McmcConfig cfg;
    cfg.n_iter = iters;
    cfg.burn_in = burn;
    cfg.seed = seed;
    return cfg;
}

Dataset small_dataset(int scenario, std::size_t n, std::size_t t, std::uint64_t seed) {
    return generate_scenario(scenario_preset(scenario, n, t, seed));
}

}  // namespace

TEST_SUITE("mcmc") {

TEST_CASE("all-zero two-occasion data completes") {
    ObservationSet obs;
    obs.k_series = 1;
    obs.counts.assign(3, CountMatrix::Zero(1, 2));
    McmcConfig cfg = short_config(400, 200, 5);
    Vector means(1);
    means << 2.0;
    cfg.hyper = HyperPriors::defaults(2, means);
    ChainStore chain;
    REQUIRE_NOTHROW(chain = run_chain(obs, 2, cfg, 0));
    CHECK(chain.iterations() == 400);
    std::vector<double> b;
    for (std::size_t r = 200; r < 400; ++r) {
        CHECK(std::isfinite(chain.log_posterior[r]));
        b.push_back(chain.group[r].b_bar(0, 0));
    }
    // Zero counts pull the group log mean below the prior location without
    // leaving the prior's support.
    const double mean = oracle::moments(b).mean;
    CHECK(mean < std::log(2.0));
    CHECK(mean > std::log(2.0) - 3.0 * std::sqrt(4.0));
}

TEST_CASE("chains are reproducible and chain index matters") {
    const Dataset d = small_dataset(4, 4, 40, 3);
    const McmcConfig cfg = short_config(60, 20, 17);
    const ChainStore a = run_chain(d.obs, 4, cfg, 0);
    const ChainStore b = run_chain(d.obs, 4, cfg, 0);
    const ChainStore c = run_chain(d.obs, 4, cfg, 1);
    REQUIRE(a.iterations() == b.iterations());
    for (std::size_t r = 0; r < a.iterations(); ++r) {
        CHECK(a.group[r].alpha_bar == b.group[r].alpha_bar);
        CHECK(a.group[r].b_bar == b.group[r].b_bar);
        CHECK(a.log_posterior[r] == b.log_posterior[r]);
    }
    CHECK(a.paths == b.paths);
    CHECK(a.group.back().b_bar != c.group.back().b_bar);

    McmcConfig multi = cfg;
    multi.n_chains = 2;
    const auto chains = run_mcmc(d.obs, 4, multi);
    REQUIRE(chains.size() == 2);
    CHECK(chains[0].log_posterior == a.log_posterior);
    CHECK(chains[1].log_posterior == c.log_posterior);
}

TEST_CASE("chain store invariants") {
    const Dataset d = small_dataset(4, 3, 50, 4);
    McmcConfig cfg = short_config(80, 40, 2);
    cfg.path_thin = 20;
    const ChainStore ch = run_chain(d.obs, 4, cfg, 0);
    CHECK(ch.iterations() == 80);
    CHECK(ch.individual.size() == 80);
    CHECK(ch.n_individuals() == 3);
    CHECK(ch.path_iterations == std::vector<std::size_t>{0, 20, 40, 60});
    for (std::size_t r = 0; r < ch.iterations(); ++r) {
        for (const auto& psi : ch.group[r].psi) CHECK(psi.llt().info() == Eigen::Success);
        CHECK((ch.group[r].tau.array() > 0.0).all());
        CHECK(std::isfinite(ch.log_likelihood[r]));
        CHECK(std::isfinite(ch.log_posterior[r]));
    }
    for (const auto& paths : ch.paths) {
        REQUIRE(paths.size() == 3);
        for (const auto& p : paths) CHECK(p.size() == 50);
    }
    CHECK_FALSE(ch.acceptance.empty());
    for (const auto& a : ch.acceptance) {
        CHECK(a.proposals > 0);
        CHECK(a.burn_in_rate >= 0.0);
        CHECK(a.sampling_rate <= 1.0);
    }
}

TEST_CASE("likelihood trace equals a fresh forward pass") {
    const Dataset d = small_dataset(2, 3, 30, 6);
    McmcConfig cfg = short_config(10, 2, 8);
    cfg.pi = InitialDistribution::uniform(4);
    const ChainStore ch = run_chain(d.obs, 4, cfg, 0);
    for (std::size_t r : {std::size_t{0}, std::size_t{5}, std::size_t{9}}) {
        long double total = 0.0L;
        for (std::size_t n = 0; n < 3; ++n) {
            const auto& p = ch.individual[r][n];
            // Short series: recursion in long double as an independent check.
            const Matrix a = p.alpha.to_matrix().probs;
            const Matrix means = p.b.means();
            const CountMatrix& o = d.obs.counts[n];
            std::vector<long double> alpha(4);
            for (int i = 0; i < 4; ++i) alpha[i] = std::log(0.25L) + oracle::poisson_log_pmf(o(0, 0), means(0, i));
            for (Eigen::Index t = 1; t < o.cols(); ++t) {
                std::vector<long double> next(4);
                for (int j = 0; j < 4; ++j) {
                    std::vector<long double> terms(4);
                    for (int i = 0; i < 4; ++i) terms[i] = alpha[i] + std::log(static_cast<long double>(a(i, j)));
                    next[j] = oracle::log_sum_exp(terms) + oracle::poisson_log_pmf(o(0, t), means(0, j));
                }
                alpha = next;
            }
            total += oracle::log_sum_exp(alpha);
        }
        CHECK(ch.log_likelihood[r] == doctest::Approx(static_cast<double>(total)).epsilon(1e-10));
        CHECK(ch.log_posterior[r] != ch.log_likelihood[r]);
    }
}

TEST_CASE("vanishing variance components glue individuals to the group") {
    ScenarioConfig sc = scenario_preset(1, 5, 60, 12);
    const Dataset d = generate_scenario(sc);
    GroupParams start = d.true_group;
    start.psi.assign(4, 1e-16 * Matrix::Identity(3, 3));
    start.tau = Matrix::Constant(1, 4, 1e-16);
    McmcConfig cfg = short_config(600, 300, 4);
    cfg.start = start;
    cfg.proposal_ridge = 0.0;
    HyperPriors h = HyperPriors::defaults(4, d.obs.pooled_series_means());
    h.m0 = start.alpha_bar;
    h.psi0 = 1e-10 * Matrix::Identity(3, 3);
    h.df0 = 1e6;
    h.l0 = start.b_bar;
    h.c = Matrix::Constant(1, 4, 1e6);
    h.d = Matrix::Constant(1, 4, 1e-10);
    cfg.hyper = h;
    const ChainStore ch = run_chain(d.obs, 4, cfg, 0);
    double worst = 0.0;
    for (std::size_t r = 300; r < 600; ++r) {
        for (const auto& p : ch.individual[r]) {
            worst = std::max(worst, (p.alpha.intercepts - ch.group[r].alpha_bar).cwiseAbs().maxCoeff());
            worst = std::max(worst, (p.b.log_means - ch.group[r].b_bar).cwiseAbs().maxCoeff());
        }
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("complete pooling shares one parameter set") {
    const Dataset d = small_dataset(1, 4, 60, 13);
    McmcConfig cfg = short_config(100, 50, 3);
    cfg.pooling = Pooling::complete;
    const ChainStore ch = run_chain(d.obs, 4, cfg, 0);
    CHECK(ch.pooling == Pooling::complete);
    for (std::size_t r = 0; r < ch.iterations(); ++r) {
        CHECK(ch.group[r].psi.empty());
        CHECK(ch.group[r].tau.size() == 0);
        for (const auto& p : ch.individual[r]) {
            CHECK(p.alpha.intercepts == ch.group[r].alpha_bar);
            CHECK(p.b.log_means == ch.group[r].b_bar);
        }
    }
}

TEST_CASE("scenario 1 fit recovers the emission means") {
    const Dataset d = small_dataset(1, 20, 200, 7);
    const McmcConfig cfg = short_config(1500, 750, 11);
    const ChainStore ch = run_chain(d.obs, 4, cfg, 0);
    Matrix mean = Matrix::Zero(1, 4);
    for (std::size_t r = 750; r < 1500; ++r) mean += ch.group[r].b_bar / 750.0;
    // Individual-level estimation error on 4000 counts, not bias.
    CHECK((mean - d.true_group.b_bar).cwiseAbs().maxCoeff() < 0.15);
}

TEST_CASE("default start orders states by mean count") {
    const Dataset d = small_dataset(1, 10, 200, 14);
    const GroupParams s = default_start(d.obs, 4);
    for (int i = 1; i < 4; ++i) CHECK(s.b_bar(0, i) > s.b_bar(0, i - 1));
    CHECK((s.b_bar - d.true_group.b_bar).cwiseAbs().maxCoeff() < 0.5);
    const Matrix a = TransitionLogits{s.alpha_bar}.to_matrix().probs;
    for (int i = 0; i < 4; ++i) CHECK(a(i, i) == doctest::Approx(0.7));
}

TEST_CASE("configuration errors") {
    const Dataset d = small_dataset(1, 2, 20, 1);
    McmcConfig cfg = short_config(10, 10, 1);
    CHECK_THROWS_AS(run_chain(d.obs, 4, cfg, 0), ConfigError);
    cfg = short_config(10, 5, 1);
    cfg.adapt_target_multi = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = short_config(10, 5, 1);
    GroupParams wrong;
    wrong.alpha_bar = Matrix::Zero(3, 2);
    wrong.b_bar = Matrix::Zero(1, 3);
    cfg.start = wrong;
    CHECK_THROWS_AS(run_chain(d.obs, 4, cfg, 0), ConfigError);
    CHECK_THROWS_AS(pooling_from_string("none"), ConfigError);
    CHECK(pooling_from_string("complete") == Pooling::complete);
}

TEST_CASE("state permutations") {
    Rng rng(15);
    GroupParams g;
    g.alpha_bar = Matrix(3, 2);
    for (Eigen::Index i = 0; i < g.alpha_bar.size(); ++i) g.alpha_bar(i) = rng.normal();
    g.psi = {Matrix::Identity(2, 2), 2.0 * Matrix::Identity(2, 2), 3.0 * Matrix::Identity(2, 2)};
    g.b_bar = Matrix(1, 3);
    g.b_bar << 0.0, 1.0, 2.0;
    g.tau = Matrix(1, 3);
    g.tau << 0.1, 0.2, 0.3;
    const Matrix a = TransitionLogits{g.alpha_bar}.to_matrix().probs;

    GroupParams p = g;
    const StatePermutation perm{2, 0, 1};
    permute_states(p, perm);
    const Matrix b = TransitionLogits{p.alpha_bar}.to_matrix().probs;
    for (int x = 0; x < 3; ++x) {
        for (int y = 0; y < 3; ++y) CHECK(b(x, y) == doctest::Approx(a(perm[x], perm[y])).epsilon(1e-12));
        CHECK(p.b_bar(0, x) == g.b_bar(0, perm[x]));
        CHECK(p.tau(0, x) == g.tau(0, perm[x]));
    }
    CHECK(greedy_match(g.b_bar, p.b_bar) == StatePermutation{1, 2, 0});

    StatePath path{0, 1, 2, 2};
    permute_states(path, perm);
    CHECK(path == StatePath{1, 2, 0, 0});

    // Transforming psi by the re-referencing map keeps the implied
    // distribution of individual probabilities: compare Monte Carlo means.
    Vector mean_a = Vector::Zero(3), mean_b = Vector::Zero(3);
    Rng r1(16), r2(16);
    for (int s = 0; s < 20000; ++s) {
        const Vector la = r1.mvnormal(g.alpha_bar.row(perm[0]).transpose(), psd_factor(g.psi[perm[0]]));
        const Vector lb = r2.mvnormal(p.alpha_bar.row(0).transpose(), psd_factor(p.psi[0]));
        const Vector pa = logit_to_probs(la);
        const Vector pb = logit_to_probs(lb);
        for (int y = 0; y < 3; ++y) {
            mean_a(y) += pa(perm[y]) / 20000.0;
            mean_b(y) += pb(y) / 20000.0;
        }
    }
    CHECK((mean_a - mean_b).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("relabeling undoes a swapped iteration") {
    const Dataset d = small_dataset(1, 3, 60, 18);
    McmcConfig cfg = short_config(20, 5, 19);
    cfg.relabel = false;
    ChainStore ch = run_chain(d.obs, 4, cfg, 0);
    const ChainStore original = ch;
    GroupParams& g = ch.group[10];
    permute_states(g, StatePermutation{1, 0, 3, 2});
    for (auto& p : ch.individual[10]) permute_states(p, StatePermutation{1, 0, 3, 2});
    CHECK(relabel_chain(ch) == 1);
    CHECK((ch.group[10].b_bar - original.group[10].b_bar).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((ch.group[10].alpha_bar - original.group[10].alpha_bar).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("prior log densities") {
    const double x = 0.7, a = 3.0, b = 2.0;
    CHECK(inverse_gamma_log_density(x, a, b) == doctest::Approx(oracle::inv_gamma_logpdf(x, a, b)).epsilon(1e-12));
    // One-dimensional IW(s, df) is inverse-gamma(df / 2, s / 2).
    CHECK(inverse_wishart_log_density(Matrix::Constant(1, 1, x), Matrix::Constant(1, 1, 1.5), 5.0) ==
          doctest::Approx(oracle::inv_gamma_logpdf(x, 2.5, 0.75)).epsilon(1e-12));
}

}
