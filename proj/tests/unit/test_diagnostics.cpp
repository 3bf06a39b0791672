#include "mhmm/diagnostics.hpp"
#include "mhmm/error.hpp"
#include "mhmm/random.hpp"
#include "mhmm/simulate.hpp"

#include <doctest.h>

#include <cmath>

using namespace mhmm;

namespace {

std::vector<std::vector<double>> normal_chains(std::size_t n_chains, std::size_t len, std::uint64_t seed,
                                               double shift = 0.0) {
    Rng rng(seed);
    std::vector<std::vector<double>> out(n_chains, std::vector<double>(len));
    for (std::size_t c = 0; c < n_chains; ++c) {
        for (auto& x : out[c]) x = rng.normal() + shift * static_cast<double>(c);
    }
    return out;
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("constant chains have unit R-hat") {
    const std::vector<std::vector<double>> c(3, std::vector<double>(100, 2.5));
    CHECK(split_rhat(c) == 1.0);
}

TEST_CASE("independent draws from one distribution") {
    const auto c = normal_chains(2, 2000, 41);
    CHECK(split_rhat(c) < 1.01);
    const double ess = effective_sample_size(c);
    CHECK(ess > 3000.0);
    CHECK(ess < 5000.0);
}

TEST_CASE("shifted chains are flagged") {
    CHECK(split_rhat(normal_chains(2, 2000, 42, 1.0)) > 1.1);
}

TEST_CASE("autocorrelated chains have a smaller ESS") {
    Rng rng(43);
    std::vector<std::vector<double>> c(2, std::vector<double>(4000));
    for (auto& chain : c) {
        double x = 0.0;
        for (auto& v : chain) v = x = 0.9 * x + rng.normal();
    }
    // AR(1) with phi = 0.9: ESS about n (1 - phi) / (1 + phi).
    const double ess = effective_sample_size(c);
    CHECK(ess > 250.0);
    CHECK(ess < 700.0);
}

TEST_CASE("chain diagnostics need comparable chains") {
    const Dataset d = generate_scenario(scenario_preset(1, 2, 30, 3));
    McmcConfig cfg;
    cfg.n_iter = 40;
    cfg.burn_in = 20;
    cfg.seed = 9;
    cfg.n_chains = 2;
    auto chains = run_mcmc(d.obs, 4, cfg);
    CHECK_THROWS_AS(diagnostics({chains[0]}, 20), ConfigError);
    const auto diag = diagnostics(chains, 20);
    CHECK(diag.size() == group_scalar_names(4, 1, Pooling::multilevel).size());
    CHECK(diag.front().name == "alpha_bar[1,2]");
    for (const auto& p : diag) CHECK((std::isfinite(p.rhat) && p.rhat > 0.0 && p.ess > 0.0));
    chains[1].group.pop_back();
    chains[1].individual.pop_back();
    chains[1].log_posterior.pop_back();
    chains[1].log_likelihood.pop_back();
    CHECK_THROWS_AS(diagnostics(chains, 20), ConfigError);
}

TEST_CASE("flattened group follows the name order") {
    GroupParams g;
    g.alpha_bar = Matrix(2, 1);
    g.alpha_bar << 0.1, 0.2;
    g.psi = {Matrix::Constant(1, 1, 0.3), Matrix::Constant(1, 1, 0.4)};
    g.b_bar = Matrix(1, 2);
    g.b_bar << 0.5, 0.6;
    g.tau = Matrix(1, 2);
    g.tau << 0.7, 0.8;
    const Vector v = flatten_group(g, Pooling::multilevel);
    const auto names = group_scalar_names(2, 1, Pooling::multilevel);
    REQUIRE(static_cast<std::size_t>(v.size()) == names.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) CHECK(v(i) == doctest::Approx(0.1 * static_cast<double>(i + 1)));
    CHECK(group_scalar_names(2, 1, Pooling::complete).size() == 4);
}

}
