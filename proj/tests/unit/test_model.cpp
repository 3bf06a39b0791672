#include "oracles.hpp"

#include "mhmm/error.hpp"
#include "mhmm/model.hpp"
#include "mhmm/random.hpp"
#include "mhmm/simulate.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace mhmm;

TEST_SUITE("model") {

TEST_CASE("logit_to_probs on hand-solved rows") {
    const Vector even = logit_to_probs(Vector::Zero(3));
    for (int j = 0; j < 4; ++j) CHECK(even(j) == doctest::Approx(0.25).epsilon(1e-15));

    Vector l(1);
    l << std::log(3.0);
    const Vector p = logit_to_probs(l);
    CHECK(p(0) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(p(1) == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("group TPM row 1 survives the link") {
    const Matrix a = preset_group_tpm().probs;
    const Vector row = a.row(0).transpose();
    // A floor far below the tolerance keeps the exact zero cell within 1e-6.
    const Vector back = logit_to_probs(probs_to_logit(row, 1e-9));
    CHECK((back - row).cwiseAbs().maxCoeff() < 1e-6);
    // Default floor: the zero cell becomes 1e-4 and the row is renormalized.
    const Vector floored = logit_to_probs(probs_to_logit(row));
    CHECK(floored(3) == doctest::Approx(1e-4 / 1.0001).epsilon(1e-10));
    CHECK((floored - row).cwiseAbs().maxCoeff() < 1.1e-4);
}

TEST_CASE("probs_to_logit examples and errors") {
    Vector even = Vector::Constant(4, 0.25);
    CHECK(probs_to_logit(even).cwiseAbs().maxCoeff() < 1e-15);

    Vector two(2);
    two << 0.25, 0.75;
    CHECK(probs_to_logit(two)(0) == doctest::Approx(std::log(3.0)).epsilon(1e-14));

    Vector eps(4);
    eps << 0.85, 0.13, 0.02, 1e-4;
    eps /= eps.sum();
    CHECK((logit_to_probs(probs_to_logit(eps)) - eps).cwiseAbs().maxCoeff() < 1e-8);

    Vector singular(3);
    singular << 0.0, 0.5, 0.5;
    CHECK_THROWS_AS(probs_to_logit(singular), SingularLink);

    Vector bad(2);
    bad << std::numeric_limits<double>::quiet_NaN(), 0.0;
    CHECK_THROWS_AS(logit_to_probs(bad), InvalidParameter);
    bad << std::numeric_limits<double>::infinity(), 0.0;
    CHECK_THROWS_AS(logit_to_probs(bad), InvalidParameter);
}

TEST_CASE("link round trip and simplex over random rows") {
    Rng rng(101);
    for (int rep = 0; rep < 1000; ++rep) {
        const int m = 2 + static_cast<int>(rng.index(5));
        Vector l(m - 1);
        for (int j = 0; j < m - 1; ++j) l(j) = rng.normal(0.0, 3.0);
        const Vector p = logit_to_probs(l);
        CHECK(std::abs(p.sum() - 1.0) < 1e-12);
        CHECK((p.array() > 0.0).all());
        CHECK((p.array() < 1.0).all());
        CHECK((p - oracle::probs_from_logits(l)).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((probs_to_logit(p, 1e-300) - l).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("softmax is overflow safe") {
    Vector l(2);
    l << 800.0, 790.0;
    const Vector p = logit_to_probs(l);
    CHECK(p.allFinite());
    CHECK(p(1) == doctest::Approx(1.0 / (1.0 + std::exp(-10.0))).epsilon(1e-12));
}

TEST_CASE("logit link is not translation invariant") {
    Vector l(3);
    l << 0.3, -1.2, 2.0;
    const Vector p = logit_to_probs(l);
    const Vector q = logit_to_probs((l.array() + 1.5).matrix());
    CHECK(std::abs(p(0) - q(0)) > 0.05);
}

TEST_CASE("poisson_log_pmf values") {
    CHECK(poisson_log_pmf(0, 1.0) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(poisson_log_pmf(2, 2.0) == doctest::Approx(2.0 * std::log(2.0) - 2.0 - std::log(2.0)).epsilon(1e-14));
    const double ref = static_cast<double>(oracle::poisson_log_pmf(119, 119.0));
    CHECK(std::abs(poisson_log_pmf(119, 119.0) - ref) < 1e-9);
    CHECK(std::isfinite(poisson_log_pmf(1000000, 1e6)));
    CHECK(std::abs(poisson_log_pmf(1000000, 1e6) - static_cast<double>(oracle::poisson_log_pmf(1000000, 1e6))) < 1e-6);
    CHECK_THROWS_AS(poisson_log_pmf(1, 0.0), InvalidParameter);
    CHECK_THROWS_AS(poisson_log_pmf(1, -2.0), InvalidParameter);
}

TEST_CASE("poisson_log_pmf matches the summed-term oracle") {
    for (Count q : {0, 1, 5, 17, 60, 250}) {
        for (double lambda : {0.01, 1.0, 7.5, 119.0, 400.0}) {
            const double ref = static_cast<double>(oracle::poisson_log_pmf(q, lambda));
            CHECK(std::abs(poisson_log_pmf(q, lambda) - ref) < 1e-9 * std::max(1.0, std::abs(ref)));
        }
    }
}

TEST_CASE("poisson pmf normalizes for lambda up to 20") {
    for (double lambda : {0.001, 0.5, 1.0, 3.3, 11.0, 20.0}) {
        double total = 0.0;
        for (Count q = 0; q <= 200; ++q) total += std::exp(poisson_log_pmf(q, lambda));
        CHECK(std::abs(total - 1.0) < 1e-10);
    }
}

TEST_CASE("emission_log_likelihood is additive over series") {
    Eigen::Matrix<Count, Eigen::Dynamic, 1> one(1);
    one << 4;
    Vector lam1(1);
    lam1 << 2.5;
    CHECK(emission_log_likelihood(one, lam1) == poisson_log_pmf(4, 2.5));

    Eigen::Matrix<Count, Eigen::Dynamic, 1> zeros = Eigen::Matrix<Count, Eigen::Dynamic, 1>::Zero(2);
    CHECK(emission_log_likelihood(zeros, Vector::Ones(2)) == doctest::Approx(-2.0).epsilon(1e-15));

    Rng rng(7);
    for (int rep = 0; rep < 50; ++rep) {
        Eigen::Matrix<Count, Eigen::Dynamic, 1> q(3);
        Vector lam(3);
        for (int k = 0; k < 3; ++k) {
            lam(k) = 0.1 + 30.0 * rng.uniform();
            q(k) = rng.poisson(lam(k));
        }
        const double sum = poisson_log_pmf(q(0), lam(0)) + poisson_log_pmf(q(1), lam(1)) + poisson_log_pmf(q(2), lam(2));
        CHECK(emission_log_likelihood(q, lam) == sum);
    }
}

TEST_CASE("TransitionLogits matrix conversion") {
    const TransitionMatrix a = preset_group_tpm();
    const TransitionLogits l = TransitionLogits::from_matrix(a);
    CHECK(l.intercepts.rows() == 4);
    CHECK(l.intercepts.cols() == 3);
    const TransitionMatrix back = l.to_matrix();
    back.validate();
    CHECK((back.probs - a.probs).cwiseAbs().maxCoeff() < 1.1e-4);
}

TEST_CASE("parameter validation") {
    ModelSpec spec{2, 1, {5, 1}};
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.lengths = {5, 2};
    CHECK_NOTHROW(spec.validate());
    spec.m_states = 1;
    CHECK_THROWS_AS(spec.validate(), ConfigError);

    TransitionMatrix bad{Matrix::Constant(2, 2, 0.4)};
    CHECK_THROWS(bad.validate());

    GroupParams g;
    g.alpha_bar = Matrix::Zero(2, 1);
    g.psi = {Matrix::Identity(1, 1), -Matrix::Identity(1, 1)};
    g.b_bar = Matrix::Zero(1, 2);
    g.tau = Matrix::Ones(1, 2);
    CHECK_THROWS_AS(g.validate(), CovarianceError);
    g.psi[1] = Matrix::Identity(1, 1);
    CHECK_NOTHROW(g.validate());
    g.tau(0, 0) = 0.0;
    CHECK_THROWS(g.validate());
}

TEST_CASE("hyper-prior defaults") {
    Vector means(2);
    means << 3.0, 40.0;
    const HyperPriors h = HyperPriors::defaults(3, means);
    CHECK(h.m0.rows() == 3);
    CHECK(h.m0.cols() == 2);
    CHECK(h.df0 == doctest::Approx(5.0));
    CHECK(h.l0(1, 2) == doctest::Approx(std::log(40.0)));
    CHECK_NOTHROW(h.validate(3, 2));
    HyperPriors broken = h;
    broken.c(0, 0) = 0.0;
    CHECK_THROWS(broken.validate(3, 2));
}

TEST_CASE("normal densities") {
    CHECK(normal_log_density(1.0, 1.0, 4.0) == doctest::Approx(-0.5 * std::log(2.0 * M_PI * 4.0)));
    Matrix cov(2, 2);
    cov << 2.0, 0.3, 0.3, 1.0;
    Vector x(2), mu(2);
    x << 0.4, -0.7;
    mu << 0.1, 0.2;
    const Vector d = x - mu;
    const double ref = -std::log(2.0 * M_PI) - 0.5 * std::log(cov.determinant()) - 0.5 * d.dot(cov.inverse() * d);
    CHECK(mvnormal_log_density(x, mu, cov.llt()) == doctest::Approx(ref).epsilon(1e-12));
}

}
