#include "mhmm/model.hpp"

#include "mhmm/error.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numbers>
#include <string>

namespace mhmm {

namespace {

bool all_finite(const Matrix& m) { return m.allFinite(); }

bool is_spd(const Matrix& m) {
    if (m.rows() != m.cols() || m.rows() == 0) return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) return false;
    Eigen::LLT<Matrix> llt(m);
    return llt.info() == Eigen::Success;
}

}  // namespace

void ModelSpec::validate() const {
    if (m_states < 2) throw ConfigError("model needs at least 2 hidden states, got " + std::to_string(m_states));
    if (k_series < 1) throw ConfigError("model needs at least 1 count series");
    if (lengths.empty()) throw ConfigError("model needs at least 1 individual");
    for (std::size_t n = 0; n < lengths.size(); ++n) {
        if (lengths[n] < 2) {
            throw ConfigError("individual " + std::to_string(n + 1) + " has fewer than 2 occasions");
        }
    }
}

void TransitionMatrix::validate(double tol) const {
    if (probs.rows() != probs.cols() || probs.rows() < 2) {
        throw InvalidParameter("transition matrix must be square with at least 2 states");
    }
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        if ((probs.row(i).array() < 0.0).any() || (probs.row(i).array() > 1.0).any() ||
            !probs.row(i).allFinite()) {
            throw InvalidParameter("transition row " + std::to_string(i + 1) + " has entries outside [0,1]");
        }
        if (std::abs(probs.row(i).sum() - 1.0) > tol) {
            throw InvalidParameter("transition row " + std::to_string(i + 1) + " does not sum to 1");
        }
    }
}

TransitionMatrix TransitionLogits::to_matrix() const {
    const int m = states();
    TransitionMatrix out{Matrix(m, m)};
    for (int i = 0; i < m; ++i) {
        out.probs.row(i) = logit_to_probs(intercepts.row(i).transpose()).transpose();
    }
    return out;
}

TransitionLogits TransitionLogits::from_matrix(const TransitionMatrix& tpm, double floor) {
    const int m = tpm.states();
    TransitionLogits out{Matrix(m, m - 1)};
    for (int i = 0; i < m; ++i) {
        out.intercepts.row(i) = probs_to_logit(tpm.probs.row(i).transpose(), floor).transpose();
    }
    return out;
}

InitialDistribution InitialDistribution::uniform(int m_states) {
    return {Vector::Constant(m_states, 1.0 / m_states)};
}

void InitialDistribution::validate(double tol) const {
    if (pi.size() < 2 || (pi.array() < 0.0).any() || !pi.allFinite()) {
        throw InvalidParameter("initial distribution must be a probability vector");
    }
    if (std::abs(pi.sum() - 1.0) > tol) throw InvalidParameter("initial distribution does not sum to 1");
}

void GroupParams::validate() const {
    const int m = states();
    const int k = series();
    if (m < 2 || alpha_bar.cols() != m - 1) throw ConfigError("alpha_bar must be M x (M-1)");
    if (static_cast<int>(psi.size()) != m) throw ConfigError("psi must hold one block per state");
    if (b_bar.cols() != m || tau.rows() != k || tau.cols() != m) throw ConfigError("emission blocks must be K x M");
    if (!all_finite(alpha_bar) || !all_finite(b_bar)) throw InvalidParameter("group means must be finite");
    for (int i = 0; i < m; ++i) {
        if (psi[i].rows() != m - 1 || !is_spd(psi[i])) {
            throw CovarianceError("psi block for state " + std::to_string(i + 1) + " is not SPD");
        }
    }
    if (!((tau.array() > 0.0).all())) throw InvalidParameter("tau entries must be positive");
}

HyperPriors HyperPriors::defaults(int m_states, const Vector& pooled_series_means) {
    const int m = m_states;
    const auto k = static_cast<int>(pooled_series_means.size());
    HyperPriors h;
    h.m0 = Matrix::Zero(m, m - 1);
    h.k0 = 1.0;
    h.psi0 = Matrix::Identity(m - 1, m - 1);
    h.df0 = (m - 1) + 3.0;
    h.l0 = Matrix(k, m);
    for (int s = 0; s < k; ++s) {
        h.l0.row(s).setConstant(std::log(std::max(pooled_series_means(s), 1e-3)));
    }
    h.tau0 = Matrix::Constant(k, m, 4.0);
    h.c = Matrix::Constant(k, m, 0.01);
    h.d = Matrix::Constant(k, m, 0.01);
    return h;
}

void HyperPriors::validate(int m_states, int k_series) const {
    const int m = m_states;
    if (m0.rows() != m || m0.cols() != m - 1) throw ConfigError("m0 must be M x (M-1)");
    if (!(k0 > 0.0)) throw ConfigError("K0 must be positive");
    if (psi0.rows() != m - 1 || !is_spd(psi0)) throw CovarianceError("psi0 must be SPD of size M-1");
    if (!(df0 >= m - 1)) throw ConfigError("df0 must be at least M-1");
    for (const Matrix* mat : {&l0, &tau0, &c, &d}) {
        if (mat->rows() != k_series || mat->cols() != m) throw ConfigError("emission hyper-priors must be K x M");
    }
    if (!all_finite(m0) || !all_finite(l0)) throw InvalidParameter("prior means must be finite");
    if (!((tau0.array() > 0.0).all() && (c.array() > 0.0).all() && (d.array() > 0.0).all())) {
        throw InvalidParameter("tau0, c and d must be strictly positive");
    }
}

Vector logit_to_probs(const Vector& logits) {
    if (!logits.allFinite()) throw InvalidParameter("logit row contains non-finite entries");
    const Eigen::Index m = logits.size() + 1;
    const double shift = std::max(0.0, logits.size() > 0 ? logits.maxCoeff() : 0.0);
    Vector out(m);
    out(0) = std::exp(-shift);
    for (Eigen::Index j = 1; j < m; ++j) out(j) = std::exp(logits(j - 1) - shift);
    out /= out.sum();
    return out;
}

Vector probs_to_logit(const Vector& probs, double floor) {
    if (probs.size() < 2 || !probs.allFinite() || (probs.array() < 0.0).any()) {
        throw InvalidParameter("probability row must hold at least 2 finite non-negative entries");
    }
    if (std::abs(probs.sum() - 1.0) > 1e-6) throw InvalidParameter("probability row does not sum to 1");
    if (probs(0) == 0.0) throw SingularLink("reference category has zero probability");
    Vector p = probs.cwiseMax(floor);
    p /= p.sum();
    Vector out(p.size() - 1);
    for (Eigen::Index j = 1; j < p.size(); ++j) out(j - 1) = std::log(p(j) / p(0));
    return out;
}

double log_factorial(Count q) {
    if (q < 2) return 0.0;
    return boost::math::lgamma(static_cast<double>(q) + 1.0);
}

double poisson_log_pmf(Count q, double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw InvalidParameter("Poisson mean must be positive and finite");
    }
    if (q < 0) throw InvalidParameter("Poisson count must be non-negative");
    return static_cast<double>(q) * std::log(lambda) - lambda - log_factorial(q);
}

double emission_log_likelihood(const Eigen::Ref<const Eigen::Matrix<Count, Eigen::Dynamic, 1>>& obs,
                               const Vector& means) {
    if (obs.size() != means.size()) throw InvalidParameter("observation and mean vectors differ in length");
    double total = 0.0;
    for (Eigen::Index k = 0; k < obs.size(); ++k) total += poisson_log_pmf(obs(k), means(k));
    return total;
}

double mvnormal_log_density(const Vector& x, const Vector& mean, const Eigen::LLT<Matrix>& cov_llt) {
    const Vector z = cov_llt.matrixL().solve(x - mean);
    const Matrix& l = cov_llt.matrixLLT();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) log_det += 2.0 * std::log(l(i, i));
    return -0.5 * (static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) + log_det + z.squaredNorm());
}

double normal_log_density(double x, double mean, double variance) {
    const double r = x - mean;
    return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + r * r / variance);
}

}  // namespace mhmm
