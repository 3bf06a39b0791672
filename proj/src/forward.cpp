#include "mhmm/forward.hpp"

#include "mhmm/error.hpp"

#include <cmath>
#include <string>

namespace mhmm {

Vector log_factorial_sums(const CountMatrix& obs) {
    Vector out = Vector::Zero(obs.cols());
    for (Eigen::Index t = 0; t < obs.cols(); ++t) {
        for (Eigen::Index k = 0; k < obs.rows(); ++k) out(t) += log_factorial(obs(k, t));
    }
    return out;
}

Matrix emission_log_matrix(const CountMatrix& obs, const Matrix& log_means, const Vector& log_factorial_sums) {
    if (obs.rows() != log_means.rows()) throw InvalidParameter("series count differs between data and parameters");
    if (!log_means.allFinite()) throw InvalidParameter("emission log means must be finite");
    // l[t][i] = sum_k q_kt log b_ki - sum_k b_ki - sum_k ln q_kt!
    Matrix out = obs.cast<double>().transpose() * log_means;
    const Eigen::RowVectorXd mean_sums = log_means.array().exp().colwise().sum();
    out.rowwise() -= mean_sums;
    out.colwise() -= log_factorial_sums;
    return out;
}

Matrix emission_log_matrix(const CountMatrix& obs, const Matrix& log_means) {
    return emission_log_matrix(obs, log_means, log_factorial_sums(obs));
}

ForwardTable forward_filter_log(const Matrix& log_emissions, const TransitionMatrix& tpm,
                                const InitialDistribution& pi) {
    const Eigen::Index t_len = log_emissions.rows();
    const Eigen::Index m = log_emissions.cols();
    if (tpm.probs.rows() != m || pi.pi.size() != m) throw InvalidParameter("state count mismatch in forward filter");
    ForwardTable fwd{Matrix(t_len, m), Vector(t_len), 0.0};
    Eigen::RowVectorXd predicted = pi.pi.transpose();
    Eigen::RowVectorXd weights(m);
    for (Eigen::Index t = 0; t < t_len; ++t) {
        if (t > 0) predicted.noalias() = fwd.filtered.row(t - 1) * tpm.probs;
        const double shift = log_emissions.row(t).maxCoeff();
        for (Eigen::Index i = 0; i < m; ++i) weights(i) = predicted(i) * std::exp(log_emissions(t, i) - shift);
        const double norm = weights.sum();
        if (!(norm > 0.0) || !std::isfinite(norm)) {
            throw FilteringDegeneracy(static_cast<std::size_t>(t),
                                      "forward filter lost all mass at occasion " + std::to_string(t + 1));
        }
        fwd.filtered.row(t) = weights / norm;
        fwd.log_scale(t) = std::log(norm) + shift;
    }
    fwd.log_likelihood = fwd.log_scale.sum();
    return fwd;
}

ForwardTable forward_filter(const CountMatrix& obs, const IndividualParams& params, const InitialDistribution& pi) {
    return forward_filter_log(emission_log_matrix(obs, params.b.log_means), params.alpha.to_matrix(), pi);
}

StatePath backward_sample(const ForwardTable& fwd, const TransitionMatrix& tpm, Rng& rng) {
    const Eigen::Index t_len = fwd.filtered.rows();
    const Eigen::Index m = fwd.filtered.cols();
    if (tpm.probs.rows() != m) throw InvalidParameter("state count mismatch in backward sampler");
    StatePath path(static_cast<std::size_t>(t_len));
    if (t_len == 0) return path;
    path.back() = rng.categorical(fwd.filtered.row(t_len - 1).transpose());
    Vector weights(m);
    for (Eigen::Index t = t_len - 2; t >= 0; --t) {
        const int next = path[static_cast<std::size_t>(t + 1)];
        weights = fwd.filtered.row(t).transpose().cwiseProduct(tpm.probs.col(next));
        path[static_cast<std::size_t>(t)] = rng.categorical(weights);
    }
    return path;
}

Matrix smoothed_marginals(const ForwardTable& fwd, const Matrix& log_emissions, const TransitionMatrix& tpm) {
    const Eigen::Index t_len = fwd.filtered.rows();
    const Eigen::Index m = fwd.filtered.cols();
    Matrix out(t_len, m);
    if (t_len == 0) return out;
    // Scaled backward variables; beta_T = 1 and each step is normalized to sum 1.
    Vector beta = Vector::Ones(m);
    out.row(t_len - 1) = fwd.filtered.row(t_len - 1);
    Vector emis(m);
    for (Eigen::Index t = t_len - 2; t >= 0; --t) {
        const double shift = log_emissions.row(t + 1).maxCoeff();
        for (Eigen::Index j = 0; j < m; ++j) emis(j) = std::exp(log_emissions(t + 1, j) - shift) * beta(j);
        beta = tpm.probs * emis;
        beta /= beta.sum();
        Vector post = fwd.filtered.row(t).transpose().cwiseProduct(beta);
        out.row(t) = (post / post.sum()).transpose();
    }
    return out;
}

Eigen::MatrixXi transition_counts(const StatePath& path, int m_states) {
    Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(m_states, m_states);
    for (std::size_t t = 1; t < path.size(); ++t) ++counts(path[t - 1], path[t]);
    return counts;
}

}  // namespace mhmm
