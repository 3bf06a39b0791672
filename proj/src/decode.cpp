#include "mhmm/decode.hpp"

#include "mhmm/error.hpp"

#include <cmath>
#include <limits>

namespace mhmm {

ViterbiPath viterbi_log(const Matrix& log_emissions, const TransitionMatrix& tpm, const InitialDistribution& pi) {
    const Eigen::Index t_len = log_emissions.rows();
    const Eigen::Index m = log_emissions.cols();
    if (tpm.states() != m || pi.pi.size() != m) throw InvalidParameter("state count mismatch in viterbi");
    ViterbiPath out;
    if (t_len == 0) return out;
    const Matrix log_a = tpm.probs.array().log().matrix();
    Matrix delta(t_len, m);
    Eigen::MatrixXi back(t_len, m);
    delta.row(0) = pi.pi.array().log().transpose() + log_emissions.row(0).array();
    for (Eigen::Index t = 1; t < t_len; ++t) {
        for (Eigen::Index j = 0; j < m; ++j) {
            double best = -std::numeric_limits<double>::infinity();
            int arg = 0;
            for (Eigen::Index i = 0; i < m; ++i) {
                const double v = delta(t - 1, i) + log_a(i, j);
                if (v > best) {
                    best = v;
                    arg = static_cast<int>(i);
                }
            }
            delta(t, j) = best + log_emissions(t, j);
            back(t, j) = arg;
        }
    }
    double best = -std::numeric_limits<double>::infinity();
    int state = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
        if (delta(t_len - 1, j) > best) {
            best = delta(t_len - 1, j);
            state = static_cast<int>(j);
        }
    }
    if (!std::isfinite(best)) throw FilteringDegeneracy(0, "no state sequence has positive probability");
    out.log_joint = best;
    out.path.resize(static_cast<std::size_t>(t_len));
    for (Eigen::Index t = t_len - 1; t >= 0; --t) {
        out.path[static_cast<std::size_t>(t)] = state;
        if (t > 0) state = back(t, state);
    }
    return out;
}

ViterbiPath viterbi(const CountMatrix& obs, const IndividualParams& params, const InitialDistribution& pi) {
    return viterbi_log(emission_log_matrix(obs, params.b.log_means), params.alpha.to_matrix(), pi);
}

LocalProbabilities local_probabilities_from_string(const std::string& s) {
    if (s == "filtered") return LocalProbabilities::filtered;
    if (s == "smoothed") return LocalProbabilities::smoothed;
    throw ConfigError("unknown local probability kind '" + s + "' (expected filtered or smoothed)");
}

Matrix local_probabilities(const CountMatrix& obs, const IndividualParams& params, const InitialDistribution& pi,
                           LocalProbabilities kind) {
    const Matrix log_emis = emission_log_matrix(obs, params.b.log_means);
    const TransitionMatrix tpm = params.alpha.to_matrix();
    const ForwardTable fwd = forward_filter_log(log_emis, tpm, pi);
    if (kind == LocalProbabilities::filtered) return fwd.filtered;
    return smoothed_marginals(fwd, log_emis, tpm);
}

std::vector<DecodeResult> decode_dataset(const ObservationSet& obs, const ChainStore& chain, std::size_t burn_in,
                                         Estimator estimator, LocalProbabilities kind) {
    if (chain.n_individuals() != obs.n_individuals()) throw ConfigError("chain and observations differ in individuals");
    const auto params = point_individual_params(chain, burn_in, estimator);
    std::vector<DecodeResult> out;
    out.reserve(obs.n_individuals());
    for (std::size_t n = 0; n < obs.n_individuals(); ++n) {
        const ViterbiPath vp = viterbi(obs.counts[n], params[n], chain.pi);
        out.push_back({vp.path, vp.log_joint, local_probabilities(obs.counts[n], params[n], chain.pi, kind)});
    }
    return out;
}

}  // namespace mhmm
