#include "mhmm/simulate.hpp"

#include "mhmm/error.hpp"

#include <cmath>
#include <string>

namespace mhmm {

std::vector<std::size_t> ObservationSet::lengths() const {
    std::vector<std::size_t> out;
    out.reserve(counts.size());
    for (const auto& c : counts) out.push_back(static_cast<std::size_t>(c.cols()));
    return out;
}

Vector ObservationSet::pooled_series_means() const {
    Vector sums = Vector::Zero(k_series);
    double total = 0.0;
    for (const auto& c : counts) {
        sums += c.cast<double>().rowwise().sum();
        total += static_cast<double>(c.cols());
    }
    return total > 0 ? Vector(sums / total) : sums;
}

void ObservationSet::validate() const {
    if (counts.empty()) throw DataError("observation set holds no individuals");
    if (k_series < 1) throw DataError("observation set needs at least one series");
    for (std::size_t n = 0; n < counts.size(); ++n) {
        if (counts[n].rows() != k_series) {
            throw DataError("individual " + std::to_string(n + 1) + " has the wrong number of series");
        }
        if (counts[n].cols() < 1) throw DataError("individual " + std::to_string(n + 1) + " has no occasions");
        if ((counts[n].array() < 0).any()) {
            throw DataError("individual " + std::to_string(n + 1) + " has negative counts");
        }
    }
}

void ScenarioConfig::validate() const {
    spec.validate();
    const int m = spec.m_states;
    const int k = spec.k_series;
    if (group_tpm.states() != m) throw ConfigError("group TPM must be M x M");
    group_tpm.validate(1e-6);
    if (group_log_means.rows() != k || group_log_means.cols() != m) {
        throw ConfigError("group log means must be K x M");
    }
    if (!group_log_means.allFinite()) throw ConfigError("group log means must be finite");
    if (static_cast<int>(psi.size()) != m) throw ConfigError("psi must hold one block per state");
    for (const auto& block : psi) {
        if (block.rows() != m - 1 || block.cols() != m - 1) throw ConfigError("psi blocks must be (M-1) x (M-1)");
        if ((block.diagonal().array() < 0.0).any()) throw ConfigError("psi diagonals must be non-negative");
        (void)psd_factor(block);
    }
    if (tau.rows() != k || tau.cols() != m) throw ConfigError("tau must be K x M");
    if ((tau.array() < 0.0).any()) throw ConfigError("tau entries must be non-negative");
    if (pi.pi.size() != m) throw ConfigError("initial distribution must have M entries");
    pi.validate(1e-9);
}

GroupParams ScenarioConfig::group_params() const {
    return GroupParams{TransitionLogits::from_matrix(group_tpm).intercepts, psi, group_log_means, tau};
}

IndividualParams draw_individual_params(const GroupParams& group, Rng& rng) {
    const int m = group.states();
    const int k = group.series();
    IndividualParams out{TransitionLogits{Matrix(m, m - 1)}, EmissionParams{Matrix(k, m)}};
    for (int i = 0; i < m; ++i) {
        const Matrix factor = psd_factor(group.psi[i]);
        const Vector mean = group.alpha_bar.row(i).transpose();
        out.alpha.intercepts.row(i) = rng.mvnormal(mean, factor).transpose();
    }
    for (int s = 0; s < k; ++s) {
        for (int i = 0; i < m; ++i) {
            const double var = group.tau(s, i);
            if (var < 0.0) throw CovarianceError("negative emission variance");
            const double z = rng.normal();
            out.b.log_means(s, i) = var == 0.0 ? group.b_bar(s, i) : group.b_bar(s, i) + std::sqrt(var) * z;
        }
    }
    return out;
}

StatePath sample_hidden_path(const TransitionMatrix& tpm, const InitialDistribution& pi, std::size_t t_len,
                             Rng& rng) {
    StatePath path(t_len);
    if (t_len == 0) return path;
    path[0] = rng.categorical(pi.pi);
    for (std::size_t t = 1; t < t_len; ++t) {
        path[t] = rng.categorical(tpm.probs.row(path[t - 1]).transpose());
    }
    return path;
}

CountMatrix sample_counts(const StatePath& path, const EmissionParams& b, Rng& rng) {
    const Matrix means = b.means();
    const auto k = means.rows();
    CountMatrix out(k, static_cast<Eigen::Index>(path.size()));
    for (std::size_t t = 0; t < path.size(); ++t) {
        for (Eigen::Index s = 0; s < k; ++s) out(s, static_cast<Eigen::Index>(t)) = rng.poisson(means(s, path[t]));
    }
    return out;
}

Dataset generate_scenario(const ScenarioConfig& cfg) {
    cfg.validate();
    Dataset data;
    data.true_group = cfg.group_params();
    data.obs.k_series = cfg.spec.k_series;
    const std::size_t n_ind = cfg.spec.n_individuals();
    data.obs.counts.resize(n_ind);
    data.true_paths.resize(n_ind);
    data.true_individual.resize(n_ind);
    for (std::size_t n = 0; n < n_ind; ++n) {
        Rng rng(cfg.seed, {0x51u, n});
        data.true_individual[n] = draw_individual_params(data.true_group, rng);
        const TransitionMatrix tpm = data.true_individual[n].alpha.to_matrix();
        data.true_paths[n] = sample_hidden_path(tpm, cfg.pi, cfg.spec.lengths[n], rng);
        data.obs.counts[n] = sample_counts(data.true_paths[n], data.true_individual[n].b, rng);
    }
    return data;
}

TransitionMatrix preset_group_tpm() {
    Matrix a(4, 4);
    a << 0.85, 0.13, 0.02, 0.00,
         0.23, 0.63, 0.13, 0.01,
         0.07, 0.24, 0.63, 0.06,
         0.03, 0.04, 0.14, 0.79;
    return {a};
}

Matrix preset_group_log_means() {
    Matrix b(1, 4);
    b << std::log(1.0), std::log(11.0), std::log(38.0), std::log(119.0);
    return b;
}

ScenarioConfig scenario_preset(int scenario, std::size_t n_individuals, std::size_t t_len, std::uint64_t seed) {
    if (scenario < 1 || scenario > 4) throw ConfigError("scenario preset must be 1, 2, 3 or 4");
    const bool het_transitions = scenario == 2 || scenario == 4;
    const bool het_emissions = scenario == 3 || scenario == 4;
    ScenarioConfig cfg;
    cfg.spec.m_states = 4;
    cfg.spec.k_series = 1;
    cfg.spec.lengths.assign(n_individuals, t_len);
    cfg.group_tpm = preset_group_tpm();
    cfg.group_log_means = preset_group_log_means();
    cfg.psi.assign(4, het_transitions ? Matrix(0.9 * Matrix::Identity(3, 3)) : Matrix(Matrix::Zero(3, 3)));
    cfg.tau = Matrix::Zero(1, 4);
    if (het_emissions) cfg.tau << 0.9, 0.7, 0.5, 0.2;
    cfg.seed = seed;
    cfg.pi = InitialDistribution::uniform(4);
    return cfg;
}

}  // namespace mhmm
