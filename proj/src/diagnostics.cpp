#include "mhmm/diagnostics.hpp"

#include "mhmm/error.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mhmm {

std::vector<std::string> group_scalar_names(int m_states, int k_series, Pooling pooling) {
    const int m = m_states;
    std::vector<std::string> names;
    for (int i = 1; i <= m; ++i) {
        for (int j = 2; j <= m; ++j) names.push_back("alpha_bar[" + std::to_string(i) + "," + std::to_string(j) + "]");
    }
    if (pooling == Pooling::multilevel) {
        for (int i = 1; i <= m; ++i) {
            for (int j = 2; j <= m; ++j) {
                for (int l = j; l <= m; ++l) {
                    names.push_back("psi[" + std::to_string(i) + "][" + std::to_string(j) + "," + std::to_string(l) + "]");
                }
            }
        }
    }
    for (int s = 1; s <= k_series; ++s) {
        for (int i = 1; i <= m; ++i) names.push_back("b_bar[" + std::to_string(s) + "," + std::to_string(i) + "]");
    }
    if (pooling == Pooling::multilevel) {
        for (int s = 1; s <= k_series; ++s) {
            for (int i = 1; i <= m; ++i) names.push_back("tau[" + std::to_string(s) + "," + std::to_string(i) + "]");
        }
    }
    return names;
}

Vector flatten_group(const GroupParams& g, Pooling pooling) {
    const int m = g.states();
    const int k = g.series();
    std::vector<double> out;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m - 1; ++j) out.push_back(g.alpha_bar(i, j));
    }
    if (pooling == Pooling::multilevel) {
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m - 1; ++j) {
                for (int l = j; l < m - 1; ++l) out.push_back(g.psi[static_cast<std::size_t>(i)](j, l));
            }
        }
    }
    for (int s = 0; s < k; ++s) {
        for (int i = 0; i < m; ++i) out.push_back(g.b_bar(s, i));
    }
    if (pooling == Pooling::multilevel) {
        for (int s = 0; s < k; ++s) {
            for (int i = 0; i < m; ++i) out.push_back(g.tau(s, i));
        }
    }
    return Eigen::Map<Vector>(out.data(), static_cast<Eigen::Index>(out.size()));
}

namespace {

using Chains = std::vector<std::vector<double>>;

Chains split_chains(const Chains& chains) {
    Chains out;
    for (const auto& c : chains) {
        const std::size_t half = c.size() / 2;
        out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
        out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
    }
    return out;
}

Chains rank_normalize(const Chains& chains) {
    std::vector<std::pair<double, std::size_t>> pooled;
    for (std::size_t c = 0; c < chains.size(); ++c) {
        for (double x : chains[c]) pooled.emplace_back(x, pooled.size());
    }
    std::sort(pooled.begin(), pooled.end());
    const auto total = static_cast<double>(pooled.size());
    std::vector<double> rank(pooled.size());
    for (std::size_t i = 0; i < pooled.size();) {
        std::size_t j = i;
        while (j + 1 < pooled.size() && pooled[j + 1].first == pooled[i].first) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) rank[pooled[t].second] = avg;
        i = j + 1;
    }
    const boost::math::normal_distribution<double> std_normal;
    Chains out(chains.size());
    std::size_t idx = 0;
    for (std::size_t c = 0; c < chains.size(); ++c) {
        out[c].resize(chains[c].size());
        for (std::size_t t = 0; t < chains[c].size(); ++t, ++idx) {
            out[c][t] = boost::math::quantile(std_normal, (rank[idx] - 0.375) / (total + 0.25));
        }
    }
    return out;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double rhat_basic(const Chains& chains) {
    const auto m = static_cast<double>(chains.size());
    const auto n = static_cast<double>(chains.front().size());
    std::vector<double> means;
    double within = 0.0;
    for (const auto& c : chains) {
        const double mu = mean_of(c);
        means.push_back(mu);
        double ss = 0.0;
        for (double x : c) ss += (x - mu) * (x - mu);
        within += ss / (n - 1.0);
    }
    within /= m;
    const double grand = mean_of(means);
    double between = 0.0;  // B / n
    for (double mu : means) between += (mu - grand) * (mu - grand);
    between /= (m - 1.0);
    if (within <= 0.0) return between <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    const double var_plus = (n - 1.0) / n * within + between;
    return std::sqrt(var_plus / within);
}

void check_chains(const Chains& chains) {
    if (chains.empty()) throw ConfigError("no chains supplied");
    for (const auto& c : chains) {
        if (c.size() != chains.front().size()) throw ConfigError("chains have unequal length");
    }
    if (chains.front().size() < 4) throw ConfigError("chains are too short for diagnostics");
}

}  // namespace

double split_rhat(const std::vector<std::vector<double>>& chains) {
    check_chains(chains);
    const Chains split = split_chains(chains);
    const double bulk = rhat_basic(rank_normalize(split));
    std::vector<double> all;
    for (const auto& c : split) all.insert(all.end(), c.begin(), c.end());
    std::nth_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(all.size() / 2), all.end());
    const double median = all[all.size() / 2];
    Chains folded = split;
    for (auto& c : folded) {
        for (double& x : c) x = std::abs(x - median);
    }
    const double tail = rhat_basic(rank_normalize(folded));
    return std::max(bulk, tail);
}

double effective_sample_size(const std::vector<std::vector<double>>& chains) {
    check_chains(chains);
    const Chains z = rank_normalize(split_chains(chains));
    const std::size_t m = z.size();
    const std::size_t n = z.front().size();
    std::vector<double> means(m);
    std::vector<std::vector<double>> centered(m);
    for (std::size_t c = 0; c < m; ++c) {
        means[c] = mean_of(z[c]);
        centered[c].resize(n);
        for (std::size_t t = 0; t < n; ++t) centered[c][t] = z[c][t] - means[c];
    }
    auto mean_acov = [&](std::size_t lag) {
        double total = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
            double s = 0.0;
            for (std::size_t t = 0; t + lag < n; ++t) s += centered[c][t] * centered[c][t + lag];
            total += s / static_cast<double>(n);
        }
        return total / static_cast<double>(m);
    };
    const double nd = static_cast<double>(n);
    const double acov0 = mean_acov(0);
    const double within = acov0 * nd / (nd - 1.0);
    const double grand = mean_of(means);
    double between = 0.0;
    for (double mu : means) between += (mu - grand) * (mu - grand);
    between = m > 1 ? between / static_cast<double>(m - 1) : 0.0;
    const double var_plus = (nd - 1.0) / nd * within + between;
    if (var_plus <= 0.0) return static_cast<double>(m * n);
    auto rho = [&](std::size_t lag) { return 1.0 - (within - mean_acov(lag)) / var_plus; };
    double sum_pairs = 0.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
        double pair = rho(2 * k) + rho(2 * k + 1);
        if (pair <= 0.0) break;
        pair = std::min(pair, prev_pair);
        prev_pair = pair;
        sum_pairs += pair;
    }
    const double tau = std::max(-1.0 + 2.0 * sum_pairs, 1.0 / std::log10(static_cast<double>(m * n)));
    return static_cast<double>(m * n) / tau;
}

std::vector<ParameterDiagnostic> diagnostics(const std::vector<ChainStore>& chains, std::size_t burn_in) {
    if (chains.size() < 2) throw ConfigError("diagnostics need at least 2 chains");
    const std::size_t len = chains.front().iterations();
    for (const auto& c : chains) {
        if (c.iterations() != len) throw ConfigError("chains have unequal length");
        if (c.m_states != chains.front().m_states || c.k_series != chains.front().k_series ||
            c.pooling != chains.front().pooling) {
            throw ConfigError("chains come from different models");
        }
    }
    if (burn_in >= len) throw ConfigError("burn-in leaves no draws");
    const auto& first = chains.front();
    const auto names = group_scalar_names(first.m_states, first.k_series, first.pooling);
    std::vector<std::vector<std::vector<double>>> draws(names.size(), std::vector<std::vector<double>>(chains.size()));
    for (std::size_t c = 0; c < chains.size(); ++c) {
        for (std::size_t r = burn_in; r < len; ++r) {
            const Vector flat = flatten_group(chains[c].group[r], first.pooling);
            for (std::size_t p = 0; p < names.size(); ++p) draws[p][c].push_back(flat(static_cast<Eigen::Index>(p)));
        }
    }
    std::vector<ParameterDiagnostic> out;
    for (std::size_t p = 0; p < names.size(); ++p) {
        out.push_back({names[p], split_rhat(draws[p]), effective_sample_size(draws[p])});
    }
    return out;
}

}  // namespace mhmm
