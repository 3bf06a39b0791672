#include "mhmm/evaluate.hpp"

#include "mhmm/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mhmm {

Estimator estimator_from_string(const std::string& s) {
    if (s == "map") return Estimator::map;
    if (s == "median") return Estimator::median;
    throw ConfigError("unknown estimator '" + s + "' (expected map or median)");
}

double quantile(std::vector<double> values, double prob) {
    if (values.empty()) throw ConfigError("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ScalarSummary summarize_draws(std::span<const double> draws, std::span<const double> log_posterior,
                              Estimator estimator) {
    if (draws.empty()) throw ConfigError("no draws to summarize");
    std::vector<double> v(draws.begin(), draws.end());
    ScalarSummary s;
    s.cri_low = quantile(v, 0.025);
    s.cri_high = quantile(v, 0.975);
    if (estimator == Estimator::median) {
        s.point = quantile(v, 0.5);
    } else {
        if (log_posterior.size() != draws.size()) throw ConfigError("trace and draws differ in length");
        const auto best = std::max_element(log_posterior.begin(), log_posterior.end()) - log_posterior.begin();
        s.point = draws[static_cast<std::size_t>(best)];
    }
    return s;
}

Eigen::Index EstimateSummary::index_of(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw ConfigError("no parameter named " + name);
    return it - names.begin();
}

std::vector<std::string> summary_names(int m_states, int k_series, Pooling pooling) {
    const int m = m_states;
    std::vector<std::string> names;
    auto cell = [](const char* p, int a, int b) { return std::string(p) + "[" + std::to_string(a) + "," + std::to_string(b) + "]"; };
    for (int i = 1; i <= m; ++i) {
        for (int j = 1; j <= m; ++j) names.push_back(cell("a_bar", i, j));
    }
    for (int s = 1; s <= k_series; ++s) {
        for (int i = 1; i <= m; ++i) names.push_back(cell("b_bar", s, i));
    }
    if (pooling == Pooling::multilevel) {
        for (int i = 1; i <= m; ++i) {
            for (int j = 2; j <= m; ++j) names.push_back(cell("psi", i, j));
        }
        for (int s = 1; s <= k_series; ++s) {
            for (int i = 1; i <= m; ++i) names.push_back(cell("tau", s, i));
        }
        for (int i = 1; i <= m; ++i) {
            for (int j = 1; j <= m; ++j) names.push_back(cell("adhoc_var", i, j));
        }
    }
    return names;
}

namespace {

Matrix tpm_of(const Matrix& logits) { return TransitionLogits{logits}.to_matrix().probs; }

/// Reporting-scale scalars of one iteration, in summary_names() order.
std::vector<double> reporting_scalars(const GroupParams& g, const std::vector<IndividualParams>& ind, Pooling pooling) {
    const int m = g.states();
    const int k = g.series();
    std::vector<double> out;
    const Matrix a = tpm_of(g.alpha_bar);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) out.push_back(a(i, j));
    }
    for (int s = 0; s < k; ++s) {
        for (int i = 0; i < m; ++i) out.push_back(g.b_bar(s, i));
    }
    if (pooling == Pooling::multilevel) {
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m - 1; ++j) out.push_back(g.psi[static_cast<std::size_t>(i)](j, j));
        }
        for (int s = 0; s < k; ++s) {
            for (int i = 0; i < m; ++i) out.push_back(g.tau(s, i));
        }
        const Matrix v = ind.size() >= 2 ? adhoc_tpm_variance(ind) : Matrix(Matrix::Zero(m, m));
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) out.push_back(v(i, j));
        }
    }
    return out;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

}  // namespace

std::size_t map_iteration(const ChainStore& chain, std::size_t burn_in) {
    if (burn_in >= chain.iterations()) throw ConfigError("burn-in leaves no post-burn-in draws");
    const auto begin = chain.log_posterior.begin() + static_cast<std::ptrdiff_t>(burn_in);
    return static_cast<std::size_t>(std::max_element(begin, chain.log_posterior.end()) - chain.log_posterior.begin());
}

EstimateSummary map_estimate(const ChainStore& chain, std::size_t burn_in, Estimator estimator) {
    const std::size_t best = map_iteration(chain, burn_in);
    EstimateSummary out;
    out.names = summary_names(chain.m_states, chain.k_series, chain.pooling);
    out.map_iteration = best;
    const std::size_t kept = chain.iterations() - burn_in;
    const std::size_t p = out.names.size();
    std::vector<std::vector<double>> draws(p, std::vector<double>(kept));
    for (std::size_t r = burn_in; r < chain.iterations(); ++r) {
        const auto vals = reporting_scalars(chain.group[r], chain.individual[r], chain.pooling);
        for (std::size_t q = 0; q < p; ++q) draws[q][r - burn_in] = vals[q];
    }
    const std::span<const double> trace(chain.log_posterior.data() + burn_in, kept);
    out.point.resize(static_cast<Eigen::Index>(p));
    out.cri_low.resize(static_cast<Eigen::Index>(p));
    out.cri_high.resize(static_cast<Eigen::Index>(p));
    for (std::size_t q = 0; q < p; ++q) {
        const ScalarSummary s = summarize_draws(draws[q], trace, estimator);
        out.point(static_cast<Eigen::Index>(q)) = s.point;
        out.cri_low(static_cast<Eigen::Index>(q)) = s.cri_low;
        out.cri_high(static_cast<Eigen::Index>(q)) = s.cri_high;
    }
    return out;
}

std::vector<IndividualParams> point_individual_params(const ChainStore& chain, std::size_t burn_in,
                                                      Estimator estimator) {
    const std::size_t best = map_iteration(chain, burn_in);
    if (estimator == Estimator::map) return chain.individual[best];
    const std::size_t n_ind = chain.n_individuals();
    std::vector<IndividualParams> out = chain.individual[best];
    std::vector<double> buf;
    for (std::size_t n = 0; n < n_ind; ++n) {
        Matrix& alpha = out[n].alpha.intercepts;
        for (Eigen::Index c = 0; c < alpha.size(); ++c) {
            buf.clear();
            for (std::size_t r = burn_in; r < chain.iterations(); ++r) buf.push_back(chain.individual[r][n].alpha.intercepts(c));
            alpha(c) = quantile(buf, 0.5);
        }
        Matrix& logb = out[n].b.log_means;
        for (Eigen::Index c = 0; c < logb.size(); ++c) {
            buf.clear();
            for (std::size_t r = burn_in; r < chain.iterations(); ++r) buf.push_back(chain.individual[r][n].b.log_means(c));
            logb(c) = quantile(buf, 0.5);
        }
    }
    return out;
}

Vector truth_scalars(const GroupParams& truth, const std::vector<IndividualParams>& true_individual,
                     Pooling pooling) {
    const auto vals = reporting_scalars(truth, true_individual, pooling);
    return Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

const McRow& McReport::row(const std::string& name) const {
    const auto it = std::find_if(rows.begin(), rows.end(), [&](const McRow& r) { return r.name == name; });
    if (it == rows.end()) throw ConfigError("no report row named " + name);
    return *it;
}

McReport mc_metrics(const std::vector<EstimateSummary>& estimates, const std::vector<Vector>& truths) {
    if (estimates.size() < 2) throw ConfigError("Monte Carlo metrics need at least 2 replications");
    if (truths.size() != estimates.size()) throw ConfigError("one truth vector per replication is required");
    const auto& names = estimates.front().names;
    const auto p = static_cast<Eigen::Index>(names.size());
    for (std::size_t r = 0; r < estimates.size(); ++r) {
        if (estimates[r].names != names || estimates[r].point.size() != p || truths[r].size() != p) {
            throw ConfigError("replication " + std::to_string(r + 1) + " does not match the parameter layout");
        }
    }
    const auto reps = static_cast<double>(estimates.size());
    McReport report;
    for (Eigen::Index q = 0; q < p; ++q) {
        McRow row;
        row.name = names[static_cast<std::size_t>(q)];
        row.replications = estimates.size();
        std::vector<double> points;
        double err_sum = 0.0;
        double sq_sum = 0.0;
        double truth_sum = 0.0;
        for (std::size_t r = 0; r < estimates.size(); ++r) {
            const double err = estimates[r].point(q) - truths[r](q);
            points.push_back(estimates[r].point(q));
            err_sum += err;
            sq_sum += err * err;
            truth_sum += truths[r](q);
        }
        row.truth = truth_sum / reps;
        row.mean_estimate = mean_of(points);
        row.bias = err_sum / reps;
        row.relative_bias = std::abs(row.truth) < 1e-8 ? row.bias : row.bias / row.truth;
        double ss = 0.0;
        for (double x : points) ss += (x - row.mean_estimate) * (x - row.mean_estimate);
        row.emp_se = std::sqrt(ss / (reps - 1.0));
        row.mse = sq_sum / reps;
        double covered = 0.0;
        double covered_bc = 0.0;
        for (std::size_t r = 0; r < estimates.size(); ++r) {
            const double t = truths[r](q);
            const double lo = estimates[r].cri_low(q);
            const double hi = estimates[r].cri_high(q);
            if (lo <= t && t <= hi) covered += 1.0;
            if (lo - row.bias <= t && t <= hi - row.bias) covered_bc += 1.0;
        }
        row.coverage = covered / reps;
        row.bias_corrected_coverage = covered_bc / reps;
        report.rows.push_back(row);
    }
    return report;
}

McReport mc_metrics(const std::vector<EstimateSummary>& estimates, const Vector& truth) {
    return mc_metrics(estimates, std::vector<Vector>(estimates.size(), truth));
}

AgreementScores agreement_from_confusion(const Eigen::MatrixXd& confusion, F1Average average) {
    const Eigen::Index m = confusion.rows();
    const double total = confusion.sum();
    AgreementScores out;
    if (total <= 0.0) return out;
    const Vector truth_totals = confusion.rowwise().sum();
    const Vector pred_totals = confusion.colwise().sum().transpose();
    double recall_sum = 0.0;
    double recall_classes = 0.0;
    double f1_sum = 0.0;
    double f1_classes = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        const double tp = confusion(i, i);
        if (truth_totals(i) > 0.0) {
            recall_sum += tp / truth_totals(i);
            recall_classes += 1.0;
        }
        if (truth_totals(i) > 0.0 || pred_totals(i) > 0.0) {
            f1_sum += 2.0 * tp / (truth_totals(i) + pred_totals(i));
            f1_classes += 1.0;
        }
    }
    out.balanced_accuracy = recall_classes > 0 ? recall_sum / recall_classes : 0.0;
    const double observed = confusion.trace() / total;
    // Micro-averaged F1 over single-label classes equals accuracy.
    out.f1 = average == F1Average::macro ? (f1_classes > 0 ? f1_sum / f1_classes : 0.0) : observed;
    const double expected = truth_totals.dot(pred_totals) / (total * total);
    out.kappa = expected >= 1.0 ? (observed >= 1.0 ? 1.0 : 0.0) : (observed - expected) / (1.0 - expected);
    return out;
}

DecodingMetrics decoding_metrics(const std::vector<StatePath>& true_paths, const std::vector<StatePath>& decoded_paths,
                                 int m_states, F1Average average) {
    if (true_paths.size() != decoded_paths.size()) throw DataError("true and decoded path counts differ");
    DecodingMetrics out;
    out.confusion = Eigen::MatrixXd::Zero(m_states, m_states);
    for (std::size_t n = 0; n < true_paths.size(); ++n) {
        if (true_paths[n].size() != decoded_paths[n].size()) {
            throw DataError("path lengths differ for individual " + std::to_string(n + 1));
        }
        Eigen::MatrixXd local = Eigen::MatrixXd::Zero(m_states, m_states);
        for (std::size_t t = 0; t < true_paths[n].size(); ++t) {
            const int a = true_paths[n][t];
            const int b = decoded_paths[n][t];
            if (a < 0 || a >= m_states || b < 0 || b >= m_states) {
                throw DataError("state label outside 1.." + std::to_string(m_states) + " for individual " +
                                std::to_string(n + 1) + " at occasion " + std::to_string(t + 1));
            }
            local(a, b) += 1.0;
        }
        out.per_individual.push_back(agreement_from_confusion(local, average));
        out.confusion += local;
    }
    out.pooled = agreement_from_confusion(out.confusion, average);
    return out;
}

Matrix adhoc_tpm_variance(const std::vector<IndividualParams>& individual_params) {
    if (individual_params.size() < 2) throw ConfigError("ad hoc variance needs at least 2 individuals");
    const int m = individual_params.front().alpha.states();
    Matrix sum = Matrix::Zero(m, m);
    Matrix sq = Matrix::Zero(m, m);
    std::vector<Matrix> tpms;
    for (const auto& p : individual_params) {
        tpms.push_back(p.alpha.to_matrix().probs);
        sum += tpms.back();
    }
    const auto n = static_cast<double>(tpms.size());
    const Matrix mean = sum / n;
    for (const auto& a : tpms) sq += (a - mean).cwiseAbs2();
    return sq / (n - 1.0);
}

std::array<double, 4> series_statistics(const ObservationSet& obs, int series) {
    double sum = 0.0;
    double sq = 0.0;
    double mx = 0.0;
    double zeros = 0.0;
    double count = 0.0;
    for (const auto& c : obs.counts) {
        for (Eigen::Index t = 0; t < c.cols(); ++t) {
            const auto x = static_cast<double>(c(series, t));
            sum += x;
            sq += x * x;
            mx = count == 0.0 ? x : std::max(mx, x);
            zeros += x == 0.0 ? 1.0 : 0.0;
            count += 1.0;
        }
    }
    const double mean = sum / count;
    const double var = count > 1.0 ? (sq - count * mean * mean) / (count - 1.0) : 0.0;
    return {mean, std::sqrt(std::max(var, 0.0)), mx, zeros / count};
}

namespace {

Matrix individual_means(const ObservationSet& obs) {
    Matrix out(obs.k_series, static_cast<Eigen::Index>(obs.n_individuals()));
    for (std::size_t n = 0; n < obs.n_individuals(); ++n) {
        out.col(static_cast<Eigen::Index>(n)) = obs.counts[n].cast<double>().rowwise().mean();
    }
    return out;
}

}  // namespace

PpcReport posterior_predictive(const ChainStore& chain, const ObservationSet& obs, std::size_t r_rep, Rng& rng,
                               std::size_t burn_in) {
    if (r_rep < 1) throw ConfigError("posterior predictive check needs at least 1 replicate");
    if (burn_in >= chain.iterations()) throw ConfigError("burn-in leaves no post-burn-in draws");
    if (chain.n_individuals() != obs.n_individuals() || chain.k_series != obs.k_series) {
        throw ConfigError("chain and observations differ in shape");
    }
    const int k = obs.k_series;
    PpcReport out;
    out.r_rep = r_rep;
    for (int s = 0; s < k; ++s) out.observed.push_back(series_statistics(obs, s));
    out.observed_individual_means = individual_means(obs);
    out.tail_probability.assign(static_cast<std::size_t>(k), std::array<double, 4>{});
    const std::uint64_t base = rng.engine()();
    const std::size_t kept = chain.iterations() - burn_in;
    const auto lengths = obs.lengths();
    for (std::size_t rep = 0; rep < r_rep; ++rep) {
        Rng rep_rng(base, {rep});
        const std::size_t iter = burn_in + rep_rng.index(kept);
        ObservationSet synthetic;
        synthetic.k_series = k;
        for (std::size_t n = 0; n < obs.n_individuals(); ++n) {
            const IndividualParams& p = chain.individual[iter][n];
            const StatePath path = sample_hidden_path(p.alpha.to_matrix(), chain.pi, lengths[n], rep_rng);
            synthetic.counts.push_back(sample_counts(path, p.b, rep_rng));
        }
        std::vector<std::array<double, 4>> stats;
        for (int s = 0; s < k; ++s) {
            stats.push_back(series_statistics(synthetic, s));
            for (std::size_t q = 0; q < 4; ++q) {
                if (stats.back()[q] >= out.observed[static_cast<std::size_t>(s)][q]) {
                    out.tail_probability[static_cast<std::size_t>(s)][q] += 1.0;
                }
            }
        }
        out.replicates.push_back(std::move(stats));
        out.replicate_individual_means.push_back(individual_means(synthetic));
    }
    for (auto& row : out.tail_probability) {
        for (double& v : row) v /= static_cast<double>(r_rep);
    }
    return out;
}

}  // namespace mhmm
