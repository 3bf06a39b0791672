#include "mhmm/mcmc.hpp"

#include "mhmm/conjugate.hpp"
#include "mhmm/error.hpp"
#include "mhmm/forward.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace mhmm {

const char* to_string(Pooling p) noexcept { return p == Pooling::multilevel ? "multilevel" : "complete"; }

Pooling pooling_from_string(const std::string& s) {
    if (s == "multilevel" || s == "partial") return Pooling::multilevel;
    if (s == "complete") return Pooling::complete;
    throw ConfigError("unknown pooling '" + s + "' (expected multilevel or complete)");
}

void McmcConfig::validate() const {
    if (n_iter == 0) throw ConfigError("n_iter must be positive");
    if (burn_in >= n_iter) throw ConfigError("burn_in must be smaller than n_iter");
    if (n_chains == 0) throw ConfigError("n_chains must be positive");
    if (!(adapt_target_uni > 0.0 && adapt_target_uni < 1.0) || !(adapt_target_multi > 0.0 && adapt_target_multi < 1.0)) {
        throw ConfigError("adaptation targets must lie in (0, 1)");
    }
    if (!(proposal_ridge >= 0.0)) throw ConfigError("proposal ridge must be non-negative");
}

double inverse_wishart_log_density(const Matrix& x, const Matrix& scale, double df) {
    const auto p = static_cast<double>(x.rows());
    const Eigen::LLT<Matrix> x_llt(x);
    const Eigen::LLT<Matrix> s_llt(scale);
    if (x_llt.info() != Eigen::Success || s_llt.info() != Eigen::Success) {
        return -std::numeric_limits<double>::infinity();
    }
    double log_det_x = 0.0;
    double log_det_s = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        log_det_x += 2.0 * std::log(x_llt.matrixLLT()(i, i));
        log_det_s += 2.0 * std::log(s_llt.matrixLLT()(i, i));
    }
    double log_multi_gamma = 0.25 * p * (p - 1.0) * std::log(std::numbers::pi);
    for (int j = 1; j <= static_cast<int>(p); ++j) log_multi_gamma += boost::math::lgamma(0.5 * df + 0.5 * (1 - j));
    const double trace = (scale * x_llt.solve(Matrix::Identity(x.rows(), x.cols()))).trace();
    return 0.5 * df * log_det_s - 0.5 * df * p * std::log(2.0) - log_multi_gamma - 0.5 * (df + p + 1.0) * log_det_x -
           0.5 * trace;
}

double inverse_gamma_log_density(double x, double shape, double scale) {
    if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
    return shape * std::log(scale) - boost::math::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

namespace {

struct IndividualData {
    Matrix counts_t;  // T x K
    Vector log_fact;  // T
};

Matrix log_emissions(const IndividualData& d, const Matrix& log_means) {
    Matrix out = d.counts_t * log_means;
    const Eigen::RowVectorXd mean_sums = log_means.array().exp().colwise().sum();
    out.rowwise() -= mean_sums;
    out.colwise() -= d.log_fact;
    return out;
}

bool finite(const GroupParams& g) {
    if (!g.alpha_bar.allFinite() || !g.b_bar.allFinite() || !g.tau.allFinite()) return false;
    return std::all_of(g.psi.begin(), g.psi.end(), [](const Matrix& m) { return m.allFinite(); });
}

double prior_log_density(const GroupParams& g, const std::vector<IndividualParams>& ind, const HyperPriors& h,
                         Pooling pooling) {
    const int m = g.states();
    const int k = g.series();
    double lp = 0.0;
    if (pooling == Pooling::complete) {
        const Eigen::LLT<Matrix> prior(h.psi0);
        for (int i = 0; i < m; ++i) {
            lp += mvnormal_log_density(g.alpha_bar.row(i).transpose(), h.m0.row(i).transpose(), prior);
        }
        for (int s = 0; s < k; ++s) {
            for (int i = 0; i < m; ++i) lp += normal_log_density(g.b_bar(s, i), h.l0(s, i), h.tau0(s, i));
        }
        return lp;
    }
    for (int i = 0; i < m; ++i) {
        const Matrix& psi = g.psi[static_cast<std::size_t>(i)];
        const Eigen::LLT<Matrix> llt(psi);
        const Eigen::LLT<Matrix> llt_mean(psi / h.k0);
        const Vector mean = g.alpha_bar.row(i).transpose();
        lp += mvnormal_log_density(mean, h.m0.row(i).transpose(), llt_mean);
        lp += inverse_wishart_log_density(psi, h.psi0, h.df0);
        for (const auto& p : ind) lp += mvnormal_log_density(p.alpha.intercepts.row(i).transpose(), mean, llt);
    }
    for (int s = 0; s < k; ++s) {
        for (int i = 0; i < m; ++i) {
            lp += normal_log_density(g.b_bar(s, i), h.l0(s, i), h.tau0(s, i));
            lp += inverse_gamma_log_density(g.tau(s, i), h.c(s, i), h.d(s, i));
            for (const auto& p : ind) lp += normal_log_density(p.b.log_means(s, i), g.b_bar(s, i), g.tau(s, i));
        }
    }
    return lp;
}

Matrix logit_permutation_map(const StatePermutation& perm) {
    const auto m = static_cast<Eigen::Index>(perm.size());
    // Full logits (0, alpha) re-referenced to the new first state.
    Matrix r = Matrix::Zero(m - 1, m);
    for (Eigen::Index b = 1; b < m; ++b) {
        r(b - 1, perm[static_cast<std::size_t>(b)]) += 1.0;
        r(b - 1, perm[0]) -= 1.0;
    }
    return r.rightCols(m - 1);
}

bool is_identity(const StatePermutation& perm) {
    for (std::size_t i = 0; i < perm.size(); ++i) {
        if (perm[i] != static_cast<int>(i)) return false;
    }
    return true;
}

std::string iteration_label(std::size_t chain, std::size_t r) {
    return "chain " + std::to_string(chain + 1) + ", iteration " + std::to_string(r + 1);
}

}  // namespace

namespace {

/// Lloyd iterations from the given centers; returns labels and the
/// within-cluster sum of squares.
std::pair<std::vector<int>, double> lloyd(const std::vector<Vector>& points, std::vector<Vector>& centers) {
    const auto m = static_cast<int>(centers.size());
    const Eigen::Index k = points.front().size();
    std::vector<int> assign(points.size(), 0);
    double ss = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        ss = 0.0;
        for (std::size_t p = 0; p < points.size(); ++p) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int i = 0; i < m; ++i) {
                const double dist = (points[p] - centers[static_cast<std::size_t>(i)]).squaredNorm();
                if (dist < best_d) {
                    best_d = dist;
                    best = i;
                }
            }
            changed = changed || assign[p] != best;
            assign[p] = best;
            ss += best_d;
        }
        std::vector<Vector> sums(static_cast<std::size_t>(m), Vector::Zero(k));
        std::vector<std::size_t> sizes(static_cast<std::size_t>(m), 0);
        for (std::size_t p = 0; p < points.size(); ++p) {
            sums[static_cast<std::size_t>(assign[p])] += points[p];
            ++sizes[static_cast<std::size_t>(assign[p])];
        }
        for (int i = 0; i < m; ++i) {
            if (sizes[static_cast<std::size_t>(i)] > 0) {
                centers[static_cast<std::size_t>(i)] = sums[static_cast<std::size_t>(i)] / static_cast<double>(sizes[static_cast<std::size_t>(i)]);
            }
        }
        if (!changed && iter > 0) break;
    }
    return {assign, ss};
}

}  // namespace

GroupParams default_start(const ObservationSet& obs, int m_states) {
    obs.validate();
    const int k = obs.k_series;
    const int m = m_states;
    std::vector<Vector> points;
    for (const auto& c : obs.counts) {
        for (Eigen::Index t = 0; t < c.cols(); ++t) {
            points.emplace_back(c.col(t).cast<double>().array().sqrt().matrix());
        }
    }
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return points[a](0) < points[b](0); });
    // Two deterministic seedings: sample quantiles of series 1, and points
    // evenly spaced along its range. The lower within-cluster SS wins.
    std::vector<std::vector<Vector>> seeds(2, std::vector<Vector>(static_cast<std::size_t>(m)));
    const double lo = points[order.front()](0);
    const double hi = points[order.back()](0);
    for (int i = 0; i < m; ++i) {
        const double frac = (i + 0.5) / m;
        const auto pos = static_cast<std::size_t>(frac * static_cast<double>(points.size()));
        seeds[0][static_cast<std::size_t>(i)] = points[order[std::min(pos, points.size() - 1)]];
        const double target = lo + frac * (hi - lo);
        const auto it = std::lower_bound(order.begin(), order.end(), target,
                                         [&](std::size_t a, double v) { return points[a](0) < v; });
        seeds[1][static_cast<std::size_t>(i)] = points[it == order.end() ? order.back() : *it];
    }
    std::vector<int> assign;
    double best_ss = std::numeric_limits<double>::infinity();
    for (auto& centers : seeds) {
        const auto [labels, ss] = lloyd(points, centers);
        if (ss < best_ss) {
            best_ss = ss;
            assign = labels;
        }
    }
    // Cluster means in count space, floored away from zero.
    Matrix means = Matrix::Zero(k, m);
    std::vector<double> sizes(static_cast<std::size_t>(m), 0.0);
    for (std::size_t p = 0; p < points.size(); ++p) {
        means.col(assign[p]) += points[p].array().square().matrix();
        sizes[static_cast<std::size_t>(assign[p])] += 1.0;
    }
    for (int i = 0; i < m; ++i) {
        if (sizes[static_cast<std::size_t>(i)] > 0) {
            means.col(i) /= sizes[static_cast<std::size_t>(i)];
        } else {
            means.col(i).setConstant(0.1);
        }
    }
    means = means.cwiseMax(0.1);
    std::vector<int> state_order(static_cast<std::size_t>(m));
    std::iota(state_order.begin(), state_order.end(), 0);
    std::stable_sort(state_order.begin(), state_order.end(), [&](int a, int b) { return means(0, a) < means(0, b); });

    GroupParams g;
    g.b_bar = Matrix(k, m);
    for (int i = 0; i < m; ++i) g.b_bar.col(i) = means.col(state_order[static_cast<std::size_t>(i)]).array().log().matrix();
    Matrix tpm = Matrix::Constant(m, m, 0.3 / (m - 1));
    tpm.diagonal().setConstant(0.7);
    g.alpha_bar = TransitionLogits::from_matrix(TransitionMatrix{tpm}).intercepts;
    g.psi.assign(static_cast<std::size_t>(m), Matrix(0.5 * Matrix::Identity(m - 1, m - 1)));
    g.tau = Matrix::Constant(k, m, 0.1);
    return g;
}

ChainStore run_chain(const ObservationSet& obs, int m_states, const McmcConfig& cfg, std::size_t chain_index) {
    cfg.validate();
    obs.validate();
    const int m = m_states;
    const int k = obs.k_series;
    const std::size_t n_ind = obs.n_individuals();
    ModelSpec{m, k, obs.lengths()}.validate();

    const HyperPriors hyper = cfg.hyper ? *cfg.hyper : HyperPriors::defaults(m, obs.pooled_series_means());
    hyper.validate(m, k);
    const InitialDistribution pi = cfg.pi ? *cfg.pi : InitialDistribution::uniform(m);
    if (pi.pi.size() != m) throw ConfigError("initial distribution must have M entries");
    pi.validate(1e-9);

    GroupParams group = cfg.start ? *cfg.start : default_start(obs, m);
    if (group.alpha_bar.rows() != m || group.alpha_bar.cols() != m - 1 || group.b_bar.rows() != k ||
        group.b_bar.cols() != m) {
        throw ConfigError("starting values do not match M and K");
    }
    if (group.psi.size() != static_cast<std::size_t>(m)) {
        group.psi.assign(static_cast<std::size_t>(m), Matrix(0.5 * Matrix::Identity(m - 1, m - 1)));
    }
    if (group.tau.rows() != k || group.tau.cols() != m) group.tau = Matrix::Constant(k, m, 0.1);
    if (chain_index > 0) {
        Rng start_rng(cfg.seed, {chain_index, 2});
        for (Eigen::Index i = 0; i < group.alpha_bar.size(); ++i) group.alpha_bar(i) += start_rng.normal(0.0, 0.5);
        for (Eigen::Index i = 0; i < group.b_bar.size(); ++i) group.b_bar(i) += start_rng.normal(0.0, 0.2);
    }
    const bool multilevel = cfg.pooling == Pooling::multilevel;
    if (!multilevel) {
        group.psi.clear();
        group.tau.resize(0, 0);
    }

    std::vector<IndividualData> data(n_ind);
    for (std::size_t n = 0; n < n_ind; ++n) {
        data[n].counts_t = obs.counts[n].cast<double>().transpose();
        data[n].log_fact = log_factorial_sums(obs.counts[n]);
    }
    std::vector<IndividualParams> ind(n_ind, IndividualParams{TransitionLogits{group.alpha_bar}, EmissionParams{group.b_bar}});

    Rng group_rng(cfg.seed, {chain_index, 0});
    std::vector<Rng> ind_rng;
    ind_rng.reserve(n_ind);
    for (std::size_t n = 0; n < n_ind; ++n) ind_rng.emplace_back(cfg.seed, std::initializer_list<std::uint64_t>{chain_index, 1, n});

    const std::size_t tuner_sets = multilevel ? n_ind : 1;
    std::vector<std::vector<ScaleTuner>> alpha_tuners(tuner_sets, std::vector<ScaleTuner>(static_cast<std::size_t>(m)));
    std::vector<std::vector<ScaleTuner>> b_tuners(tuner_sets, std::vector<ScaleTuner>(static_cast<std::size_t>(k * m)));
    const Eigen::Index dim = m - 1;
    const double alpha_target = dim == 1 ? cfg.adapt_target_uni : cfg.adapt_target_multi;
    for (auto& set : alpha_tuners) {
        for (auto& t : set) t.reset(2.38 / std::sqrt(static_cast<double>(dim)), alpha_target);
    }

    ChainStore chain;
    chain.m_states = m;
    chain.k_series = k;
    chain.pooling = cfg.pooling;
    chain.burn_in = cfg.burn_in;
    chain.seed = cfg.seed;
    chain.chain_index = chain_index;
    chain.pi = pi;
    chain.hyper = hyper;
    chain.group.reserve(cfg.n_iter);
    chain.individual.reserve(cfg.n_iter);
    chain.log_likelihood.reserve(cfg.n_iter);
    chain.log_posterior.reserve(cfg.n_iter);

    std::vector<Eigen::MatrixXi> trans(n_ind);
    std::vector<Matrix> q_sum(n_ind, Matrix::Zero(k, m));
    std::vector<Vector> t_occ(n_ind, Vector::Zero(m));

    auto filter_all = [&](std::size_t r, bool sample) {
        double total = 0.0;
        const bool keep_paths = sample && cfg.path_thin > 0 && r % cfg.path_thin == 0;
        std::vector<StatePath> kept;
        if (keep_paths) kept.reserve(n_ind);
        for (std::size_t n = 0; n < n_ind; ++n) {
            const TransitionMatrix tpm = ind[n].alpha.to_matrix();
            ForwardTable fwd;
            try {
                fwd = forward_filter_log(log_emissions(data[n], ind[n].b.log_means), tpm, pi);
            } catch (const FilteringDegeneracy& e) {
                throw SamplerAbort("forward filter degenerate for individual " + std::to_string(n + 1) +
                                   " at occasion " + std::to_string(e.time_index() + 1) + " (" +
                                   iteration_label(chain_index, r) + ")");
            }
            total += fwd.log_likelihood;
            if (!sample) continue;
            StatePath path = backward_sample(fwd, tpm, ind_rng[n]);
            trans[n] = transition_counts(path, m);
            q_sum[n].setZero();
            t_occ[n].setZero();
            for (std::size_t t = 0; t < path.size(); ++t) {
                const int s = path[t];
                t_occ[n](s) += 1.0;
                q_sum[n].col(s) += data[n].counts_t.row(static_cast<Eigen::Index>(t)).transpose();
            }
            if (keep_paths) kept.push_back(std::move(path));
        }
        if (keep_paths) {
            chain.path_iterations.push_back(r);
            chain.paths.push_back(std::move(kept));
        }
        return total;
    };

    for (std::size_t r = 0; r < cfg.n_iter; ++r) {
        if (r == cfg.burn_in) {
            for (auto& set : alpha_tuners) {
                for (auto& t : set) t.freeze();
            }
            for (auto& set : b_tuners) {
                for (auto& t : set) t.freeze();
            }
        }
        const double loglik = filter_all(r, true);
        if (r > 0) {
            chain.log_likelihood[r - 1] = loglik;
            chain.log_posterior[r - 1] += loglik;
        }

        if (multilevel) {
            std::vector<TransitionLogits> alphas(n_ind);
            std::vector<Matrix> log_bs(n_ind);
            for (std::size_t n = 0; n < n_ind; ++n) {
                alphas[n] = ind[n].alpha;
                log_bs[n] = ind[n].b.log_means;
            }
            try {
                TransitionGroupDraw td = gibbs_update_transition_group(alphas, hyper, group_rng);
                EmissionGroupDraw ed = gibbs_update_emission_group(log_bs, group.b_bar, hyper, group_rng);
                group = GroupParams{std::move(td.alpha_bar), std::move(td.psi), std::move(ed.b_bar), std::move(ed.tau)};
            } catch (const CovarianceError& e) {
                throw SamplerAbort(std::string(e.what()) + " (" + iteration_label(chain_index, r) + ")");
            }
            std::vector<Eigen::LLT<Matrix>> prior_llt;
            std::vector<Matrix> prop_chol;
            for (int i = 0; i < m; ++i) {
                const Matrix& psi = group.psi[static_cast<std::size_t>(i)];
                prior_llt.emplace_back(psi);
                const Eigen::LLT<Matrix> prop(psi + cfg.proposal_ridge * Matrix::Identity(dim, dim));
                if (prior_llt.back().info() != Eigen::Success || prop.info() != Eigen::Success) {
                    throw SamplerAbort("non-SPD group covariance (" + iteration_label(chain_index, r) + ")");
                }
                prop_chol.emplace_back(prop.matrixL());
            }
            for (std::size_t n = 0; n < n_ind; ++n) {
                for (int i = 0; i < m; ++i) {
                    ind[n].alpha.intercepts.row(i) =
                        metropolis_update_alpha_row(trans[n].row(i).transpose(), ind[n].alpha.intercepts.row(i).transpose(),
                                                    group.alpha_bar.row(i).transpose(), prior_llt[static_cast<std::size_t>(i)],
                                                    prop_chol[static_cast<std::size_t>(i)],
                                                    alpha_tuners[n][static_cast<std::size_t>(i)], ind_rng[n])
                            .transpose();
                    for (int s = 0; s < k; ++s) {
                        double& u = ind[n].b.log_means(s, i);
                        u = metropolis_update_b_nki(q_sum[n](s, i), t_occ[n](i), u, group.b_bar(s, i), group.tau(s, i),
                                                    b_tuners[n][static_cast<std::size_t>(s * m + i)], ind_rng[n],
                                                    cfg.adapt_target_uni);
                    }
                }
            }
        } else {
            Eigen::MatrixXi pooled_trans = Eigen::MatrixXi::Zero(m, m);
            Matrix pooled_q = Matrix::Zero(k, m);
            Vector pooled_occ = Vector::Zero(m);
            for (std::size_t n = 0; n < n_ind; ++n) {
                pooled_trans += trans[n];
                pooled_q += q_sum[n];
                pooled_occ += t_occ[n];
            }
            const Eigen::LLT<Matrix> prior_llt(hyper.psi0);
            const Eigen::LLT<Matrix> prop(hyper.psi0 + cfg.proposal_ridge * Matrix::Identity(dim, dim));
            const Matrix prop_chol = prop.matrixL();
            for (int i = 0; i < m; ++i) {
                group.alpha_bar.row(i) =
                    metropolis_update_alpha_row(pooled_trans.row(i).transpose(), group.alpha_bar.row(i).transpose(),
                                                hyper.m0.row(i).transpose(), prior_llt, prop_chol,
                                                alpha_tuners[0][static_cast<std::size_t>(i)], group_rng)
                        .transpose();
                for (int s = 0; s < k; ++s) {
                    double& u = group.b_bar(s, i);
                    u = metropolis_update_b_nki(pooled_q(s, i), pooled_occ(i), u, hyper.l0(s, i), hyper.tau0(s, i),
                                                b_tuners[0][static_cast<std::size_t>(s * m + i)], group_rng,
                                                cfg.adapt_target_uni);
                }
            }
            for (auto& p : ind) {
                p.alpha.intercepts = group.alpha_bar;
                p.b.log_means = group.b_bar;
            }
        }

        bool ok = finite(group);
        for (const auto& p : ind) ok = ok && p.alpha.intercepts.allFinite() && p.b.log_means.allFinite();
        if (!ok) throw SamplerAbort("non-finite parameter value (" + iteration_label(chain_index, r) + ")");

        chain.group.push_back(group);
        chain.individual.push_back(ind);
        chain.log_likelihood.push_back(std::numeric_limits<double>::quiet_NaN());
        chain.log_posterior.push_back(prior_log_density(group, ind, hyper, cfg.pooling));
    }
    const double last = filter_all(cfg.n_iter, false);
    chain.log_likelihood.back() = last;
    chain.log_posterior.back() += last;

    auto summarize = [&](const std::string& name, auto&& pick) {
        AcceptanceRecord rec{name, 0, 0.0, 0.0};
        double burn_acc = 0.0;
        double burn_n = 0.0;
        double samp_acc = 0.0;
        double samp_n = 0.0;
        for (std::size_t set = 0; set < tuner_sets; ++set) {
            const ScaleTuner& t = pick(set);
            rec.proposals += t.proposals();
            const double frozen = static_cast<double>(cfg.n_iter - cfg.burn_in);
            const double burn = static_cast<double>(t.proposals()) - frozen;
            burn_acc += t.burn_in_acceptance_rate() * burn;
            burn_n += burn;
            samp_acc += t.acceptance_rate() * frozen;
            samp_n += frozen;
        }
        rec.burn_in_rate = burn_n > 0 ? burn_acc / burn_n : 0.0;
        rec.sampling_rate = samp_n > 0 ? samp_acc / samp_n : 0.0;
        chain.acceptance.push_back(rec);
    };
    for (int i = 0; i < m; ++i) {
        summarize("alpha[" + std::to_string(i + 1) + "]",
                  [&](std::size_t set) -> const ScaleTuner& { return alpha_tuners[set][static_cast<std::size_t>(i)]; });
    }
    for (int s = 0; s < k; ++s) {
        for (int i = 0; i < m; ++i) {
            summarize("log_b[" + std::to_string(s + 1) + "," + std::to_string(i + 1) + "]",
                      [&](std::size_t set) -> const ScaleTuner& {
                          return b_tuners[set][static_cast<std::size_t>(s * m + i)];
                      });
        }
    }

    if (cfg.relabel) relabel_chain(chain);
    return chain;
}

std::vector<ChainStore> run_mcmc(const ObservationSet& obs, int m_states, const McmcConfig& cfg) {
    cfg.validate();
    std::vector<ChainStore> chains;
    chains.reserve(cfg.n_chains);
    for (std::size_t c = 0; c < cfg.n_chains; ++c) chains.push_back(run_chain(obs, m_states, cfg, c));
    return chains;
}

void permute_states(GroupParams& g, const StatePermutation& perm) {
    const auto m = static_cast<int>(perm.size());
    if (g.alpha_bar.rows() != m) throw ConfigError("permutation size does not match the number of states");
    const Matrix map = logit_permutation_map(perm);
    Matrix alpha(m, m - 1);
    for (int a = 0; a < m; ++a) alpha.row(a) = (map * g.alpha_bar.row(perm[static_cast<std::size_t>(a)]).transpose()).transpose();
    g.alpha_bar = std::move(alpha);
    if (!g.psi.empty()) {
        std::vector<Matrix> psi(static_cast<std::size_t>(m));
        for (int a = 0; a < m; ++a) psi[static_cast<std::size_t>(a)] = map * g.psi[static_cast<std::size_t>(perm[static_cast<std::size_t>(a)])] * map.transpose();
        g.psi = std::move(psi);
    }
    Matrix b(g.b_bar.rows(), m);
    for (int a = 0; a < m; ++a) b.col(a) = g.b_bar.col(perm[static_cast<std::size_t>(a)]);
    g.b_bar = std::move(b);
    if (g.tau.size() > 0) {
        Matrix tau(g.tau.rows(), m);
        for (int a = 0; a < m; ++a) tau.col(a) = g.tau.col(perm[static_cast<std::size_t>(a)]);
        g.tau = std::move(tau);
    }
}

void permute_states(IndividualParams& p, const StatePermutation& perm) {
    const auto m = static_cast<int>(perm.size());
    const Matrix map = logit_permutation_map(perm);
    Matrix alpha(m, m - 1);
    for (int a = 0; a < m; ++a) {
        alpha.row(a) = (map * p.alpha.intercepts.row(perm[static_cast<std::size_t>(a)]).transpose()).transpose();
    }
    p.alpha.intercepts = std::move(alpha);
    Matrix b(p.b.log_means.rows(), m);
    for (int a = 0; a < m; ++a) b.col(a) = p.b.log_means.col(perm[static_cast<std::size_t>(a)]);
    p.b.log_means = std::move(b);
}

void permute_states(StatePath& path, const StatePermutation& perm) {
    std::vector<int> inverse(perm.size());
    for (std::size_t a = 0; a < perm.size(); ++a) inverse[static_cast<std::size_t>(perm[a])] = static_cast<int>(a);
    for (int& s : path) s = inverse[static_cast<std::size_t>(s)];
}

void permute_states(ChainStore& chain, const StatePermutation& perm) {
    if (is_identity(perm)) return;
    for (auto& g : chain.group) permute_states(g, perm);
    for (auto& row : chain.individual) {
        for (auto& p : row) permute_states(p, perm);
    }
    for (auto& row : chain.paths) {
        for (auto& path : row) permute_states(path, perm);
    }
}

StatePermutation greedy_match(const Matrix& reference_log_means, const Matrix& candidate_log_means) {
    const auto m = static_cast<int>(reference_log_means.cols());
    Matrix cost(m, m);
    for (int a = 0; a < m; ++a) {
        for (int b = 0; b < m; ++b) cost(a, b) = (reference_log_means.col(a) - candidate_log_means.col(b)).squaredNorm();
    }
    StatePermutation perm(static_cast<std::size_t>(m), -1);
    std::vector<bool> used(static_cast<std::size_t>(m), false);
    for (int step = 0; step < m; ++step) {
        int best_a = -1;
        int best_b = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int a = 0; a < m; ++a) {
            if (perm[static_cast<std::size_t>(a)] >= 0) continue;
            for (int b = 0; b < m; ++b) {
                if (used[static_cast<std::size_t>(b)]) continue;
                if (cost(a, b) < best || best_a < 0) {
                    best = cost(a, b);
                    best_a = a;
                    best_b = b;
                }
            }
        }
        perm[static_cast<std::size_t>(best_a)] = best_b;
        used[static_cast<std::size_t>(best_b)] = true;
    }
    return perm;
}

std::size_t relabel_chain(ChainStore& chain) {
    if (chain.group.empty()) return 0;
    const Matrix reference = chain.group.front().b_bar;
    std::size_t changed = 0;
    std::size_t path_slot = 0;
    for (std::size_t r = 0; r < chain.group.size(); ++r) {
        const StatePermutation perm = greedy_match(reference, chain.group[r].b_bar);
        while (path_slot < chain.path_iterations.size() && chain.path_iterations[path_slot] < r) ++path_slot;
        if (is_identity(perm)) continue;
        ++changed;
        permute_states(chain.group[r], perm);
        for (auto& p : chain.individual[r]) permute_states(p, perm);
        if (path_slot < chain.path_iterations.size() && chain.path_iterations[path_slot] == r) {
            for (auto& path : chain.paths[path_slot]) permute_states(path, perm);
        }
    }
    return changed;
}

}  // namespace mhmm
