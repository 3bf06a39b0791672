#include "mhmm/conjugate.hpp"

#include "mhmm/error.hpp"

#include <cmath>

namespace mhmm {

NiwParams transition_group_posterior(std::span<const Vector> rows, const Vector& m0, double k0,
                                     const Matrix& psi0, double df0) {
    const auto n = static_cast<double>(rows.size());
    if (rows.empty()) return {m0, k0, psi0, df0};
    const Eigen::Index p = m0.size();
    Vector mean = Vector::Zero(p);
    for (const auto& r : rows) mean += r;
    mean /= n;
    Matrix scatter = Matrix::Zero(p, p);
    for (const auto& r : rows) {
        const Vector c = r - mean;
        scatter.noalias() += c * c.transpose();
    }
    const Vector shift = mean - m0;
    NiwParams post;
    post.kappa = k0 + n;
    post.location = (k0 * m0 + n * mean) / post.kappa;
    post.scale = psi0 + scatter + (k0 * n / post.kappa) * (shift * shift.transpose());
    post.scale = 0.5 * (post.scale + post.scale.transpose());
    post.df = df0 + n;
    return post;
}

NiwDraw draw_niw(const NiwParams& params, Rng& rng) {
    NiwDraw out;
    out.cov = rng.inverse_wishart(params.scale, params.df);
    const Eigen::LLT<Matrix> llt(out.cov / params.kappa);
    if (llt.info() != Eigen::Success) throw CovarianceError("drawn covariance is not SPD");
    out.mean = rng.mvnormal(params.location, llt.matrixL());
    return out;
}

TransitionGroupDraw gibbs_update_transition_group(const std::vector<TransitionLogits>& alpha_all,
                                                  const HyperPriors& hyper, Rng& rng) {
    const int m = hyper.m0.rows();
    TransitionGroupDraw out{Matrix(m, m - 1), std::vector<Matrix>(static_cast<std::size_t>(m))};
    std::vector<Vector> rows(alpha_all.size());
    for (int i = 0; i < m; ++i) {
        for (std::size_t n = 0; n < alpha_all.size(); ++n) rows[n] = alpha_all[n].intercepts.row(i).transpose();
        const NiwParams post =
            transition_group_posterior(rows, hyper.m0.row(i).transpose(), hyper.k0, hyper.psi0, hyper.df0);
        NiwDraw draw = draw_niw(post, rng);
        out.alpha_bar.row(i) = draw.mean.transpose();
        out.psi[static_cast<std::size_t>(i)] = std::move(draw.cov);
    }
    return out;
}

InverseGammaParams emission_variance_posterior(std::span<const double> log_b, double b_bar, double c, double d) {
    double ss = 0.0;
    for (double x : log_b) ss += (x - b_bar) * (x - b_bar);
    return {c + 0.5 * static_cast<double>(log_b.size()), d + 0.5 * ss};
}

NormalParams emission_mean_posterior(std::span<const double> log_b, double tau, double l0, double tau0) {
    double sum = 0.0;
    for (double x : log_b) sum += x;
    const double precision = 1.0 / tau0 + static_cast<double>(log_b.size()) / tau;
    return {(l0 / tau0 + sum / tau) / precision, 1.0 / precision};
}

EmissionGroupDraw gibbs_update_emission_group(const std::vector<Matrix>& log_b_all, const Matrix& b_bar_current,
                                              const HyperPriors& hyper, Rng& rng) {
    const auto k = b_bar_current.rows();
    const auto m = b_bar_current.cols();
    EmissionGroupDraw out{Matrix(k, m), Matrix(k, m)};
    std::vector<double> values(log_b_all.size());
    for (Eigen::Index s = 0; s < k; ++s) {
        for (Eigen::Index i = 0; i < m; ++i) {
            for (std::size_t n = 0; n < log_b_all.size(); ++n) values[n] = log_b_all[n](s, i);
            const InverseGammaParams ig =
                emission_variance_posterior(values, b_bar_current(s, i), hyper.c(s, i), hyper.d(s, i));
            const double tau = rng.inverse_gamma(ig.shape, ig.scale);
            const NormalParams nm = emission_mean_posterior(values, tau, hyper.l0(s, i), hyper.tau0(s, i));
            out.tau(s, i) = tau;
            out.b_bar(s, i) = rng.normal(nm.mean, std::sqrt(nm.variance));
        }
    }
    return out;
}

}  // namespace mhmm
