#include "mhmm/random.hpp"

#include "mhmm/error.hpp"

#include <cmath>

namespace mhmm {

std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) noexcept {
    std::uint64_t h = mix64(seed);
    for (std::uint64_t id : ids) h = mix64(h ^ mix64(id + 0x632be59bd9b4e019ULL));
    return h;
}

double Rng::uniform() {
    // 53 random bits, shifted away from 0.
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::gamma(double shape, double rate) {
    std::gamma_distribution<double> dist(shape, 1.0 / rate);
    return dist(engine_);
}

Count Rng::poisson(double mean) {
    if (mean <= 0.0) return 0;
    std::poisson_distribution<Count> dist(mean);
    return dist(engine_);
}

int Rng::categorical(const Eigen::Ref<const Vector>& weights) {
    const double total = weights.sum();
    double u = uniform() * total;
    const auto n = static_cast<int>(weights.size());
    for (int i = 0; i < n; ++i) {
        u -= weights(i);
        if (u < 0.0) return i;
    }
    // Round-off: fall back to the last state with positive weight.
    for (int i = n - 1; i >= 0; --i) {
        if (weights(i) > 0.0) return i;
    }
    return n - 1;
}

std::size_t Rng::index(std::size_t n) {
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    return dist(engine_);
}

Vector Rng::mvnormal(const Vector& mean, const Matrix& chol_lower) {
    Vector z(mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal();
    return mean + chol_lower * z;
}

Matrix Rng::inverse_wishart(const Matrix& scale, double df) {
    const Eigen::Index p = scale.rows();
    if (!(df > static_cast<double>(p) - 1.0)) throw ConfigError("inverse-Wishart needs df > p - 1");
    // X ~ IW(S, df)  <=>  X^{-1} ~ W(S^{-1}, df). With S^{-1} = L L^T and the
    // Bartlett factor A, X^{-1} = (L A)(L A)^T.
    const Eigen::LLT<Matrix> scale_llt(scale);
    if (scale_llt.info() != Eigen::Success) throw CovarianceError("inverse-Wishart scale is not SPD");
    const Matrix scale_inv = scale_llt.solve(Matrix::Identity(p, p));
    const Eigen::LLT<Matrix> inv_llt(0.5 * (scale_inv + scale_inv.transpose()));
    if (inv_llt.info() != Eigen::Success) throw CovarianceError("inverse-Wishart scale is ill-conditioned");
    Matrix a = Matrix::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        a(i, i) = std::sqrt(chi_squared(df - static_cast<double>(i)));
        for (Eigen::Index j = 0; j < i; ++j) a(i, j) = normal();
    }
    const Matrix la = Matrix(inv_llt.matrixL()) * a;  // lower triangular
    // X = (la la^T)^{-1} = la^{-T} la^{-1}
    const Matrix la_inv = la.triangularView<Eigen::Lower>().solve(Matrix::Identity(p, p));
    Matrix x = la_inv.transpose() * la_inv;
    return 0.5 * (x + x.transpose());
}

Matrix psd_factor(const Matrix& cov) {
    if (cov.rows() != cov.cols()) throw CovarianceError("covariance must be square");
    if (cov.size() == 0) return cov;
    const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw CovarianceError("covariance is not symmetric");
    }
    if ((cov.array() == 0.0).all()) return Matrix::Zero(cov.rows(), cov.cols());
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    if (eig.eigenvalues().minCoeff() < -1e-12 * scale) throw CovarianceError("covariance is indefinite");
    const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal();
}

}  // namespace mhmm
