#pragma once

// Generic sigma-point machinery: point generation from a Cholesky factor,
// weights, and weighted recombination. N may be a fixed size or Eigen::Dynamic.

#include "fext/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace fext::unscented {

/// Unscented weights for dimension L: alpha_0 = kappa/(L+kappa), alpha_i = 1/(2(L+kappa)).
inline Eigen::VectorXd weights(int dimension, double kappa)
{
    if (!(dimension + kappa > 0.0)) {
        throw std::invalid_argument("unscented weights: L + kappa must be positive");
    }
    const double denom = dimension + kappa;
    Eigen::VectorXd w = Eigen::VectorXd::Constant(2 * dimension + 1, 0.5 / denom);
    w(0) = kappa / denom;
    return w;
}

template <int N>
struct SigmaPointSet {
    using Vector = Eigen::Matrix<double, N, 1>;
    using Points = Eigen::Matrix<double, N, Eigen::Dynamic>;

    Points points;            ///< column i is point i; 0 is the mean, j and j+L are the +/- pair
    Eigen::VectorXd weights;  ///< 2L+1 weights, sum to one
    double kappa{2.0};

    int dimension() const { return static_cast<int>(points.rows()); }
    int size() const { return static_cast<int>(points.cols()); }
};

/// Lower Cholesky factor S with S S^T = cov. Retries once with jitter
/// 1e-9 * trace(cov) / L on the diagonal; throws CovarianceNotPD if that fails.
template <int N>
Eigen::Matrix<double, N, N> cholesky_with_jitter(const Eigen::Matrix<double, N, N>& cov)
{
    Eigen::LLT<Eigen::Matrix<double, N, N>> llt(cov);
    if (llt.info() == Eigen::Success) {
        return llt.matrixL();
    }
    const auto n = cov.rows();
    const double jitter = 1e-9 * std::max(cov.trace(), 0.0) / static_cast<double>(n);
    Eigen::Matrix<double, N, N> padded = cov;
    padded.diagonal().array() += jitter;
    llt.compute(padded);
    if (llt.info() == Eigen::Success && jitter > 0.0) {
        return llt.matrixL();
    }
    throw CovarianceNotPD("sigma points: covariance is not positive definite (jitter "
                              + std::to_string(jitter) + " insufficient)",
                          Eigen::MatrixXd(cov));
}

template <int N>
SigmaPointSet<N> generate_sigma_points(const Eigen::Matrix<double, N, 1>& mean,
                                       const Eigen::Matrix<double, N, N>& cov, double kappa)
{
    const int dim = static_cast<int>(mean.size());
    if (cov.rows() != dim || cov.cols() != dim) {
        throw std::invalid_argument("generate_sigma_points: dimension mismatch");
    }
    if (!cov.isApprox(cov.transpose(), 1e-9) && cov.norm() > 0.0) {
        throw std::invalid_argument("generate_sigma_points: covariance must be symmetric");
    }

    SigmaPointSet<N> set;
    set.kappa = kappa;
    set.weights = weights(dim, kappa);
    const Eigen::Matrix<double, N, N> scaled = std::sqrt(dim + kappa) * cholesky_with_jitter<N>(cov);

    set.points.resize(dim, 2 * dim + 1);
    set.points.col(0) = mean;
    for (int j = 0; j < dim; ++j) {
        set.points.col(1 + j) = mean + scaled.col(j);
        set.points.col(1 + dim + j) = mean - scaled.col(j);
    }
    return set;
}

template <int M>
Eigen::Matrix<double, M, 1> weighted_mean(const Eigen::Matrix<double, M, Eigen::Dynamic>& points,
                                          const Eigen::VectorXd& w)
{
    return points * w;
}

/// sum_i w_i (a_i - a_mean)(b_i - b_mean)^T
template <int A, int B>
Eigen::Matrix<double, A, B> weighted_cross_covariance(const Eigen::Matrix<double, A, Eigen::Dynamic>& a,
                                                      const Eigen::Matrix<double, A, 1>& a_mean,
                                                      const Eigen::Matrix<double, B, Eigen::Dynamic>& b,
                                                      const Eigen::Matrix<double, B, 1>& b_mean,
                                                      const Eigen::VectorXd& w)
{
    const Eigen::Matrix<double, A, Eigen::Dynamic> da = a.colwise() - a_mean;
    const Eigen::Matrix<double, B, Eigen::Dynamic> db = b.colwise() - b_mean;
    return da * w.asDiagonal() * db.transpose();
}

template <int M>
Eigen::Matrix<double, M, M> weighted_covariance(const Eigen::Matrix<double, M, Eigen::Dynamic>& points,
                                                const Eigen::Matrix<double, M, 1>& mean, const Eigen::VectorXd& w)
{
    Eigen::Matrix<double, M, M> c = weighted_cross_covariance<M, M>(points, mean, points, mean, w);
    return 0.5 * (c + c.transpose());
}

template <int M>
struct Moments {
    Eigen::Matrix<double, M, 1> mean;
    Eigen::Matrix<double, M, M> cov;
};

/// Pushes (mean, cov) through f: R^N -> R^M with 2N+1 sigma points.
template <int M, int N, typename F>
Moments<M> transform(const Eigen::Matrix<double, N, 1>& mean, const Eigen::Matrix<double, N, N>& cov, F&& f,
                     double kappa = 2.0)
{
    const SigmaPointSet<N> set = generate_sigma_points<N>(mean, cov, kappa);
    Eigen::Matrix<double, M, Eigen::Dynamic> out;
    for (int i = 0; i < set.size(); ++i) {
        const Eigen::Matrix<double, M, 1> y = f(Eigen::Matrix<double, N, 1>(set.points.col(i)));
        if (i == 0) {
            out.resize(y.size(), set.size());
        }
        out.col(i) = y;
    }
    Moments<M> m;
    m.mean = weighted_mean<M>(out, set.weights);
    m.cov = weighted_covariance<M>(out, m.mean, set.weights);
    return m;
}

}  // namespace fext::unscented
