#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "kopi/core.hpp"
#include "kopi/rng.hpp"

namespace kopi::lasso {

struct LassoOptions {
    // Largest tolerated violation of the subgradient optimality conditions.
    double tol = 1e-8;
    // Cap on coordinate sweeps (full and active-set sweeps both count).
    std::size_t max_iter = 100000;
    // When false, hitting max_iter returns the current iterate instead of throwing.
    bool throw_on_max_iter = true;
    bool record_objective = false;
};

struct LassoFit {
    Vector coefficients;
    double lambda = 0.0;
    double intercept = 0.0;
    std::size_t iterations = 0;
    double max_kkt_violation = 0.0;
    // Objective after every sweep, when requested.
    std::vector<double> objective_trace;
};

struct WStatistics {
    Vector values;
};

inline double soft_threshold(double z, double gamma) {
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

inline Vector centered(const Vector& y) {
    return (y.array() - y.mean()).matrix();
}

/// Smallest penalty at which the all-zero solution is optimal.
inline double lambda_max(const Matrix& A, const Vector& y) {
    const auto n = static_cast<double>(A.rows());
    return (A.transpose() * centered(y)).cwiseAbs().maxCoeff() / n;
}

/// (1/2n)|yc - A beta|^2 + lambda |beta|_1 with yc the centered response.
inline double lasso_objective(const Matrix& A, const Vector& y, const Vector& beta, double lambda) {
    const auto n = static_cast<double>(A.rows());
    return (centered(y) - A * beta).squaredNorm() / (2.0 * n) + lambda * beta.lpNorm<1>();
}

namespace detail {

inline double kkt_from_gradient(const Vector& grad, const Vector& beta, double lambda) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        const double g = grad(j);
        const double v = beta(j) == 0.0 ? std::max(0.0, std::abs(g) - lambda)
                                        : std::abs(g - lambda * (beta(j) > 0.0 ? 1.0 : -1.0));
        worst = std::max(worst, v);
    }
    return worst;
}

} // namespace detail

/// Largest violation of the Lasso optimality conditions at beta:
/// |g_j| <= lambda where beta_j = 0 and g_j = lambda sign(beta_j) elsewhere,
/// with g = A^T (yc - A beta) / n.
inline double kkt_violation(const Matrix& A, const Vector& y, const Vector& beta, double lambda) {
    const auto n = static_cast<double>(A.rows());
    const Vector grad = A.transpose() * (centered(y) - A * beta) / n;
    return detail::kkt_from_gradient(grad, beta, lambda);
}

/// Cyclic coordinate descent for (1/2n)|y - A beta|^2 + lambda |beta|_1.
///
/// A must be column-centered; y is centered internally, which is equivalent to
/// fitting an unpenalized intercept. Coordinates are visited in the fixed order
/// 0..m-1. Full sweeps alternate with sweeps over the current active set; the
/// fit stops once an exact gradient recomputation shows the optimality
/// conditions hold within `tol`.
inline LassoFit fit_lasso(const Matrix& A, const Vector& y, double lambda, const LassoOptions& options = {},
                          const Vector* warm_start = nullptr) {
    require(lambda > 0.0, ErrorKind::invalid_parameter, "lambda must be > 0");
    require(A.rows() == y.size(), ErrorKind::invalid_parameter, "row count of A must match length of y");
    require(A.rows() >= 1, ErrorKind::invalid_parameter, "empty design");
    const Eigen::Index n = A.rows();
    const Eigen::Index m = A.cols();
    const auto inv_n = 1.0 / static_cast<double>(n);

    LassoFit fit;
    fit.lambda = lambda;
    fit.intercept = y.mean();
    const Vector yc = centered(y);

    Vector col_scale(m);
    for (Eigen::Index j = 0; j < m; ++j) col_scale(j) = A.col(j).squaredNorm() * inv_n;

    Vector beta = Vector::Zero(m);
    if (warm_start != nullptr) {
        require(warm_start->size() == m, ErrorKind::invalid_parameter, "warm start has wrong length");
        beta = *warm_start;
    }
    Vector resid = yc - A * beta;

    auto update = [&](Eigen::Index j) -> double {
        const double c = col_scale(j);
        if (c == 0.0) {
            beta(j) = 0.0;
            return 0.0;
        }
        const double old = beta(j);
        const double z = A.col(j).dot(resid) * inv_n + c * old;
        const double next = soft_threshold(z, lambda) / c;
        const double delta = next - old;
        if (delta != 0.0) {
            resid.noalias() -= delta * A.col(j);
            beta(j) = next;
        }
        return std::abs(delta) * c;
    };
    auto record = [&] {
        if (options.record_objective)
            fit.objective_trace.push_back(resid.squaredNorm() * 0.5 * inv_n + lambda * beta.lpNorm<1>());
    };

    const double inner_tol = 0.1 * options.tol;
    std::vector<Eigen::Index> active;
    active.reserve(static_cast<std::size_t>(m));
    std::size_t sweeps = 0;
    double violation = 0.0;
    record();
    for (;;) {
        for (Eigen::Index j = 0; j < m; ++j) update(j);
        ++sweeps;
        record();

        while (sweeps < options.max_iter) {
            active.clear();
            for (Eigen::Index j = 0; j < m; ++j)
                if (beta(j) != 0.0) active.push_back(j);
            if (active.empty()) break;
            double change = 0.0;
            for (auto j : active) change = std::max(change, update(j));
            ++sweeps;
            record();
            if (change <= inner_tol) break;
        }

        // Exact check; also clears round-off drift in the running residual.
        resid = yc - A * beta;
        const Vector grad = A.transpose() * resid * inv_n;
        violation = detail::kkt_from_gradient(grad, beta, lambda);
        if (violation <= options.tol) break;
        if (sweeps >= options.max_iter) {
            if (!options.throw_on_max_iter) break;
            throw NonConvergenceError("lasso did not converge within " + std::to_string(options.max_iter) +
                                          " sweeps (KKT violation " + std::to_string(violation) + ")",
                                      violation);
        }
    }

    fit.coefficients = std::move(beta);
    fit.iterations = sweeps;
    fit.max_kkt_violation = violation;
    return fit;
}

struct CvOptions {
    std::size_t folds = 5;
    std::size_t grid_size = 20;
    // Smallest grid value as a fraction of lambda_max.
    double min_ratio = 1e-3;
    // Options for the final fit at the selected penalty.
    LassoOptions lasso{};
    // Sweep budget of each warm-started fit along a fold's path. Fits at the
    // small-penalty end (nearly saturated, p > n) converge very slowly and only
    // feed held-out error, so they stop at this budget instead of failing.
    std::size_t path_max_iter = 300;
};

struct CvResult {
    double lambda = 0.0;
    std::size_t index = 0;
    // Descending, grid(0) = lambda_max.
    Vector grid;
    Vector cv_error;
};

inline Vector lambda_grid(double lmax, std::size_t grid_size, double min_ratio) {
    Vector grid(static_cast<Eigen::Index>(grid_size));
    if (grid_size == 1) {
        grid(0) = lmax;
        return grid;
    }
    const double step = std::log(min_ratio) / static_cast<double>(grid_size - 1);
    for (std::size_t k = 0; k < grid_size; ++k)
        grid(static_cast<Eigen::Index>(k)) = lmax * std::exp(step * static_cast<double>(k));
    return grid;
}

/// K-fold cross-validation of the penalty over a log-spaced grid on
/// [min_ratio * lambda_max, lambda_max]. Each training fold is re-centered and
/// the path is fitted with warm starts; the grid point with the smallest
/// pooled held-out squared error wins (ties go to the larger penalty).
inline CvResult cross_validate_lambda(const Matrix& A, const Vector& y, const CvOptions& options, Stream rng) {
    const auto n = static_cast<std::size_t>(A.rows());
    require(options.folds >= 2, ErrorKind::invalid_parameter, "cross-validation needs at least 2 folds");
    require(n >= options.folds, ErrorKind::invalid_parameter, "fewer samples than folds");
    require(options.grid_size >= 1, ErrorKind::invalid_parameter, "grid_size must be >= 1");
    require(options.min_ratio > 0.0 && options.min_ratio <= 1.0, ErrorKind::invalid_parameter,
            "min_ratio must lie in (0, 1]");

    const double lmax = lambda_max(A, y);
    require(lmax > 0.0, ErrorKind::degenerate, "response is orthogonal to every column: lambda_max = 0");

    CvResult result;
    result.grid = lambda_grid(lmax, options.grid_size, options.min_ratio);
    result.cv_error = Vector::Zero(result.grid.size());

    const auto perm = random_permutation(n, rng);
    std::vector<std::size_t> fold_of(n);
    for (std::size_t i = 0; i < n; ++i) fold_of[perm[i]] = i % options.folds;

    for (std::size_t fold = 0; fold < options.folds; ++fold) {
        std::vector<Eigen::Index> train, test;
        for (std::size_t i = 0; i < n; ++i)
            (fold_of[i] == fold ? test : train).push_back(static_cast<Eigen::Index>(i));

        Matrix a_train = A(train, Eigen::all);
        Vector y_train = y(train);
        const Vector means = center_columns(a_train);
        const double y_mean = y_train.mean();
        Matrix a_test = A(test, Eigen::all);
        a_test.rowwise() -= means.transpose();
        const Vector y_test = y(test);

        LassoOptions path = options.lasso;
        path.max_iter = std::min(path.max_iter, options.path_max_iter);
        path.throw_on_max_iter = false;
        Vector beta = Vector::Zero(A.cols());
        for (Eigen::Index k = 0; k < result.grid.size(); ++k) {
            const auto fit = fit_lasso(a_train, y_train, result.grid(k), path, &beta);
            beta = fit.coefficients;
            const Vector pred = (a_test * beta).array() + y_mean;
            result.cv_error(k) += (y_test - pred).squaredNorm();
        }
    }
    result.cv_error /= static_cast<double>(n);

    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < result.cv_error.size(); ++k)
        if (result.cv_error(k) < result.cv_error(best)) best = k;
    result.index = static_cast<std::size_t>(best);
    result.lambda = result.grid(best);
    return result;
}

/// Column-wise concatenation [X, Xtilde], centered.
inline Matrix augmented_design(const Matrix& X, const Matrix& xtilde) {
    require(X.rows() == xtilde.rows() && X.cols() == xtilde.cols(), ErrorKind::invalid_parameter,
            "X and its knockoff copy must have the same shape");
    Matrix A(X.rows(), 2 * X.cols());
    A << X, xtilde;
    center_columns(A);
    return A;
}

/// Lasso coefficient difference W_j = |b_j| - |b_{j+p}| from a fit on [X, Xtilde].
///
/// When x_j and its knockoff are the same column the Lasso solution is not
/// unique along that pair; the pair's total is split evenly, which is itself a
/// solution and gives W_j = 0 as the swap property demands.
inline WStatistics lcd_statistic(const Matrix& X, const Matrix& xtilde, const Vector& y, double lambda,
                                 const LassoOptions& options = {}) {
    const Matrix A = augmented_design(X, xtilde);
    auto fit = fit_lasso(A, y, lambda, options);
    const Eigen::Index p = X.cols();
    Vector& beta = fit.coefficients;
    for (Eigen::Index j = 0; j < p; ++j) {
        if (A.col(j) == A.col(j + p)) {
            const double half = 0.5 * (beta(j) + beta(j + p));
            beta(j) = half;
            beta(j + p) = half;
        }
    }
    WStatistics w;
    w.values = beta.head(p).cwiseAbs() - beta.tail(p).cwiseAbs();
    return w;
}

} // namespace kopi::lasso
