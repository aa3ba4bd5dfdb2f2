#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "kopi/core.hpp"
#include "kopi/lasso.hpp"
#include "kopi/rng.hpp"

namespace kopi::knockoffs {

enum class KnockoffMethod { gaussian, sequential };

inline const char* to_string(KnockoffMethod method) {
    return method == KnockoffMethod::gaussian ? "gaussian" : "sequential";
}

inline KnockoffMethod parse_knockoff_method(const std::string& name) {
    if (name == "gaussian") return KnockoffMethod::gaussian;
    if (name == "sequential") return KnockoffMethod::sequential;
    fail(ErrorKind::invalid_parameter, "unknown knockoff method '" + name + "'");
}

/// Second-order Gaussian knockoff model on the unit-variance scale.
///
/// With Sigma the correlation-scale covariance and S = diag(s), a knockoff row
/// is x (I - Sigma^-1 S) + z C where z ~ N(0, I) and C^T C = 2S - S Sigma^-1 S.
struct GaussianKnockoffModel {
    Matrix sigma_hat;
    Vector s_vec;
    Matrix cond_mean_map;
    Matrix cond_cov_factor;
    // Column standard deviations of the design the model was fitted on.
    Vector scale;
    // Ledoit-Wolf intensity applied to the empirical correlation (0 = none).
    double shrinkage = 0.0;
};

struct KnockoffDraw {
    Matrix xtilde;
    std::uint64_t draw_seed = 0;
    KnockoffMethod method = KnockoffMethod::gaussian;
};

// Eigenvalues of 2S - S Sigma^-1 S above -psd_tolerance are clipped to zero.
inline constexpr double psd_tolerance = 1e-8;
inline constexpr double min_covariance_eigenvalue = 1e-10;

/// Equicorrelated construction from a given correlation matrix:
/// s_j = min(1, 2 lambda_min(Sigma)) for every j.
inline GaussianKnockoffModel model_from_correlation(const Matrix& sigma) {
    require(sigma.rows() == sigma.cols() && sigma.rows() >= 1, ErrorKind::invalid_parameter,
            "covariance must be square and non-empty");
    const Eigen::Index p = sigma.rows();
    GaussianKnockoffModel model;
    model.sigma_hat = 0.5 * (sigma + sigma.transpose());
    model.scale = Vector::Ones(p);

    Eigen::SelfAdjointEigenSolver<Matrix> eig(model.sigma_hat);
    require(eig.info() == Eigen::Success, ErrorKind::numerical, "eigendecomposition of covariance failed");
    const double lambda_min = eig.eigenvalues()(0);
    require(lambda_min > min_covariance_eigenvalue, ErrorKind::numerical,
            "estimated covariance is singular (lambda_min = " + std::to_string(lambda_min) + ")");

    const double s = std::min(1.0, 2.0 * lambda_min);
    model.s_vec = Vector::Constant(p, s);

    const Matrix& V = eig.eigenvectors();
    const Matrix sigma_inv = V * eig.eigenvalues().cwiseInverse().asDiagonal() * V.transpose();
    const Matrix sinv_s = sigma_inv * model.s_vec.asDiagonal();
    model.cond_mean_map = Matrix::Identity(p, p) - sinv_s;

    Matrix cond_cov = Matrix(model.s_vec.asDiagonal()) * 2.0 - model.s_vec.asDiagonal() * sinv_s;
    cond_cov = 0.5 * (cond_cov + cond_cov.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> cov_eig(cond_cov);
    require(cov_eig.info() == Eigen::Success, ErrorKind::numerical, "eigendecomposition of 2S - S Sigma^-1 S failed");
    Vector values = cov_eig.eigenvalues();
    require(values(0) >= -psd_tolerance, ErrorKind::numerical,
            "2S - S Sigma^-1 S is not positive semi-definite (min eigenvalue " + std::to_string(values(0)) + ")");
    values = values.cwiseMax(0.0);
    model.cond_cov_factor = values.cwiseSqrt().asDiagonal() * cov_eig.eigenvectors().transpose();
    return model;
}

struct GaussianFitOptions {
    bool shrink = true;
};

/// Ledoit-Wolf linear shrinkage of a unit-diagonal sample covariance toward the
/// identity. Returns the intensity in [0, 1].
inline double ledoit_wolf_intensity(const Matrix& Z, const Matrix& S) {
    const auto n = static_cast<double>(Z.rows());
    const auto p = static_cast<double>(Z.cols());
    const Matrix target_gap = S - Matrix::Identity(S.rows(), S.cols());
    const double delta = target_gap.squaredNorm() / p;
    if (delta <= 0.0) return 0.0;
    const double s_frob = S.squaredNorm();
    double spread = 0.0;
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
        const auto z = Z.row(i);
        const double zz = z.squaredNorm();
        spread += zz * zz - 2.0 * z.dot(z * S) + s_frob;
    }
    const double beta_bar = spread / (n * n) / p;
    return std::min(beta_bar, delta) / delta;
}

inline GaussianKnockoffModel fit_gaussian_model(const Matrix& X, const GaussianFitOptions& options = {}) {
    require(X.rows() >= 2, ErrorKind::invalid_parameter, "need at least 2 samples to fit a knockoff model");
    require(X.cols() >= 1, ErrorKind::invalid_parameter, "design has no columns");
    const auto n = static_cast<double>(X.rows());

    Matrix Z = X;
    center_columns(Z);
    Vector scale(Z.cols());
    for (Eigen::Index j = 0; j < Z.cols(); ++j) {
        const double sd = std::sqrt(Z.col(j).squaredNorm() / n);
        require(sd > 0.0, ErrorKind::numerical, "column " + std::to_string(j) + " has zero variance");
        scale(j) = sd;
        Z.col(j) /= sd;
    }
    Matrix S = Z.transpose() * Z / n;
    S.diagonal().setOnes();

    double shrinkage = 0.0;
    if (options.shrink) {
        shrinkage = ledoit_wolf_intensity(Z, S);
        S = (1.0 - shrinkage) * S;
        S.diagonal().setOnes();
    }

    auto model = model_from_correlation(S);
    model.scale = std::move(scale);
    model.shrinkage = shrinkage;
    return model;
}

inline KnockoffDraw sample_gaussian_knockoffs(const Matrix& X, const GaussianKnockoffModel& model, Stream rng) {
    require(X.cols() == model.sigma_hat.cols(), ErrorKind::invalid_parameter,
            "knockoff model was fitted on a different number of columns");
    KnockoffDraw draw;
    draw.draw_seed = rng.key();
    draw.method = KnockoffMethod::gaussian;
    const Matrix standardized = X * model.scale.cwiseInverse().asDiagonal();
    const Matrix noise = standard_normal_matrix(X.rows(), X.cols(), rng);
    draw.xtilde = (standardized * model.cond_mean_map + noise * model.cond_cov_factor) * model.scale.asDiagonal();
    return draw;
}

struct SequentialDecomposition {
    // Column j: Lasso prediction of x_j from the other columns (intercept included).
    Matrix fitted;
    // Column j: x_j - fitted_j.
    Matrix residuals;
};

/// Regress every column on the others with a cross-validated Lasso.
inline SequentialDecomposition sequential_decomposition(const Matrix& X, const lasso::CvOptions& cv, Stream rng) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    require(n >= 3, ErrorKind::invalid_parameter, "sequential knockoffs need at least 3 samples");
    require(p >= 2, ErrorKind::invalid_parameter, "sequential knockoffs need at least 2 columns");

    SequentialDecomposition out{Matrix(n, p), Matrix(n, p)};
    for (Eigen::Index j = 0; j < p; ++j) {
        std::vector<Eigen::Index> others;
        others.reserve(static_cast<std::size_t>(p - 1));
        for (Eigen::Index k = 0; k < p; ++k)
            if (k != j) others.push_back(k);
        Matrix rest = X(Eigen::all, others);
        center_columns(rest);
        const Vector target = X.col(j);

        Vector coef = Vector::Zero(p - 1);
        if (lasso::lambda_max(rest, target) > 0.0) {
            const auto cv_result =
                lasso::cross_validate_lambda(rest, target, cv, rng.split(static_cast<std::uint64_t>(j)));
            coef = lasso::fit_lasso(rest, target, cv_result.lambda, cv.lasso).coefficients;
        }
        out.fitted.col(j) = (rest * coef).array() + target.mean();
        out.residuals.col(j) = target - out.fitted.col(j);
    }
    return out;
}

/// Knockoff copy from a precomputed decomposition: column j becomes its fitted
/// part plus the residual of column order[j]. The decomposition depends only
/// on X, so repeated draws can share it.
inline KnockoffDraw sequential_from_decomposition(const Matrix& X, const SequentialDecomposition& parts,
                                                  const std::vector<std::size_t>& order) {
    const Eigen::Index p = X.cols();
    require(order.size() == static_cast<std::size_t>(p), ErrorKind::invalid_parameter, "permutation has wrong length");
    KnockoffDraw draw;
    draw.method = KnockoffMethod::sequential;
    draw.xtilde.resize(X.rows(), p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const auto source = static_cast<Eigen::Index>(order[static_cast<std::size_t>(j)]);
        require(source >= 0 && source < p, ErrorKind::invalid_parameter, "permutation entry out of range");
        // fitted + own residual is the column itself; copy it to stay exact.
        if (source == j)
            draw.xtilde.col(j) = X.col(j);
        else
            draw.xtilde.col(j) = parts.fitted.col(j) + parts.residuals.col(source);
    }
    return draw;
}

/// Linear sequential sampler for non-Gaussian designs: the knockoff of column j
/// is its fitted part plus the residual of column rho(j), for a uniformly random
/// permutation rho drawn from rng.split(p). `forced_permutation` replaces rho.
inline KnockoffDraw sample_sequential_knockoffs(const Matrix& X, const lasso::CvOptions& cv, Stream rng,
                                                const std::vector<std::size_t>* forced_permutation = nullptr) {
    const auto p = static_cast<std::size_t>(X.cols());
    const auto parts = sequential_decomposition(X, cv, rng);
    std::vector<std::size_t> order;
    if (forced_permutation != nullptr) {
        order = *forced_permutation;
    } else {
        Stream perm_rng = rng.split(p);
        order = random_permutation(p, perm_rng);
    }
    auto draw = sequential_from_decomposition(X, parts, order);
    draw.draw_seed = rng.key();
    return draw;
}

} // namespace kopi::knockoffs
