#pragma once

#include <cmath>
#include <string>

#include "kopi/core.hpp"
#include "kopi/rng.hpp"

namespace kopi::simgen {

struct SimConfig {
    std::size_t n = 500;
    std::size_t p = 500;
    double rho = 0.5;
    double sparsity = 0.1;
    double snr = 2.0;
    std::uint64_t seed = 0;
    // Every coefficient is zero and y is pure noise; sparsity and snr are ignored.
    bool global_null = false;
    // Rescale design columns to unit variance after centering.
    bool standardize = false;

    void validate() const {
        require(n >= 2, ErrorKind::invalid_parameter, "n must be >= 2");
        require(p >= 2, ErrorKind::invalid_parameter, "p must be >= 2");
        require(rho >= 0.0 && rho < 1.0, ErrorKind::invalid_parameter, "rho must lie in [0, 1)");
        require(sparsity > 0.0 && sparsity <= 1.0, ErrorKind::invalid_parameter, "sparsity must lie in (0, 1]");
        require(snr > 0.0, ErrorKind::invalid_parameter, "snr must be > 0");
    }
};

struct SimulatedDataset {
    Matrix design;
    Vector response;
    IndexSet support;
    double noise_scale = 1.0;
    Vector beta_star;
    Vector noise;
};

inline Matrix toeplitz_covariance(std::size_t p, double rho) {
    Matrix sigma(p, p);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j)
            sigma(i, j) = std::pow(rho, std::abs(static_cast<double>(i) - static_cast<double>(j)));
    return sigma;
}

/// Rows are i.i.d. N(0, Sigma) with Sigma_ij = rho^|i-j|, produced by the AR(1)
/// recursion x_1 ~ N(0,1), x_{j+1} = rho x_j + sqrt(1 - rho^2) zeta. Columns are
/// centered afterwards.
inline Matrix gen_toeplitz_design(std::size_t n, std::size_t p, double rho, Stream& rng) {
    require(rho >= 0.0 && rho < 1.0, ErrorKind::invalid_parameter, "rho must lie in [0, 1)");
    require(n >= 1 && p >= 1, ErrorKind::invalid_parameter, "design must be non-empty");
    const double innovation = std::sqrt(1.0 - rho * rho);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix X(n, p);
    for (std::size_t i = 0; i < n; ++i) {
        double x = normal(rng);
        X(i, 0) = x;
        for (std::size_t j = 1; j < p; ++j) {
            x = rho * x + innovation * normal(rng);
            X(i, j) = x;
        }
    }
    center_columns(X);
    return X;
}

/// Binary coefficient vector with exactly floor(sparsity * p) ones at uniformly
/// drawn positions.
inline Vector draw_support(std::size_t p, double sparsity, Stream& rng) {
    require(sparsity > 0.0 && sparsity <= 1.0, ErrorKind::invalid_parameter, "sparsity must lie in (0, 1]");
    const auto count = static_cast<std::size_t>(std::floor(sparsity * static_cast<double>(p)));
    require(count > 0, ErrorKind::degenerate, "floor(sparsity * p) = 0: empty support");
    const auto perm = random_permutation(p, rng);
    Vector beta = Vector::Zero(static_cast<Eigen::Index>(p));
    for (std::size_t k = 0; k < count; ++k) beta(static_cast<Eigen::Index>(perm[k])) = 1.0;
    return beta;
}

struct ResponseDraw {
    Vector y;
    double sigma = 0.0;
    Vector noise;
};

/// y = X beta + sigma eps with sigma = |X beta| / (snr |eps|).
inline ResponseDraw gen_response(const Matrix& X, const Vector& beta_star, double snr, Stream& rng) {
    require(beta_star.size() == X.cols(), ErrorKind::invalid_parameter, "beta_star length must match column count");
    require(snr > 0.0, ErrorKind::invalid_parameter, "snr must be > 0");
    const Vector signal = X * beta_star;
    const double signal_norm = signal.norm();
    require(signal_norm > 0.0, ErrorKind::degenerate, "X * beta_star is zero: no signal");
    ResponseDraw out;
    out.noise = standard_normal_vector(X.rows(), rng);
    out.sigma = signal_norm / (snr * out.noise.norm());
    out.y = signal + out.sigma * out.noise;
    return out;
}

inline IndexSet support_of(const Vector& beta) {
    IndexSet support;
    for (Eigen::Index j = 0; j < beta.size(); ++j)
        if (beta(j) != 0.0) support.push_back(static_cast<std::size_t>(j));
    return support;
}

/// Full synthetic problem. Design, support and noise use disjoint child
/// streams of the config seed.
inline SimulatedDataset simulate(const SimConfig& config) {
    config.validate();
    const Stream root(config.seed);
    Stream design_rng = root.split(0);
    Stream support_rng = root.split(1);
    Stream noise_rng = root.split(2);

    SimulatedDataset data;
    data.design = gen_toeplitz_design(config.n, config.p, config.rho, design_rng);
    if (config.standardize) standardize_columns(data.design);

    if (config.global_null) {
        data.beta_star = Vector::Zero(static_cast<Eigen::Index>(config.p));
        data.noise = standard_normal_vector(static_cast<Eigen::Index>(config.n), noise_rng);
        data.noise_scale = 1.0;
        data.response = data.noise;
    } else {
        data.beta_star = draw_support(config.p, config.sparsity, support_rng);
        auto response = gen_response(data.design, data.beta_star, config.snr, noise_rng);
        data.response = std::move(response.y);
        data.noise = std::move(response.noise);
        data.noise_scale = response.sigma;
    }
    data.support = support_of(data.beta_star);
    return data;
}

} // namespace kopi::simgen
