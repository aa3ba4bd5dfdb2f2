#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace kopi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Sorted ascending, 0-based variable indices.
using IndexSet = std::vector<std::size_t>;

enum class ErrorKind {
    invalid_parameter,
    degenerate,
    numerical,
    non_convergence,
    parse,
    io,
    config,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_parameter: return "invalid parameter";
        case ErrorKind::degenerate: return "degenerate input";
        case ErrorKind::numerical: return "numerical error";
        case ErrorKind::non_convergence: return "non-convergence";
        case ErrorKind::parse: return "parse error";
        case ErrorKind::io: return "I/O error";
        case ErrorKind::config: return "config error";
    }
    return "error";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class NonConvergenceError : public Error {
public:
    NonConvergenceError(const std::string& what, double violation)
        : Error(ErrorKind::non_convergence, what), violation_(violation) {}

    double violation() const noexcept { return violation_; }

private:
    double violation_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) fail(kind, what);
}

// Subtract column means in place; returns the removed means.
inline Vector center_columns(Matrix& X) {
    Vector means = X.colwise().mean().transpose();
    X.rowwise() -= means.transpose();
    return means;
}

// Scale columns to unit (1/n) variance in place; constant columns are left
// untouched. Returns the scale factors used.
inline Vector standardize_columns(Matrix& X) {
    const auto n = static_cast<double>(X.rows());
    Vector scale(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double sd = std::sqrt(X.col(j).squaredNorm() / n);
        scale(j) = sd > 0.0 ? sd : 1.0;
        X.col(j) /= scale(j);
    }
    return scale;
}

} // namespace kopi
