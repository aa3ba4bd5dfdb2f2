#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "kopi/core.hpp"

namespace kopi::pistats {

/// Per-variable evidence scores, small = strong evidence. Every entry lies on
/// the lattice {1/p, ..., (p-1)/p, 1}.
struct PiStatistics {
    Vector values;
};

struct EValues {
    Vector values;
    double threshold_used = std::numeric_limits<double>::infinity();
};

/// pi_j = (1 + #{k : W_k <= -W_j}) / p when W_j > 0, and 1 otherwise.
inline PiStatistics pi_from_w(const Vector& w) {
    const auto p = static_cast<std::size_t>(w.size());
    std::vector<double> sorted(w.data(), w.data() + w.size());
    std::sort(sorted.begin(), sorted.end());
    PiStatistics out;
    out.values = Vector::Ones(w.size());
    for (std::size_t j = 0; j < p; ++j) {
        const double wj = w(static_cast<Eigen::Index>(j));
        if (wj > 0.0) {
            const auto z = std::upper_bound(sorted.begin(), sorted.end(), -wj) - sorted.begin();
            out.values(static_cast<Eigen::Index>(j)) = (1.0 + static_cast<double>(z)) / static_cast<double>(p);
        }
    }
    return out;
}

/// Same statistic computed through the sign process: visit variables by
/// decreasing |W| and, for each positive one, count the negative signs seen so
/// far. Within a group of equal |W| the negatives come first (then ascending
/// index), so a tie W_k = -W_j is counted exactly as in pi_from_w.
inline PiStatistics sign_process_pi(const Vector& w) {
    const auto p = static_cast<std::size_t>(w.size());
    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double wa = w(static_cast<Eigen::Index>(a));
        const double wb = w(static_cast<Eigen::Index>(b));
        if (std::abs(wa) != std::abs(wb)) return std::abs(wa) > std::abs(wb);
        return wa < 0.0 && !(wb < 0.0);
    });
    PiStatistics out;
    out.values = Vector::Ones(w.size());
    std::size_t negatives = 0;
    for (const auto j : order) {
        const double wj = w(static_cast<Eigen::Index>(j));
        if (wj > 0.0)
            out.values(static_cast<Eigen::Index>(j)) = (1.0 + static_cast<double>(negatives)) / static_cast<double>(p);
        else if (wj < 0.0)
            ++negatives;
    }
    return out;
}

/// Knockoff+ threshold: the smallest t among the nonzero |W_j| with
/// (1 + #{W_j <= -t}) / max(1, #{W_j >= t}) <= q, or +inf if none qualifies.
inline double knockoff_threshold(const Vector& w, double q) {
    std::vector<double> sorted(w.data(), w.data() + w.size());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> candidates;
    for (double v : sorted)
        if (v != 0.0) candidates.push_back(std::abs(v));
    std::sort(candidates.begin(), candidates.end());
    for (double t : candidates) {
        const auto neg = std::upper_bound(sorted.begin(), sorted.end(), -t) - sorted.begin();
        const auto pos = sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t);
        const double ratio = (1.0 + static_cast<double>(neg)) / static_cast<double>(std::max<std::ptrdiff_t>(1, pos));
        if (ratio <= q) return t;
    }
    return std::numeric_limits<double>::infinity();
}

/// e_j = p 1{W_j >= T} / (1 + #{W_k <= -T}) with T the knockoff+ threshold at q_e.
inline EValues evalues_from_w(const Vector& w, double q_e) {
    require(q_e > 0.0 && q_e < 1.0, ErrorKind::invalid_parameter, "q_e must lie in (0, 1)");
    EValues out;
    out.values = Vector::Zero(w.size());
    out.threshold_used = knockoff_threshold(w, q_e);
    if (!std::isfinite(out.threshold_used)) return out;
    const double t = out.threshold_used;
    const auto negatives = (w.array() <= -t).count();
    const double value = static_cast<double>(w.size()) / (1.0 + static_cast<double>(negatives));
    for (Eigen::Index j = 0; j < w.size(); ++j)
        if (w(j) >= t) out.values(j) = value;
    return out;
}

enum class AggregationKind { harmonic, arithmetic, geometric, quantile };

struct AggregationScheme {
    AggregationKind kind = AggregationKind::harmonic;
    // Quantile level; only read by the quantile kind.
    double gamma = 0.5;
};

inline const char* to_string(AggregationKind kind) {
    switch (kind) {
        case AggregationKind::harmonic: return "harmonic";
        case AggregationKind::arithmetic: return "arithmetic";
        case AggregationKind::geometric: return "geometric";
        case AggregationKind::quantile: return "quantile";
    }
    return "?";
}

inline AggregationKind parse_aggregation_kind(const std::string& name) {
    if (name == "harmonic") return AggregationKind::harmonic;
    if (name == "arithmetic") return AggregationKind::arithmetic;
    if (name == "geometric") return AggregationKind::geometric;
    if (name == "quantile") return AggregationKind::quantile;
    fail(ErrorKind::invalid_parameter, "unknown aggregation scheme '" + name + "'");
}

/// Linear-interpolation empirical quantile (position gamma (n - 1) in the
/// sorted sample). Sorts `values` in place.
inline double empirical_quantile(std::span<double> values, double gamma) {
    require(!values.empty(), ErrorKind::invalid_parameter, "quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = gamma * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

/// Aggregate D per-draw statistics of a single variable. `values` may be
/// reordered by the quantile kind.
inline double aggregate_values(std::span<double> values, const AggregationScheme& scheme) {
    require(!values.empty(), ErrorKind::invalid_parameter, "nothing to aggregate");
    const auto d = static_cast<double>(values.size());
    if (scheme.kind == AggregationKind::harmonic || scheme.kind == AggregationKind::geometric)
        for (double v : values)
            require(v > 0.0, ErrorKind::invalid_parameter,
                    std::string(to_string(scheme.kind)) + " mean needs positive inputs");
    // A single draw passes through the three means unchanged (exactly).
    if (values.size() == 1 && scheme.kind != AggregationKind::quantile) return values[0];
    switch (scheme.kind) {
        case AggregationKind::harmonic: {
            double inv = 0.0;
            for (double v : values) inv += 1.0 / v;
            return d / inv;
        }
        case AggregationKind::arithmetic: {
            double sum = 0.0;
            for (double v : values) sum += v;
            return sum / d;
        }
        case AggregationKind::geometric: {
            double logs = 0.0;
            for (double v : values) logs += std::log(v);
            return std::exp(logs / d);
        }
        case AggregationKind::quantile: {
            require(scheme.gamma > 0.0 && scheme.gamma <= 1.0, ErrorKind::invalid_parameter,
                    "quantile aggregation needs gamma in (0, 1]");
            return std::min(1.0, empirical_quantile(values, scheme.gamma) / scheme.gamma);
        }
    }
    return 1.0;
}

/// Column-wise aggregation of a D x p matrix of per-draw statistics.
inline Vector aggregate(const Matrix& stats, const AggregationScheme& scheme) {
    require(stats.rows() >= 1, ErrorKind::invalid_parameter, "aggregation needs at least one draw");
    Vector out(stats.cols());
    std::vector<double> column(static_cast<std::size_t>(stats.rows()));
    for (Eigen::Index j = 0; j < stats.cols(); ++j) {
        for (Eigen::Index d = 0; d < stats.rows(); ++d) column[static_cast<std::size_t>(d)] = stats(d, j);
        out(j) = aggregate_values(column, scheme);
    }
    return out;
}

} // namespace kopi::pistats
