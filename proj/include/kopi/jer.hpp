#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kopi/core.hpp"
#include "kopi/parallel.hpp"
#include "kopi/pistats.hpp"
#include "kopi/rng.hpp"

namespace kopi::jer {

/// B x p Monte-Carlo sample of null pi statistics, one draw per row.
struct NullPiMatrix {
    RowMatrix rows;
    std::size_t p = 0;
    std::uint64_t seed = 0;
    bool sorted = false;

    std::size_t size() const { return static_cast<std::size_t>(rows.rows()); }
};

/// Non-decreasing thresholds t_1 <= ... <= t_kmax in [0, 1].
struct ThresholdFamily {
    Vector thresholds;

    std::size_t k_max() const { return static_cast<std::size_t>(thresholds.size()); }
};

/// B' candidate families, row b' - 1 holding T(b'/B'). Non-decreasing down
/// every column.
struct Template {
    RowMatrix families;

    std::size_t size() const { return static_cast<std::size_t>(families.rows()); }
    std::size_t k_max() const { return static_cast<std::size_t>(families.cols()); }

    // index is 1-based: family(b') = T(b' / B').
    ThresholdFamily family(std::size_t index) const {
        require(index >= 1 && index <= size(), ErrorKind::invalid_parameter, "template index out of range");
        return ThresholdFamily{families.row(static_cast<Eigen::Index>(index - 1)).transpose()};
    }
};

struct CalibrationResult {
    // b'_cal / B', or 0 when degenerate.
    double lambda = 0.0;
    // b'_cal (1-based), or 0 when degenerate.
    std::size_t index = 0;
    ThresholdFamily family;
    double alpha = 0.0;
    double empirical_jer = 0.0;
    bool degenerate = false;
};

/// How the D per-draw null rows are lined up before coordinate-wise aggregation.
enum class PairingMode {
    // Coordinate j of every draw is the j-th position of its sign process.
    rank,
    // Each draw's row goes through an independent uniform permutation first.
    permuted,
    // Each draw's row is sorted first, so order statistics are aggregated (default).
    sorted,
};

inline const char* to_string(PairingMode mode) {
    switch (mode) {
        case PairingMode::rank: return "rank";
        case PairingMode::permuted: return "permuted";
        case PairingMode::sorted: return "sorted";
    }
    return "?";
}

inline PairingMode parse_pairing_mode(const std::string& name) {
    if (name == "rank") return PairingMode::rank;
    if (name == "permuted") return PairingMode::permuted;
    if (name == "sorted") return PairingMode::sorted;
    fail(ErrorKind::invalid_parameter, "unknown pairing mode '" + name + "'");
}

/// max(1, floor(p / 50)), clamped to p.
inline std::size_t default_k_max(std::size_t p) {
    return std::min(p, std::max<std::size_t>(1, p / 50));
}

/// pi0 row for a given sign vector (entries +1 / -1): a negative sign gives 1;
/// a positive sign at position j gives (1 + #negatives before j) / p.
inline void null_pi_row_from_signs(std::span<const int> signs, std::span<double> out) {
    require(signs.size() == out.size(), ErrorKind::invalid_parameter, "sign and output lengths differ");
    const auto p = static_cast<double>(signs.size());
    std::size_t negatives = 0;
    for (std::size_t j = 0; j < signs.size(); ++j) {
        if (signs[j] < 0) {
            out[j] = 1.0;
            ++negatives;
        } else {
            out[j] = (1.0 + static_cast<double>(negatives)) / p;
        }
    }
}

/// One unsorted pi0 row from i.i.d. Rademacher signs.
inline void draw_null_pi_row(Stream& rng, std::span<double> out) {
    const auto p = static_cast<double>(out.size());
    std::size_t negatives = 0;
    std::uint64_t bits = 0;
    for (std::size_t j = 0; j < out.size(); ++j) {
        if (j % 64 == 0) bits = rng();
        const bool negative = (bits & 1u) != 0;
        bits >>= 1;
        if (negative) {
            out[j] = 1.0;
            ++negatives;
        } else {
            out[j] = (1.0 + static_cast<double>(negatives)) / p;
        }
    }
}

inline std::span<double> row_span(RowMatrix& m, Eigen::Index r) {
    return {m.row(r).data(), static_cast<std::size_t>(m.cols())};
}

inline std::span<const double> row_span(const RowMatrix& m, Eigen::Index r) {
    return {m.row(r).data(), static_cast<std::size_t>(m.cols())};
}

/// B independent null rows; row b uses rng.split(b).
inline NullPiMatrix sample_null_pi(std::size_t B, std::size_t p, Stream rng, bool sort,
                                   std::size_t threads = 1) {
    require(B >= 1 && p >= 1, ErrorKind::invalid_parameter, "B and p must be >= 1");
    NullPiMatrix out;
    out.rows.resize(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(p));
    out.p = p;
    out.seed = rng.key();
    out.sorted = sort;
    parallel_for(B, threads, [&](std::size_t b) {
        Stream row_rng = rng.split(b);
        auto row = row_span(out.rows, static_cast<Eigen::Index>(b));
        draw_null_pi_row(row_rng, row);
        if (sort) std::sort(row.begin(), row.end());
    });
    return out;
}

inline bool row_violates(std::span<const double> sorted_row, const ThresholdFamily& t) {
    for (std::size_t k = 0; k < t.k_max(); ++k)
        if (sorted_row[k] < t.thresholds(static_cast<Eigen::Index>(k))) return true;
    return false;
}

/// Fraction of rows with pi0_(k) < t_k for some k <= k_max.
inline double empirical_jer(const NullPiMatrix& null_pi, const ThresholdFamily& t) {
    require(null_pi.sorted, ErrorKind::invalid_parameter, "empirical JER needs row-sorted null statistics");
    require(t.k_max() <= null_pi.p, ErrorKind::invalid_parameter, "k_max exceeds the number of variables");
    std::size_t hits = 0;
    for (Eigen::Index b = 0; b < null_pi.rows.rows(); ++b)
        if (row_violates(row_span(null_pi.rows, b), t)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(null_pi.size());
}

/// Family b' is the coordinate-wise b'-th order statistic of the sorted rows
/// (first k_max coordinates), i.e. the upper empirical (b'/B')-quantile curve.
inline Template template_from_rows(const NullPiMatrix& sorted_rows, std::size_t k_max) {
    require(sorted_rows.sorted, ErrorKind::invalid_parameter, "template needs row-sorted null statistics");
    require(k_max >= 1 && k_max <= sorted_rows.p, ErrorKind::invalid_parameter, "k_max must lie in [1, p]");
    const Eigen::Index count = sorted_rows.rows.rows();
    Template out;
    out.families.resize(count, static_cast<Eigen::Index>(k_max));
    std::vector<double> column(static_cast<std::size_t>(count));
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(k_max); ++k) {
        for (Eigen::Index b = 0; b < count; ++b) column[static_cast<std::size_t>(b)] = sorted_rows.rows(b, k);
        std::sort(column.begin(), column.end());
        for (Eigen::Index b = 0; b < count; ++b) out.families(b, k) = column[static_cast<std::size_t>(b)];
    }
    return out;
}

inline Template build_template(std::size_t B_prime, std::size_t p, std::size_t k_max, Stream rng) {
    require(B_prime >= 1, ErrorKind::invalid_parameter, "B' must be >= 1");
    return template_from_rows(sample_null_pi(B_prime, p, rng, true), k_max);
}

/// Least conservative template family whose empirical JER is <= alpha, found
/// by binary search (the JER is non-decreasing along a template). When even
/// the first family fails, the all-zero family is returned and flagged.
inline CalibrationResult calibrate(const NullPiMatrix& null_pi, const Template& tmpl, double alpha) {
    require(tmpl.size() >= 1, ErrorKind::invalid_parameter, "empty template");
    require(alpha >= 0.0 && alpha <= 1.0, ErrorKind::invalid_parameter, "alpha must lie in [0, 1]");
    CalibrationResult out;
    out.alpha = alpha;
    const double first = empirical_jer(null_pi, tmpl.family(1));
    if (first > alpha) {
        out.degenerate = true;
        out.family.thresholds = Vector::Zero(static_cast<Eigen::Index>(tmpl.k_max()));
        out.empirical_jer = 0.0;
        return out;
    }
    std::size_t lo = 1;
    std::size_t hi = tmpl.size();
    double lo_jer = first;
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo + 1) / 2;
        const double j = empirical_jer(null_pi, tmpl.family(mid));
        if (j <= alpha) {
            lo = mid;
            lo_jer = j;
        } else {
            hi = mid - 1;
        }
    }
    out.index = lo;
    out.lambda = static_cast<double>(lo) / static_cast<double>(tmpl.size());
    out.family = tmpl.family(lo);
    out.empirical_jer = lo_jer;
    return out;
}

/// Line up D unsorted null rows (one per draw, D x p) according to `pairing`
/// and aggregate coordinate-wise. The result is unsorted. `rng` is only used
/// by the permuted mode.
inline void aggregate_null_rows(RowMatrix& draws, const pistats::AggregationScheme& scheme, PairingMode pairing,
                                Stream& rng, std::span<double> out) {
    const Eigen::Index D = draws.rows();
    const Eigen::Index p = draws.cols();
    require(out.size() == static_cast<std::size_t>(p), ErrorKind::invalid_parameter, "output length mismatch");
    if (pairing == PairingMode::sorted) {
        for (Eigen::Index d = 0; d < D; ++d) {
            auto row = row_span(draws, d);
            std::sort(row.begin(), row.end());
        }
    } else if (pairing == PairingMode::permuted) {
        for (Eigen::Index d = 0; d < D; ++d) {
            const auto perm = random_permutation(static_cast<std::size_t>(p), rng);
            const Eigen::RowVectorXd original = draws.row(d);
            for (Eigen::Index j = 0; j < p; ++j) draws(d, j) = original(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(j)]));
        }
    }
    std::vector<double> column(static_cast<std::size_t>(D));
    for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index d = 0; d < D; ++d) column[static_cast<std::size_t>(d)] = draws(d, j);
        out[static_cast<std::size_t>(j)] = pistats::aggregate_values(column, scheme);
    }
}

/// Sorted B x p matrix of aggregated null statistics: row b aggregates the b-th
/// row of D independent null matrices (matrix d row b uses rng.split(d).split(b)).
inline NullPiMatrix aggregated_null_pi(std::size_t D, std::size_t B, std::size_t p,
                                       const pistats::AggregationScheme& scheme, PairingMode pairing, Stream rng,
                                       std::size_t threads = 1) {
    require(D >= 1 && B >= 1 && p >= 1, ErrorKind::invalid_parameter, "D, B and p must be >= 1");
    NullPiMatrix out;
    out.rows.resize(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(p));
    out.p = p;
    out.seed = rng.key();
    out.sorted = true;
    std::vector<Stream> draw_streams;
    for (std::size_t d = 0; d < D; ++d) draw_streams.push_back(rng.split(d));
    parallel_for(B, threads, [&](std::size_t b) {
        RowMatrix draws(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(p));
        Stream perm_rng = rng.split(D).split(b);
        for (std::size_t d = 0; d < D; ++d) {
            Stream row_rng = draw_streams[d].split(b);
            draw_null_pi_row(row_rng, row_span(draws, static_cast<Eigen::Index>(d)));
        }
        auto row = row_span(out.rows, static_cast<Eigen::Index>(b));
        aggregate_null_rows(draws, scheme, pairing, perm_rng, row);
        std::sort(row.begin(), row.end());
    });
    return out;
}

/// D independent templates (template d from rng.split(d)) aggregated family by
/// family: T(b'/B') = f(T^1(b'/B'), ..., T^D(b'/B')).
inline Template aggregated_template(std::size_t D, std::size_t B_prime, std::size_t p, std::size_t k_max,
                                    const pistats::AggregationScheme& scheme, Stream rng) {
    require(D >= 1, ErrorKind::invalid_parameter, "D must be >= 1");
    std::vector<Template> parts;
    parts.reserve(D);
    for (std::size_t d = 0; d < D; ++d) parts.push_back(build_template(B_prime, p, k_max, rng.split(d)));
    if (D == 1) return parts.front();
    Template out;
    out.families.resize(static_cast<Eigen::Index>(B_prime), static_cast<Eigen::Index>(k_max));
    std::vector<double> values(D);
    for (Eigen::Index b = 0; b < out.families.rows(); ++b) {
        for (Eigen::Index k = 0; k < out.families.cols(); ++k) {
            for (std::size_t d = 0; d < D; ++d) values[d] = parts[d].families(b, k);
            out.families(b, k) = pistats::aggregate_values(values, scheme);
        }
    }
    return out;
}

/// Calibration on aggregated statistics. The null sample comes from
/// rng.split(0) and the template from rng.split(1).
inline CalibrationResult aggregated_calibrate(std::size_t D, std::size_t B, std::size_t B_prime, std::size_t p,
                                              std::size_t k_max, const pistats::AggregationScheme& scheme,
                                              PairingMode pairing, double alpha, Stream rng,
                                              std::size_t threads = 1) {
    const auto null_pi = aggregated_null_pi(D, B, p, scheme, pairing, rng.split(0), threads);
    const auto tmpl = aggregated_template(D, B_prime, p, k_max, scheme, rng.split(1));
    return calibrate(null_pi, tmpl, alpha);
}

} // namespace kopi::jer
