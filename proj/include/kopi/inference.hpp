#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kopi/core.hpp"
#include "kopi/jer.hpp"
#include "kopi/pistats.hpp"

namespace kopi::inference {

struct Provenance {
    std::map<std::string, std::uint64_t> seeds;
    std::size_t D = 0;
    std::size_t B = 0;
    std::size_t B_prime = 0;
    std::size_t k_max = 0;
    // Calibrated template position b'/B' (KOPI only).
    std::optional<double> lambda;
};

struct SelectionResult {
    IndexSet selected;
    // Column names of the selected variables, when the design has a header.
    std::vector<std::string> selected_names;
    // V(S)/|S|; only KOPI produces one, and never for an empty selection.
    std::optional<double> fdp_bound;
    std::string method;
    double q = 0.0;
    std::optional<double> alpha;
    Provenance provenance;
};

/// Indices 0..p-1 ordered by ascending value, ties by ascending index.
inline std::vector<std::size_t> ascending_order(const Vector& values) {
    std::vector<std::size_t> order(static_cast<std::size_t>(values.size()));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return values(static_cast<Eigen::Index>(a)) < values(static_cast<Eigen::Index>(b));
    });
    return order;
}

/// V(S) = min_k (k - 1) + #{i in S : pi_i >= t_k}.
///
/// A variable whose statistic sits exactly on t_k is counted as a possible
/// false positive. This matches the strict inequality in the JER event: on the
/// complement of that event at most k - 1 null statistics lie strictly below t_k.
inline std::size_t fdp_bound_v(const Vector& pi, const jer::ThresholdFamily& t, const IndexSet& S) {
    require(t.k_max() >= 1, ErrorKind::invalid_parameter, "threshold family is empty");
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (std::size_t k = 0; k < t.k_max(); ++k) {
        const double tk = t.thresholds(static_cast<Eigen::Index>(k));
        std::size_t above = 0;
        for (const auto i : S) {
            require(i < static_cast<std::size_t>(pi.size()), ErrorKind::invalid_parameter, "index outside [0, p)");
            if (pi(static_cast<Eigen::Index>(i)) >= tk) ++above;
        }
        best = std::min(best, k + above);
    }
    return best;
}

/// Largest S with V(S) <= q |S|. For a given size the m smallest statistics
/// minimise V, so only those prefixes are scanned.
inline SelectionResult select_kopi(const Vector& pi, const jer::ThresholdFamily& t, double q) {
    require(q > 0.0 && q < 1.0, ErrorKind::invalid_parameter, "q must lie in (0, 1)");
    require(t.k_max() >= 1, ErrorKind::invalid_parameter, "threshold family is empty");
    const auto p = static_cast<std::size_t>(pi.size());
    const auto order = ascending_order(pi);

    // below[k] = #{i : pi_i < t_k}; the m smallest contain min(m, below[k]) of them.
    std::vector<std::size_t> below(t.k_max());
    for (std::size_t k = 0; k < t.k_max(); ++k) {
        const double tk = t.thresholds(static_cast<Eigen::Index>(k));
        below[k] = static_cast<std::size_t>((pi.array() < tk).count());
    }

    SelectionResult out;
    out.method = "kopi";
    out.q = q;
    for (std::size_t m = p; m >= 1; --m) {
        std::size_t v = std::numeric_limits<std::size_t>::max();
        for (std::size_t k = 0; k < t.k_max(); ++k) v = std::min(v, k + (m > below[k] ? m - below[k] : 0));
        if (static_cast<double>(v) <= q * static_cast<double>(m)) {
            out.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
            std::sort(out.selected.begin(), out.selected.end());
            out.fdp_bound = static_cast<double>(v) / static_cast<double>(m);
            break;
        }
    }
    return out;
}

/// Knockoff+ selection {j : W_j >= T_q}; `strict` uses W_j > T_q instead.
inline SelectionResult select_vanilla(const Vector& w, double q, bool strict = false) {
    require(q > 0.0 && q < 1.0, ErrorKind::invalid_parameter, "q must lie in (0, 1)");
    SelectionResult out;
    out.method = "vanilla";
    out.q = q;
    const double t = pistats::knockoff_threshold(w, q);
    if (!std::isfinite(t)) return out;
    for (Eigen::Index j = 0; j < w.size(); ++j)
        if (strict ? w(j) > t : w(j) >= t) out.selected.push_back(static_cast<std::size_t>(j));
    return out;
}

/// e-BH on the draw-averaged e-values (rows of `evalues` are draws).
inline SelectionResult select_ebh(const Matrix& evalues, double q) {
    require(evalues.rows() >= 1, ErrorKind::invalid_parameter, "e-BH needs at least one draw");
    require(q > 0.0 && q < 1.0, ErrorKind::invalid_parameter, "q must lie in (0, 1)");
    const auto p = static_cast<std::size_t>(evalues.cols());
    const Vector mean = evalues.colwise().mean().transpose();
    const auto order = ascending_order(-mean);

    SelectionResult out;
    out.method = "ebh";
    out.q = q;
    std::size_t k_hat = 0;
    for (std::size_t k = 1; k <= p; ++k)
        if (mean(static_cast<Eigen::Index>(order[k - 1])) >= static_cast<double>(p) / (q * static_cast<double>(k)))
            k_hat = k;
    out.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_hat));
    std::sort(out.selected.begin(), out.selected.end());
    return out;
}

/// Benjamini-Hochberg step-up on a vector of p-values.
inline IndexSet benjamini_hochberg(const Vector& pvalues, double q) {
    const auto p = static_cast<std::size_t>(pvalues.size());
    const auto order = ascending_order(pvalues);
    std::size_t k_hat = 0;
    for (std::size_t k = 1; k <= p; ++k)
        if (pvalues(static_cast<Eigen::Index>(order[k - 1])) <= q * static_cast<double>(k) / static_cast<double>(p))
            k_hat = k;
    IndexSet out(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_hat));
    std::sort(out.begin(), out.end());
    return out;
}

/// Quantile-aggregated pi statistics (rows are draws) followed by BH.
inline SelectionResult select_ako(const Matrix& pi_draws, double gamma, double q) {
    require(q > 0.0 && q < 1.0, ErrorKind::invalid_parameter, "q must lie in (0, 1)");
    require(gamma > 0.0 && gamma <= 1.0, ErrorKind::invalid_parameter, "gamma must lie in (0, 1]");
    const Vector aggregated = pistats::aggregate(pi_draws, {pistats::AggregationKind::quantile, gamma});
    SelectionResult out;
    out.method = "ako";
    out.q = q;
    out.selected = benjamini_hochberg(aggregated, q);
    return out;
}

inline void attach_names(SelectionResult& result, const std::vector<std::string>& names) {
    result.selected_names.clear();
    if (names.empty()) return;
    for (const auto j : result.selected) result.selected_names.push_back(names.at(j));
}

inline nlohmann::ordered_json to_json(const SelectionResult& r) {
    nlohmann::ordered_json j;
    j["method"] = r.method;
    j["q"] = r.q;
    j["alpha"] = r.alpha ? nlohmann::ordered_json(*r.alpha) : nlohmann::ordered_json(nullptr);
    j["selected"] = r.selected;
    if (!r.selected_names.empty()) j["selected_names"] = r.selected_names;
    j["fdp_bound"] = r.fdp_bound ? nlohmann::ordered_json(*r.fdp_bound) : nlohmann::ordered_json(nullptr);
    nlohmann::ordered_json seeds = nlohmann::ordered_json::object();
    for (const auto& [name, value] : r.provenance.seeds) seeds[name] = value;
    j["seeds"] = seeds;
    j["sizes"] = {{"D", r.provenance.D},
                  {"B", r.provenance.B},
                  {"B_prime", r.provenance.B_prime},
                  {"k_max", r.provenance.k_max},
                  {"lambda", r.provenance.lambda ? nlohmann::ordered_json(*r.provenance.lambda)
                                                 : nlohmann::ordered_json(nullptr)}};
    return j;
}

inline SelectionResult selection_from_json(const nlohmann::ordered_json& j) {
    SelectionResult r;
    r.method = j.at("method").get<std::string>();
    r.q = j.at("q").get<double>();
    if (!j.at("alpha").is_null()) r.alpha = j.at("alpha").get<double>();
    r.selected = j.at("selected").get<IndexSet>();
    if (j.contains("selected_names")) r.selected_names = j.at("selected_names").get<std::vector<std::string>>();
    if (!j.at("fdp_bound").is_null()) r.fdp_bound = j.at("fdp_bound").get<double>();
    for (const auto& [name, value] : j.at("seeds").items()) r.provenance.seeds[name] = value.get<std::uint64_t>();
    const auto& sizes = j.at("sizes");
    r.provenance.D = sizes.at("D").get<std::size_t>();
    r.provenance.B = sizes.at("B").get<std::size_t>();
    r.provenance.B_prime = sizes.at("B_prime").get<std::size_t>();
    r.provenance.k_max = sizes.at("k_max").get<std::size_t>();
    if (!sizes.at("lambda").is_null()) r.provenance.lambda = sizes.at("lambda").get<double>();
    return r;
}

} // namespace kopi::inference
