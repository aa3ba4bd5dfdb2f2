#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kopi/core.hpp"
#include "kopi/dataset.hpp"
#include "kopi/inference.hpp"
#include "kopi/jer.hpp"
#include "kopi/knockoffs.hpp"
#include "kopi/lasso.hpp"
#include "kopi/null_cache.hpp"
#include "kopi/parallel.hpp"
#include "kopi/pistats.hpp"
#include "kopi/simgen.hpp"

namespace kopi::bench {

struct MethodConfig {
    knockoffs::KnockoffMethod knockoff = knockoffs::KnockoffMethod::gaussian;
    std::size_t D = 50;
    std::size_t B = 10000;
    std::size_t B_prime = 1000;
    // 0 selects max(1, floor(p / 50)).
    std::size_t k_max = 0;
    double alpha = 0.1;
    double q = 0.1;
    // Aggregation used by the plain "kopi" method.
    pistats::AggregationScheme scheme{};
    jer::PairingMode pairing = jer::PairingMode::sorted;
    // Knockoff+ level behind the e-values; 0 means q / 2.
    double q_e = 0.0;
    double ako_gamma = 0.5;
    // Tune lambda on the first draw only and reuse it for the others.
    bool shared_lambda = false;
    bool strict_vanilla = false;
    bool shrink = true;
    lasso::CvOptions cv{};
    // "kopi", "kopi_<scheme>", "vanilla", "ebh", "ako".
    std::vector<std::string> methods{"kopi", "vanilla", "ebh", "ako"};
    std::uint64_t calibration_seed = 0;

    double effective_q_e() const { return q_e > 0.0 ? q_e : q / 2.0; }

    std::size_t effective_k_max(std::size_t p) const {
        return k_max == 0 ? jer::default_k_max(p) : k_max;
    }

    void validate() const {
        require(D >= 1, ErrorKind::invalid_parameter, "D must be >= 1");
        require(B >= 1 && B_prime >= 1, ErrorKind::invalid_parameter, "B and B' must be >= 1");
        require(alpha > 0.0 && alpha < 1.0, ErrorKind::invalid_parameter, "alpha must lie in (0, 1)");
        require(q > 0.0 && q < 1.0, ErrorKind::invalid_parameter, "q must lie in (0, 1)");
        require(q_e >= 0.0 && q_e < 1.0, ErrorKind::invalid_parameter, "q_e must lie in (0, 1)");
        require(ako_gamma > 0.0 && ako_gamma <= 1.0, ErrorKind::invalid_parameter, "ako_gamma must lie in (0, 1]");
        require(scheme.gamma > 0.0 && scheme.gamma <= 1.0, ErrorKind::invalid_parameter, "gamma must lie in (0, 1]");
        require(!methods.empty(), ErrorKind::invalid_parameter, "no methods enabled");
    }
};

/// Aggregation scheme behind a KOPI method name, or nullopt for the baselines.
inline std::optional<pistats::AggregationScheme> kopi_scheme(const std::string& method, const MethodConfig& cfg) {
    if (method == "kopi") return cfg.scheme;
    if (method.rfind("kopi_", 0) == 0) {
        pistats::AggregationScheme s = cfg.scheme;
        s.kind = pistats::parse_aggregation_kind(method.substr(5));
        return s;
    }
    if (method == "vanilla" || method == "ebh" || method == "ako") return std::nullopt;
    fail(ErrorKind::invalid_parameter, "unknown method '" + method + "'");
}

/// Per-draw statistics; row d of every matrix belongs to draw d.
struct DrawStatistics {
    Matrix W;
    Matrix pi;
    std::vector<double> lambdas;
    std::vector<std::uint64_t> draw_seeds;
};

/// D knockoff draws with their LCD and pi statistics. Draw d takes its knockoff
/// noise from rng.split(d).split(0) and its CV folds from rng.split(d).split(1);
/// the sequential sampler's regressions use rng.split(D).
inline DrawStatistics compute_draw_statistics(const Matrix& X, const Vector& y, const MethodConfig& cfg, Stream rng,
                                              std::size_t threads = 1) {
    require(X.rows() == y.size(), ErrorKind::invalid_parameter, "X and y disagree on the sample count");
    const std::size_t D = cfg.D;
    const Eigen::Index p = X.cols();
    DrawStatistics out;
    out.W.resize(static_cast<Eigen::Index>(D), p);
    out.pi.resize(static_cast<Eigen::Index>(D), p);
    out.lambdas.assign(D, 0.0);
    out.draw_seeds.assign(D, 0);

    std::optional<knockoffs::GaussianKnockoffModel> model;
    std::optional<knockoffs::SequentialDecomposition> parts;
    if (cfg.knockoff == knockoffs::KnockoffMethod::gaussian)
        model = knockoffs::fit_gaussian_model(X, knockoffs::GaussianFitOptions{cfg.shrink});
    else
        parts = knockoffs::sequential_decomposition(X, cfg.cv, rng.split(D));

    auto knockoff_copy = [&](std::size_t d) {
        Stream draw_rng = rng.split(d).split(0);
        if (model) return knockoffs::sample_gaussian_knockoffs(X, *model, draw_rng);
        auto order = random_permutation(static_cast<std::size_t>(p), draw_rng);
        auto draw = knockoffs::sequential_from_decomposition(X, *parts, order);
        draw.draw_seed = draw_rng.key();
        return draw;
    };
    auto run_draw = [&](std::size_t d, std::optional<double> fixed_lambda) {
        const auto draw = knockoff_copy(d);
        double lambda = 0.0;
        if (fixed_lambda) {
            lambda = *fixed_lambda;
        } else {
            const Matrix A = lasso::augmented_design(X, draw.xtilde);
            lambda = lasso::cross_validate_lambda(A, y, cfg.cv, rng.split(d).split(1)).lambda;
        }
        const auto w = lasso::lcd_statistic(X, draw.xtilde, y, lambda, cfg.cv.lasso);
        const auto row = static_cast<Eigen::Index>(d);
        out.W.row(row) = w.values.transpose();
        out.pi.row(row) = pistats::pi_from_w(w.values).values.transpose();
        out.lambdas[d] = lambda;
        out.draw_seeds[d] = draw.draw_seed;
    };

    if (cfg.shared_lambda) {
        run_draw(0, std::nullopt);
        const double lambda = out.lambdas[0];
        parallel_for(D - 1, threads, [&](std::size_t i) { run_draw(i + 1, lambda); });
    } else {
        parallel_for(D, threads, [&](std::size_t d) { run_draw(d, std::nullopt); });
    }
    return out;
}

/// Memoised calibrations keyed by their full spec; null matrices go through
/// the on-disk cache when a directory is given. Safe to share across threads.
class CalibrationStore {
public:
    explicit CalibrationStore(std::filesystem::path cache_dir = {}, std::size_t threads = 1,
                              std::ostream* log = nullptr)
        : cache_dir_(std::move(cache_dir)), threads_(threads), log_(log) {}

    jer::CalibrationResult get(const jer::CalibrationSpec& spec) {
        std::ostringstream key;
        key << spec.p << '/' << spec.D << '/' << spec.B << '/' << spec.B_prime << '/' << spec.k_max << '/'
            << pistats::to_string(spec.scheme.kind) << '/' << io::format_double(spec.null_spec().effective_gamma()) << '/'
            << jer::to_string(spec.pairing) << '/' << io::format_double(spec.alpha) << '/' << spec.seed;
        std::lock_guard lock(mutex_);
        if (auto it = memo_.find(key.str()); it != memo_.end()) return it->second;
        auto outcome = jer::calibrate_spec(spec, cache_dir_, threads_);
        if (outcome.cache_hit) ++cache_hits_;
        if (log_ != nullptr && !cache_dir_.empty())
            *log_ << (outcome.cache_hit ? "null cache hit: " : "null cache miss, stored: ")
                  << jer::null_cache_path(cache_dir_, spec.null_spec()).string() << '\n';
        ++computed_;
        return memo_.emplace(key.str(), outcome.result).first->second;
    }

    std::size_t cache_hits() const { return cache_hits_; }
    std::size_t computed() const { return computed_; }

private:
    std::filesystem::path cache_dir_;
    std::size_t threads_;
    std::ostream* log_;
    std::mutex mutex_;
    std::map<std::string, jer::CalibrationResult> memo_;
    std::size_t cache_hits_ = 0;
    std::size_t computed_ = 0;
};

inline jer::CalibrationSpec calibration_spec_for(const MethodConfig& cfg, std::size_t p,
                                                 const pistats::AggregationScheme& scheme) {
    jer::CalibrationSpec spec;
    spec.p = p;
    spec.D = cfg.D;
    spec.B = cfg.B;
    spec.B_prime = cfg.B_prime;
    spec.k_max = cfg.effective_k_max(p);
    spec.scheme = scheme;
    spec.pairing = cfg.pairing;
    spec.alpha = cfg.alpha;
    spec.seed = cfg.calibration_seed;
    return spec;
}

struct DatasetOutcome {
    std::vector<inference::SelectionResult> selections;
    // Seconds per method: its selection step plus its share of the draw cost.
    std::vector<double> wall_times;
    DrawStatistics statistics;
};

/// Every enabled method on one dataset, all reading the same knockoff draws.
inline DatasetOutcome run_on_dataset(const Matrix& X, const Vector& y, const MethodConfig& cfg, CalibrationStore& store,
                                     Stream rng, std::size_t threads = 1) {
    using clock = std::chrono::steady_clock;
    cfg.validate();
    const auto p = static_cast<std::size_t>(X.cols());
    DatasetOutcome out;
    const auto t0 = clock::now();
    out.statistics = compute_draw_statistics(X, y, cfg, rng, threads);
    const double draw_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    const auto& stats = out.statistics;

    for (const auto& method : cfg.methods) {
        const auto start = clock::now();
        inference::SelectionResult sel;
        std::size_t draws_used = cfg.D;
        if (const auto scheme = kopi_scheme(method, cfg)) {
            const auto spec = calibration_spec_for(cfg, p, *scheme);
            const auto cal = store.get(spec);
            const Vector pi_bar = pistats::aggregate(stats.pi, *scheme);
            sel = inference::select_kopi(pi_bar, cal.family, cfg.q);
            sel.alpha = cfg.alpha;
            sel.provenance.lambda = cal.lambda;
            sel.provenance.B = cfg.B;
            sel.provenance.B_prime = cfg.B_prime;
            sel.provenance.k_max = spec.k_max;
            sel.provenance.seeds["calibration"] = cfg.calibration_seed;
        } else if (method == "vanilla") {
            sel = inference::select_vanilla(stats.W.row(0).transpose(), cfg.q, cfg.strict_vanilla);
            draws_used = 1;
        } else if (method == "ebh") {
            Matrix e(stats.W.rows(), stats.W.cols());
            for (Eigen::Index d = 0; d < stats.W.rows(); ++d)
                e.row(d) = pistats::evalues_from_w(stats.W.row(d).transpose(), cfg.effective_q_e()).values.transpose();
            sel = inference::select_ebh(e, cfg.q);
        } else {
            sel = inference::select_ako(stats.pi, cfg.ako_gamma, cfg.q);
        }
        sel.method = method;
        sel.provenance.D = draws_used;
        sel.provenance.seeds["draws"] = rng.key();
        out.selections.push_back(std::move(sel));
        out.wall_times.push_back(std::chrono::duration<double>(clock::now() - start).count() +
                                 draw_seconds * static_cast<double>(draws_used) / static_cast<double>(cfg.D));
    }
    return out;
}

struct RunMetrics {
    std::size_t run_id = 0;
    std::string method;
    // Value of the swept parameter for this run.
    double param_value = 0.0;
    double fdp = 0.0;
    // Not applicable when the support is empty.
    std::optional<double> tpp;
    std::size_t selected_size = 0;
    double wall_time = 0.0;
};

/// FDP and TPP of a selection against the true support.
inline RunMetrics score_selection(const IndexSet& selected, const IndexSet& support) {
    RunMetrics m;
    std::size_t true_pos = 0;
    for (const auto j : selected)
        if (std::binary_search(support.begin(), support.end(), j)) ++true_pos;
    m.selected_size = selected.size();
    m.fdp = static_cast<double>(selected.size() - true_pos) / static_cast<double>(std::max<std::size_t>(1, selected.size()));
    if (!support.empty()) m.tpp = static_cast<double>(true_pos) / static_cast<double>(support.size());
    return m;
}

/// One simulated dataset (seeded from rng.split(0)) and every method on it,
/// with draws from rng.split(1).
inline std::vector<RunMetrics> run_once(simgen::SimConfig sim, const MethodConfig& cfg, CalibrationStore& store,
                                        Stream rng, std::size_t run_id = 0, std::size_t threads = 1) {
    sim.seed = rng.split(0).key();
    const auto data = simgen::simulate(sim);
    const auto outcome = run_on_dataset(data.design, data.response, cfg, store, rng.split(1), threads);
    std::vector<RunMetrics> out;
    for (std::size_t i = 0; i < outcome.selections.size(); ++i) {
        auto m = score_selection(outcome.selections[i].selected, data.support);
        m.run_id = run_id;
        m.method = outcome.selections[i].method;
        m.wall_time = outcome.wall_times[i];
        out.push_back(std::move(m));
    }
    return out;
}

inline void apply_param(simgen::SimConfig& sim, const std::string& name, double value) {
    auto as_count = [&](const char* what) {
        require(value >= 0.0 && value == std::floor(value), ErrorKind::invalid_parameter,
                std::string(what) + " must be a non-negative integer");
        return static_cast<std::size_t>(value);
    };
    if (name == "n")
        sim.n = as_count("n");
    else if (name == "p")
        sim.p = as_count("p");
    else if (name == "rho")
        sim.rho = value;
    else if (name == "sparsity")
        sim.sparsity = value;
    else if (name == "snr")
        sim.snr = value;
    else
        fail(ErrorKind::invalid_parameter, "unknown sweep parameter '" + name + "' (use n, p, rho, sparsity or snr)");
}

struct SweepConfig {
    simgen::SimConfig base{};
    std::string param = "rho";
    std::vector<double> grid;
    std::size_t runs = 50;
    std::uint64_t seed = 0;
};

struct MethodSummary {
    std::string method;
    double value = 0.0;
    std::size_t runs = 0;
    std::size_t violations = 0;
    double violation_rate = 0.0;
    double mean_fdp = 0.0;
    double fdp_sd = 0.0;
    // Mean TPP over the runs where it is defined.
    std::optional<double> power;
    double power_sd = 0.0;
    std::size_t power_runs = 0;
    double band = 0.0;
};

struct SweepReport {
    std::string param;
    std::vector<double> grid;
    std::vector<std::string> methods;
    double alpha = 0.1;
    double q = 0.1;
    std::size_t runs = 0;
    std::vector<MethodSummary> summaries;
    std::vector<RunMetrics> run_metrics;
    bool has_timing = false;
};

/// Half-width of the binomial band around alpha for N runs.
inline double band_half_width(double alpha, std::size_t runs) {
    return 2.0 * std::sqrt(alpha * (1.0 - alpha) / static_cast<double>(runs));
}

/// Violation rate, FDP and power for one (method, grid value) group of runs.
inline MethodSummary summarize(const std::vector<RunMetrics>& runs, const std::string& method, double value,
                               double alpha, double q) {
    MethodSummary s;
    s.method = method;
    s.value = value;
    double fdp_sum = 0.0, fdp_sq = 0.0, tpp_sum = 0.0, tpp_sq = 0.0;
    for (const auto& r : runs) {
        if (r.method != method || r.param_value != value) continue;
        ++s.runs;
        if (r.fdp > q) ++s.violations;
        fdp_sum += r.fdp;
        fdp_sq += r.fdp * r.fdp;
        if (r.tpp) {
            ++s.power_runs;
            tpp_sum += *r.tpp;
            tpp_sq += *r.tpp * *r.tpp;
        }
    }
    if (s.runs == 0) return s;
    const auto n = static_cast<double>(s.runs);
    s.violation_rate = static_cast<double>(s.violations) / n;
    s.mean_fdp = fdp_sum / n;
    s.fdp_sd = std::sqrt(std::max(0.0, fdp_sq / n - s.mean_fdp * s.mean_fdp));
    s.band = band_half_width(alpha, s.runs);
    if (s.power_runs > 0) {
        const auto m = static_cast<double>(s.power_runs);
        s.power = tpp_sum / m;
        s.power_sd = std::sqrt(std::max(0.0, tpp_sq / m - *s.power * *s.power));
    }
    return s;
}

/// N runs at every grid value. Run r uses Stream(seed).split(2).split(r) at
/// every grid point, so grid values are compared on matched randomness.
inline SweepReport run_sweep(const SweepConfig& sweep, const MethodConfig& cfg, CalibrationStore& store,
                             std::size_t threads = 1, bool record_timing = false) {
    require(!sweep.grid.empty(), ErrorKind::invalid_parameter, "sweep grid is empty");
    require(sweep.runs >= 1, ErrorKind::invalid_parameter, "sweep needs at least one run");
    cfg.validate();
    for (const double v : sweep.grid) {
        auto sim = sweep.base;
        apply_param(sim, sweep.param, v);
        sim.validate();
    }

    const std::size_t G = sweep.grid.size();
    const std::size_t N = sweep.runs;
    std::vector<std::vector<RunMetrics>> slots(G * N);
    const Stream master = Stream(sweep.seed).split(2);
    parallel_for(G * N, threads, [&](std::size_t job) {
        const std::size_t g = job / N;
        const std::size_t r = job % N;
        auto sim = sweep.base;
        apply_param(sim, sweep.param, sweep.grid[g]);
        auto metrics = run_once(sim, cfg, store, master.split(r), r, 1);
        for (auto& m : metrics) {
            m.param_value = sweep.grid[g];
            if (!record_timing) m.wall_time = 0.0;
        }
        slots[job] = std::move(metrics);
    });

    SweepReport report;
    report.param = sweep.param;
    report.grid = sweep.grid;
    report.methods = cfg.methods;
    report.alpha = cfg.alpha;
    report.q = cfg.q;
    report.runs = N;
    report.has_timing = record_timing;
    for (auto& slot : slots)
        for (auto& m : slot) report.run_metrics.push_back(std::move(m));
    for (const double v : sweep.grid)
        for (const auto& method : cfg.methods)
            report.summaries.push_back(summarize(report.run_metrics, method, v, cfg.alpha, cfg.q));
    return report;
}

// ---- report emission ----

inline std::string optional_number(const std::optional<double>& v) {
    return v ? io::format_double(*v) : std::string("NA");
}

inline std::string summary_csv(const SweepReport& r) {
    std::ostringstream out;
    out << "param,value,method,runs,violations,violation_rate,mean_fdp,power,power_runs,band\n";
    for (const auto& s : r.summaries)
        out << r.param << ',' << io::format_double(s.value) << ',' << s.method << ',' << s.runs << ',' << s.violations
            << ',' << io::format_double(s.violation_rate) << ',' << io::format_double(s.mean_fdp) << ','
            << optional_number(s.power) << ',' << s.power_runs << ',' << io::format_double(s.band) << '\n';
    return out.str();
}

/// Plot-ready long table. The band column is the binomial band for the
/// violation rate and two standard errors for the FDP and power means.
inline std::string long_table_csv(const SweepReport& r) {
    std::ostringstream out;
    out << "param,value,method,metric,mean,band\n";
    for (const auto& s : r.summaries) {
        const std::string prefix = r.param + ',' + io::format_double(s.value) + ',' + s.method + ',';
        out << prefix << "violation_rate," << io::format_double(s.violation_rate) << ',' << io::format_double(s.band)
            << '\n';
        const double fdp_se = s.runs > 0 ? 2.0 * s.fdp_sd / std::sqrt(static_cast<double>(s.runs)) : 0.0;
        out << prefix << "fdp," << io::format_double(s.mean_fdp) << ',' << io::format_double(fdp_se) << '\n';
        const double tpp_se = s.power_runs > 0 ? 2.0 * s.power_sd / std::sqrt(static_cast<double>(s.power_runs)) : 0.0;
        out << prefix << "power," << optional_number(s.power) << ',' << io::format_double(tpp_se) << '\n';
    }
    return out.str();
}

inline std::string runs_csv(const SweepReport& r) {
    std::ostringstream out;
    out << "param,value,run,method,fdp,tpp,selected_size" << (r.has_timing ? ",wall_time" : "") << '\n';
    for (const auto& m : r.run_metrics) {
        out << r.param << ',' << io::format_double(m.param_value) << ',' << m.run_id << ',' << m.method << ','
            << io::format_double(m.fdp) << ',' << optional_number(m.tpp) << ',' << m.selected_size;
        if (r.has_timing) out << ',' << io::format_double(m.wall_time);
        out << '\n';
    }
    return out.str();
}

/// Power with one row per method and one column per grid value.
inline std::string power_matrix_csv(const SweepReport& r) {
    std::ostringstream out;
    out << "method";
    for (const double v : r.grid) out << ',' << r.param << '=' << io::format_double(v);
    out << '\n';
    for (const auto& method : r.methods) {
        out << method;
        for (const double v : r.grid) {
            std::optional<double> power;
            for (const auto& s : r.summaries)
                if (s.method == method && s.value == v) power = s.power;
            out << ',' << optional_number(power);
        }
        out << '\n';
    }
    return out.str();
}

inline nlohmann::ordered_json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json to_json(const SweepReport& r) {
    nlohmann::ordered_json j;
    j["param"] = r.param;
    j["grid"] = r.grid;
    j["methods"] = r.methods;
    j["alpha"] = r.alpha;
    j["q"] = r.q;
    j["runs"] = r.runs;
    j["has_timing"] = r.has_timing;
    j["summaries"] = nlohmann::ordered_json::array();
    for (const auto& s : r.summaries)
        j["summaries"].push_back({{"method", s.method},
                                  {"value", s.value},
                                  {"runs", s.runs},
                                  {"violations", s.violations},
                                  {"violation_rate", s.violation_rate},
                                  {"mean_fdp", s.mean_fdp},
                                  {"fdp_sd", s.fdp_sd},
                                  {"power", optional_json(s.power)},
                                  {"power_sd", s.power_sd},
                                  {"power_runs", s.power_runs},
                                  {"band", s.band}});
    j["run_metrics"] = nlohmann::ordered_json::array();
    for (const auto& m : r.run_metrics) {
        nlohmann::ordered_json row{{"run_id", m.run_id},       {"method", m.method}, {"value", m.param_value},
                                   {"fdp", m.fdp},             {"tpp", optional_json(m.tpp)},
                                   {"selected_size", m.selected_size}};
        if (r.has_timing) row["wall_time"] = m.wall_time;
        j["run_metrics"].push_back(std::move(row));
    }
    return j;
}

inline std::optional<double> optional_from_json(const nlohmann::ordered_json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

inline SweepReport report_from_json(const nlohmann::ordered_json& j) {
    SweepReport r;
    r.param = j.at("param").get<std::string>();
    r.grid = j.at("grid").get<std::vector<double>>();
    r.methods = j.at("methods").get<std::vector<std::string>>();
    r.alpha = j.at("alpha").get<double>();
    r.q = j.at("q").get<double>();
    r.runs = j.at("runs").get<std::size_t>();
    r.has_timing = j.at("has_timing").get<bool>();
    for (const auto& s : j.at("summaries")) {
        MethodSummary m;
        m.method = s.at("method").get<std::string>();
        m.value = s.at("value").get<double>();
        m.runs = s.at("runs").get<std::size_t>();
        m.violations = s.at("violations").get<std::size_t>();
        m.violation_rate = s.at("violation_rate").get<double>();
        m.mean_fdp = s.at("mean_fdp").get<double>();
        m.fdp_sd = s.at("fdp_sd").get<double>();
        m.power = optional_from_json(s.at("power"));
        m.power_sd = s.at("power_sd").get<double>();
        m.power_runs = s.at("power_runs").get<std::size_t>();
        m.band = s.at("band").get<double>();
        r.summaries.push_back(std::move(m));
    }
    for (const auto& row : j.at("run_metrics")) {
        RunMetrics m;
        m.run_id = row.at("run_id").get<std::size_t>();
        m.method = row.at("method").get<std::string>();
        m.param_value = row.at("value").get<double>();
        m.fdp = row.at("fdp").get<double>();
        m.tpp = optional_from_json(row.at("tpp"));
        m.selected_size = row.at("selected_size").get<std::size_t>();
        if (row.contains("wall_time")) m.wall_time = row.at("wall_time").get<double>();
        r.run_metrics.push_back(std::move(m));
    }
    return r;
}

} // namespace kopi::bench
