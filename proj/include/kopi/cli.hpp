#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kopi/bench.hpp"
#include "kopi/core.hpp"
#include "kopi/dataset.hpp"
#include "kopi/inference.hpp"
#include "kopi/jer.hpp"
#include "kopi/null_cache.hpp"
#include "kopi/parallel.hpp"
#include "kopi/simgen.hpp"

namespace kopi::cli {

enum ExitCode : int { ok = 0, config_error = 2, data_error = 3, numerical_error = 4 };

inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_parameter:
        case ErrorKind::config: return config_error;
        case ErrorKind::degenerate:
        case ErrorKind::parse:
        case ErrorKind::io: return data_error;
        case ErrorKind::numerical:
        case ErrorKind::non_convergence: return numerical_error;
    }
    return numerical_error;
}

/// Every setting of a CLI run. Keys of the config file and long flag names
/// are the field names below.
struct AppConfig {
    std::string mode;
    // Dataset source: a CSV path, or (when empty) the simulation settings.
    std::string data;
    std::string response = "y";
    simgen::SimConfig sim{};

    std::string knockoffs = "gaussian";
    std::size_t D = 50;
    std::size_t B = 10000;
    std::size_t B_prime = 1000;
    std::size_t k_max = 0;
    double alpha = 0.1;
    double q = 0.1;
    std::string scheme = "harmonic";
    double gamma = 0.5;
    std::string pairing = "sorted";
    std::uint64_t seed = 0;
    std::string cache_dir;
    std::string output = "kopi_out";
    std::vector<std::string> methods{"kopi", "vanilla", "ebh", "ako"};
    double q_e = 0.0;
    double ako_gamma = 0.5;
    bool shared_lambda = false;
    bool strict_vanilla = false;
    bool shrink = true;
    std::size_t cv_folds = 5;
    std::size_t cv_grid = 20;
    double lasso_tol = 1e-8;
    std::size_t lasso_max_iter = 100000;

    std::size_t repeats = 1;
    std::string sweep_param = "rho";
    std::vector<double> sweep_grid;
    std::size_t runs = 50;
    bool record_timing = false;
    // 0 = KOPI_THREADS or the hardware concurrency.
    std::size_t threads = 0;

    bool uses_dataset() const { return !data.empty(); }

    void validate() const {
        require(mode == "simulate" || mode == "calibrate" || mode == "infer" || mode == "bench", ErrorKind::config,
                "mode must be one of simulate, calibrate, infer, bench");
        require(alpha > 0.0 && alpha < 1.0, ErrorKind::config, "alpha must lie in (0, 1)");
        require(q > 0.0 && q < 1.0, ErrorKind::config, "q must lie in (0, 1)");
        require(D >= 1, ErrorKind::config, "D must be >= 1");
        require(repeats >= 1 && runs >= 1, ErrorKind::config, "repeats and runs must be >= 1");
        require(!(mode == "simulate" && uses_dataset()), ErrorKind::config, "simulate does not read a dataset");
        require(!(mode == "bench" && uses_dataset()), ErrorKind::config, "bench needs the simulation source");
        sim.validate();
        (void)pistats::parse_aggregation_kind(scheme);
        (void)jer::parse_pairing_mode(pairing);
        (void)knockoffs::parse_knockoff_method(knockoffs);
    }

    bench::MethodConfig method_config() const {
        bench::MethodConfig m;
        m.knockoff = knockoffs::parse_knockoff_method(knockoffs);
        m.D = D;
        m.B = B;
        m.B_prime = B_prime;
        m.k_max = k_max;
        m.alpha = alpha;
        m.q = q;
        m.scheme = {pistats::parse_aggregation_kind(scheme), gamma};
        m.pairing = jer::parse_pairing_mode(pairing);
        m.q_e = q_e;
        m.ako_gamma = ako_gamma;
        m.shared_lambda = shared_lambda;
        m.strict_vanilla = strict_vanilla;
        m.shrink = shrink;
        m.cv.folds = cv_folds;
        m.cv.grid_size = cv_grid;
        m.cv.lasso.tol = lasso_tol;
        m.cv.lasso.max_iter = lasso_max_iter;
        m.methods = methods;
        m.calibration_seed = seed;
        for (const auto& name : methods) (void)bench::kopi_scheme(name, m);
        m.validate();
        return m;
    }
};

// Child streams of the user seed: 0/1 calibration, 2 bench runs, 3 simulated
// dataset, 4 infer draws.
inline std::uint64_t dataset_seed(std::uint64_t seed) { return Stream(seed).split(3).key(); }
inline Stream infer_stream(std::uint64_t seed, std::size_t repeat) { return Stream(seed).split(4).split(repeat); }

namespace detail {

inline std::string quoted(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + '"';
}

inline std::string list(const std::vector<std::string>& items) {
    std::string out = "[";
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + quoted(items[i]);
    return out + "]";
}

inline std::string list(const std::vector<double>& items) {
    std::string out = "[";
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + io::format_double(items[i]);
    return out + "]";
}

} // namespace detail

/// The fully-resolved configuration as a config file that reproduces the run.
/// Settings that do not apply to the mode's data source are left out so the
/// file never trips the dataset/simulation exclusivity check.
inline std::string resolved_config_text(const AppConfig& c) {
    using detail::quoted;
    std::ostringstream out;
    auto num = [](double v) { return io::format_double(v); };
    auto flag = [](bool v) { return v ? "true" : "false"; };
    out << "mode = " << quoted(c.mode) << '\n';
    if (c.uses_dataset()) {
        out << "data = " << quoted(c.data) << '\n' << "response = " << quoted(c.response) << '\n';
    } else {
        out << "n = " << c.sim.n << "\np = " << c.sim.p << "\nrho = " << num(c.sim.rho)
            << "\nsparsity = " << num(c.sim.sparsity) << "\nsnr = " << num(c.sim.snr)
            << "\nglobal_null = " << flag(c.sim.global_null) << "\nstandardize = " << flag(c.sim.standardize) << '\n';
    }
    out << "seed = " << c.seed << '\n' << "output = " << quoted(c.output) << '\n';
    if (c.mode == "simulate") return out.str();

    out << "D = " << c.D << "\nB = " << c.B << "\nB_prime = " << c.B_prime << "\nk_max = " << c.k_max
        << "\nalpha = " << num(c.alpha) << "\nscheme = " << quoted(c.scheme) << "\ngamma = " << num(c.gamma)
        << "\npairing = " << quoted(c.pairing) << '\n';
    if (!c.cache_dir.empty()) out << "cache_dir = " << quoted(c.cache_dir) << '\n';
    if (c.mode == "calibrate") return out.str();

    out << "q = " << num(c.q) << "\nknockoffs = " << quoted(c.knockoffs) << "\nmethods = " << detail::list(c.methods)
        << "\nq_e = " << num(c.q_e) << "\nako_gamma = " << num(c.ako_gamma)
        << "\nshared_lambda = " << flag(c.shared_lambda) << "\nstrict_vanilla = " << flag(c.strict_vanilla)
        << "\nshrink = " << flag(c.shrink) << "\ncv_folds = " << c.cv_folds << "\ncv_grid = " << c.cv_grid
        << "\nlasso_tol = " << num(c.lasso_tol) << "\nlasso_max_iter = " << c.lasso_max_iter << '\n';
    if (c.mode == "infer") {
        out << "repeats = " << c.repeats << '\n';
    } else {
        out << "sweep_param = " << quoted(c.sweep_param) << "\nsweep_grid = " << detail::list(c.sweep_grid)
            << "\nruns = " << c.runs << "\nrecord_timing = " << flag(c.record_timing) << '\n';
    }
    return out.str();
}

struct Context {
    AppConfig config;
    std::ostream& out;
    std::ostream& log;

    std::filesystem::path output_dir() const { return config.output; }
    std::size_t threads() const { return config.threads > 0 ? config.threads : default_thread_count(); }

    void write(const std::string& name, const std::string& content) const {
        io::write_text_file(output_dir() / name, content);
        out << "wrote " << (output_dir() / name).string() << '\n';
    }
};

struct LoadedData {
    Matrix X;
    Vector y;
    std::vector<std::string> names;
    IndexSet support;
};

inline simgen::SimConfig sim_for(const AppConfig& c) {
    auto sim = c.sim;
    sim.seed = dataset_seed(c.seed);
    return sim;
}

inline LoadedData load_data(const AppConfig& c) {
    LoadedData d;
    if (c.uses_dataset()) {
        auto ds = io::load_dataset(c.data, c.response);
        d.X = std::move(ds.X);
        d.y = std::move(ds.y);
        d.names = std::move(ds.names);
    } else {
        auto ds = simgen::simulate(sim_for(c));
        d.X = std::move(ds.design);
        d.y = std::move(ds.response);
        d.support = std::move(ds.support);
        for (std::size_t j = 0; j < static_cast<std::size_t>(d.X.cols()); ++j) d.names.push_back("x" + std::to_string(j + 1));
    }
    return d;
}

inline void log_cache(std::ostream& log, const jer::NullLoad& load) {
    if (load.file.empty()) return;
    log << (load.cache_hit ? "null cache hit: " : "null cache miss, stored: ") << load.file.string() << '\n';
}

inline int cmd_simulate(const Context& ctx) {
    const auto data = simgen::simulate(sim_for(ctx.config));
    std::ostringstream csv, support;
    io::write_dataset_csv(csv, data.design, data.response);
    io::write_support(support, data.support);
    ctx.write("dataset.csv", csv.str());
    ctx.write("support.txt", support.str());
    return ok;
}

inline std::size_t variable_count(const AppConfig& c) {
    if (!c.uses_dataset()) return c.sim.p;
    return static_cast<std::size_t>(io::load_dataset(c.data, c.response).X.cols());
}

inline int cmd_calibrate(const Context& ctx) {
    const auto& c = ctx.config;
    const auto m = c.method_config();
    const std::size_t p = variable_count(c);
    const auto spec = bench::calibration_spec_for(m, p, m.scheme);
    const auto load = jer::load_or_sample_null(c.cache_dir, spec.null_spec(), ctx.threads());
    log_cache(ctx.log, load);
    const auto tmpl = jer::aggregated_template(spec.D, spec.B_prime, spec.p, spec.k_max, spec.scheme,
                                               Stream(spec.seed).split(1));
    const auto cal = jer::calibrate(load.matrix, tmpl, spec.alpha);

    nlohmann::ordered_json j;
    j["p"] = p;
    j["D"] = spec.D;
    j["B"] = spec.B;
    j["B_prime"] = spec.B_prime;
    j["k_max"] = spec.k_max;
    j["scheme"] = pistats::to_string(spec.scheme.kind);
    j["gamma"] = spec.null_spec().effective_gamma();
    j["pairing"] = jer::to_string(spec.pairing);
    j["alpha"] = spec.alpha;
    j["seed"] = spec.seed;
    j["lambda"] = cal.lambda;
    j["index"] = cal.index;
    j["empirical_jer"] = cal.empirical_jer;
    j["degenerate"] = cal.degenerate;
    j["thresholds"] = std::vector<double>(cal.family.thresholds.data(),
                                          cal.family.thresholds.data() + cal.family.thresholds.size());
    ctx.write("calibration.json", j.dump(2) + "\n");
    return ok;
}

inline int cmd_infer(const Context& ctx) {
    const auto& c = ctx.config;
    const auto m = c.method_config();
    const auto data = load_data(c);
    const auto p = static_cast<std::size_t>(data.X.cols());

    bench::CalibrationStore store(c.cache_dir, ctx.threads(), &ctx.log);
    std::vector<std::vector<std::size_t>> counts(m.methods.size(), std::vector<std::size_t>(p, 0));
    for (std::size_t r = 0; r < c.repeats; ++r) {
        const auto outcome = bench::run_on_dataset(data.X, data.y, m, store, infer_stream(c.seed, r), ctx.threads());
        for (std::size_t i = 0; i < outcome.selections.size(); ++i) {
            auto sel = outcome.selections[i];
            for (const auto j : sel.selected) ++counts[i][j];
            if (r > 0) continue;
            sel.provenance.seeds["seed"] = c.seed;
            inference::attach_names(sel, data.names);
            ctx.write("selection_" + sel.method + ".json", inference::to_json(sel).dump(2) + "\n");
        }
    }
    if (c.repeats > 1) {
        std::ostringstream table;
        table << "variable,name";
        for (const auto& method : m.methods) table << ',' << method;
        table << '\n';
        for (std::size_t j = 0; j < p; ++j) {
            table << (j + 1) << ',' << data.names[j];
            for (std::size_t i = 0; i < m.methods.size(); ++i)
                table << ',' << io::format_double(static_cast<double>(counts[i][j]) / static_cast<double>(c.repeats));
            table << '\n';
        }
        ctx.write("selection_frequency.csv", table.str());
    }
    return ok;
}

inline int cmd_bench(const Context& ctx) {
    const auto& c = ctx.config;
    const auto m = c.method_config();
    bench::SweepConfig sweep;
    sweep.base = c.sim;
    sweep.param = c.sweep_param;
    sweep.runs = c.runs;
    sweep.seed = c.seed;
    sweep.grid = c.sweep_grid;
    if (sweep.grid.empty()) {
        // Default: the single point given by the base simulation settings.
        if (c.sweep_param == "n") sweep.grid = {static_cast<double>(c.sim.n)};
        else if (c.sweep_param == "p") sweep.grid = {static_cast<double>(c.sim.p)};
        else if (c.sweep_param == "rho") sweep.grid = {c.sim.rho};
        else if (c.sweep_param == "sparsity") sweep.grid = {c.sim.sparsity};
        else if (c.sweep_param == "snr") sweep.grid = {c.sim.snr};
        else bench::apply_param(sweep.base, c.sweep_param, 0.0);
    }
    bench::CalibrationStore store(c.cache_dir, ctx.threads(), &ctx.log);
    const auto report = bench::run_sweep(sweep, m, store, ctx.threads(), c.record_timing);
    ctx.write("summary.csv", bench::summary_csv(report));
    ctx.write("long.csv", bench::long_table_csv(report));
    ctx.write("runs.csv", bench::runs_csv(report));
    ctx.write("power_matrix.csv", bench::power_matrix_csv(report));
    ctx.write("report.json", bench::to_json(report).dump(2) + "\n");
    return ok;
}

/// Flag/config-key bindings. Returns the option pointers that select the
/// simulation source so the caller can detect a clash with `data`.
inline std::vector<CLI::Option*> bind(CLI::App& app, AppConfig& c) {
    app.set_config("--config", "", "Config file (key = value lines; keys match the long flags)");
    app.add_option("mode", c.mode, "simulate | calibrate | infer | bench")
        ->required()
        ->check(CLI::IsMember({"simulate", "calibrate", "infer", "bench"}));
    auto* data = app.add_option("--data", c.data, "CSV dataset with a header row");
    app.add_option("--response", c.response, "Name of the response column")->capture_default_str();

    std::vector<CLI::Option*> sim{
        app.add_option("--n", c.sim.n, "Simulated sample count")->capture_default_str(),
        app.add_option("--p", c.sim.p, "Simulated variable count")->capture_default_str(),
        app.add_option("--rho", c.sim.rho, "AR(1) correlation")->capture_default_str(),
        app.add_option("--sparsity", c.sim.sparsity, "Fraction of non-null variables")->capture_default_str(),
        app.add_option("--snr", c.sim.snr, "Signal-to-noise ratio")->capture_default_str(),
        app.add_flag("--global_null,!--no-global_null", c.sim.global_null, "Simulate with every coefficient zero"),
        app.add_flag("--standardize,!--no-standardize", c.sim.standardize, "Scale simulated columns to unit variance"),
    };
    for (auto* opt : sim) opt->excludes(data);

    app.add_option("--knockoffs", c.knockoffs, "gaussian | sequential")->capture_default_str();
    app.add_option("--D", c.D, "Knockoff draws")->capture_default_str();
    app.add_option("--B", c.B, "Null Monte-Carlo rows")->capture_default_str();
    app.add_option("--B_prime", c.B_prime, "Template size")->capture_default_str();
    app.add_option("--k_max", c.k_max, "Threshold family length (0 = max(1, p/50))")->capture_default_str();
    app.add_option("--alpha", c.alpha, "JER level")->capture_default_str();
    app.add_option("--q", c.q, "FDP / FDR target")->capture_default_str();
    app.add_option("--scheme", c.scheme, "harmonic | arithmetic | geometric | quantile")->capture_default_str();
    app.add_option("--gamma", c.gamma, "Quantile level of the quantile scheme")->capture_default_str();
    app.add_option("--pairing", c.pairing, "rank | permuted | sorted")->capture_default_str();
    app.add_option("--seed", c.seed, "Master seed")->capture_default_str();
    app.add_option("--cache_dir", c.cache_dir, "Null-statistics cache directory")->envname("KOPI_CACHE_DIR");
    app.add_option("--output", c.output, "Output directory")->capture_default_str();
    app.add_option("--methods", c.methods, "kopi, kopi_<scheme>, vanilla, ebh, ako")->delimiter(',');
    app.add_option("--q_e", c.q_e, "Knockoff+ level for e-values (0 = q/2)")->capture_default_str();
    app.add_option("--ako_gamma", c.ako_gamma, "Quantile level for AKO")->capture_default_str();
    app.add_flag("--shared_lambda,!--no-shared_lambda", c.shared_lambda, "Tune lambda once and reuse it");
    app.add_flag("--strict_vanilla,!--no-strict_vanilla", c.strict_vanilla, "Select W > T instead of W >= T");
    app.add_flag("--shrink,!--no-shrink", c.shrink, "Shrink the covariance estimate toward the identity");
    app.add_option("--cv_folds", c.cv_folds, "Cross-validation folds")->capture_default_str();
    app.add_option("--cv_grid", c.cv_grid, "Penalty grid size")->capture_default_str();
    app.add_option("--lasso_tol", c.lasso_tol, "KKT tolerance")->capture_default_str();
    app.add_option("--lasso_max_iter", c.lasso_max_iter, "Maximum coordinate sweeps")->capture_default_str();
    app.add_option("--repeats", c.repeats, "infer: number of draw seeds (frequency table when > 1)")
        ->capture_default_str();
    app.add_option("--sweep_param", c.sweep_param, "bench: n | p | rho | sparsity | snr")->capture_default_str();
    app.add_option("--sweep_grid", c.sweep_grid, "bench: grid values")->delimiter(',');
    app.add_option("--runs", c.runs, "bench: runs per grid value")->capture_default_str();
    app.add_flag("--record_timing,!--no-record_timing", c.record_timing, "bench: keep wall times in the outputs");
    app.add_option("--threads", c.threads, "Worker threads (0 = KOPI_THREADS or all cores)")->capture_default_str();
    return sim;
}

/// Full CLI entry point; `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Knockoff selection with FDP control via JER calibration"};
    AppConfig config;
    bind(app, config);

    std::vector<std::string> storage{"kopi"};
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : storage) argv.push_back(s.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "config error: " << e.what() << '\n';
        return config_error;
    }

    Context ctx{config, out, err};
    try {
        ctx.config.validate();
        int code = ok;
        if (config.mode == "simulate") code = cmd_simulate(ctx);
        else if (config.mode == "calibrate") code = cmd_calibrate(ctx);
        else if (config.mode == "infer") code = cmd_infer(ctx);
        else code = cmd_bench(ctx);
        ctx.write("resolved_config.toml", resolved_config_text(ctx.config));
        return code;
    } catch (const Error& e) {
        err << to_string(e.kind()) << ": " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        err << "I/O error: " << e.what() << '\n';
        return data_error;
    }
}

} // namespace kopi::cli
