#include <catch_amalgamated.hpp>

#include <filesystem>
#include <sstream>

#include "kopi/bench.hpp"

using namespace kopi;
using Catch::Approx;

namespace {

bench::MethodConfig small_config() {
    bench::MethodConfig cfg;
    cfg.D = 3;
    cfg.B = 400;
    cfg.B_prime = 80;
    cfg.methods = {"kopi", "vanilla", "ebh", "ako"};
    cfg.calibration_seed = 5;
    return cfg;
}

simgen::SimConfig small_sim() {
    simgen::SimConfig sim;
    sim.n = 80;
    sim.p = 30;
    sim.sparsity = 0.2;
    sim.snr = 4.0;
    return sim;
}

std::size_t count_lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

} // namespace

TEST_CASE("binomial band") {
    CHECK(bench::band_half_width(0.1, 1) == Approx(0.6).epsilon(1e-12));
    CHECK(bench::band_half_width(0.1, 50) == Approx(0.0848528).epsilon(1e-6));
    CHECK(bench::band_half_width(0.1, 200) == Approx(0.0424264).epsilon(1e-6));
}

TEST_CASE("selection scoring") {
    const IndexSet support{1, 4, 6};
    const auto oracle = bench::score_selection(support, support);
    CHECK(oracle.fdp == 0.0);
    CHECK(*oracle.tpp == 1.0);

    const auto mixed = bench::score_selection({0, 1, 2, 4}, support);
    CHECK(mixed.fdp == 0.5);
    CHECK(*mixed.tpp == Approx(2.0 / 3.0));
    CHECK(mixed.selected_size == 4);

    const auto empty = bench::score_selection({}, support);
    CHECK(empty.fdp == 0.0);
    CHECK(*empty.tpp == 0.0);

    const auto null = bench::score_selection({0, 3}, {});
    CHECK(null.fdp == 1.0);
    CHECK_FALSE(null.tpp.has_value());
}

TEST_CASE("method names") {
    const auto cfg = small_config();
    CHECK(bench::kopi_scheme("kopi", cfg)->kind == pistats::AggregationKind::harmonic);
    CHECK(bench::kopi_scheme("kopi_geometric", cfg)->kind == pistats::AggregationKind::geometric);
    CHECK_FALSE(bench::kopi_scheme("ebh", cfg).has_value());
    CHECK_THROWS_AS(bench::kopi_scheme("lasso", cfg), Error);
    CHECK_THROWS_AS(bench::kopi_scheme("kopi_median", cfg), Error);
}

TEST_CASE("draw statistics leave the inputs untouched and are reproducible") {
    const auto data = simgen::simulate(small_sim());
    const Matrix X = data.design;
    const Vector y = data.response;
    const auto cfg = small_config();
    const auto a = bench::compute_draw_statistics(X, y, cfg, Stream(1));
    CHECK(X == data.design);
    CHECK(y == data.response);
    const auto b = bench::compute_draw_statistics(X, y, cfg, Stream(1));
    CHECK(a.W == b.W);
    CHECK(a.pi == b.pi);
    CHECK(a.W.rows() == 3);
    CHECK(a.W.cols() == 30);
    // Distinct draws use distinct knockoffs.
    CHECK(a.W.row(0) != a.W.row(1));
    for (Eigen::Index d = 0; d < 3; ++d)
        CHECK(a.pi.row(d).transpose() == pistats::pi_from_w(a.W.row(d).transpose()).values);

    auto shared = cfg;
    shared.shared_lambda = true;
    const auto s = bench::compute_draw_statistics(X, y, shared, Stream(1));
    CHECK(s.lambdas[1] == s.lambdas[0]);
    CHECK(s.lambdas[2] == s.lambdas[0]);
    CHECK(s.W.row(0) == a.W.row(0));

    const auto threaded = bench::compute_draw_statistics(X, y, cfg, Stream(1), 3);
    CHECK(threaded.W == a.W);
}

TEST_CASE("sequential knockoffs through the pipeline") {
    auto cfg = small_config();
    cfg.knockoff = knockoffs::KnockoffMethod::sequential;
    const auto data = simgen::simulate(small_sim());
    const auto a = bench::compute_draw_statistics(data.design, data.response, cfg, Stream(2));
    const auto b = bench::compute_draw_statistics(data.design, data.response, cfg, Stream(2));
    CHECK(a.W == b.W);
    CHECK(a.W.allFinite());
}

TEST_CASE("run_once") {
    bench::CalibrationStore store;
    const auto cfg = small_config();
    const auto a = bench::run_once(small_sim(), cfg, store, Stream(3), 7);
    const auto b = bench::run_once(small_sim(), cfg, store, Stream(3), 7);
    REQUIRE(a.size() == 4);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].method == cfg.methods[i]);
        CHECK(a[i].run_id == 7);
        CHECK(a[i].fdp == b[i].fdp);
        CHECK(a[i].tpp == b[i].tpp);
        CHECK(a[i].selected_size == b[i].selected_size);
    }
    CHECK(store.computed() == 1);

    auto sim = small_sim();
    sim.global_null = true;
    for (const auto& m : bench::run_once(sim, cfg, store, Stream(4))) {
        CHECK_FALSE(m.tpp.has_value());
        CHECK((m.selected_size == 0 ? m.fdp == 0.0 : m.fdp == 1.0));
    }
}

TEST_CASE("sweep tables") {
    bench::CalibrationStore store;
    bench::SweepConfig sweep;
    sweep.base = small_sim();
    sweep.param = "rho";
    sweep.grid = {0.2, 0.6};
    sweep.runs = 2;
    sweep.seed = 11;
    const auto cfg = small_config();
    const auto report = bench::run_sweep(sweep, cfg, store);

    CHECK(report.run_metrics.size() == 2 * 2 * 4);
    CHECK(report.summaries.size() == 2 * 4);
    for (const auto& s : report.summaries) {
        CHECK(s.runs == 2);
        std::size_t violations = 0;
        for (const auto& m : report.run_metrics)
            if (m.method == s.method && m.param_value == s.value && m.fdp > cfg.q) ++violations;
        CHECK(s.violations == violations);
        CHECK(s.violation_rate == static_cast<double>(violations) / 2.0);
        CHECK(s.band == bench::band_half_width(0.1, 2));
    }
    // Both grid points share one calibration: p does not change.
    CHECK(store.computed() == 1);

    const auto summary = bench::summary_csv(report);
    CHECK(summary.rfind("param,value,method,runs,violations,violation_rate,mean_fdp,power,power_runs,band\n", 0) == 0);
    CHECK(count_lines(summary) == 1 + 8);
    CHECK(count_lines(bench::long_table_csv(report)) == 1 + 8 * 3);
    CHECK(count_lines(bench::runs_csv(report)) == 1 + 16);
    CHECK(bench::runs_csv(report).find("wall_time") == std::string::npos);
    const auto matrix = bench::power_matrix_csv(report);
    CHECK(matrix.rfind("method,rho=0.2,rho=0.6\n", 0) == 0);
    CHECK(count_lines(matrix) == 1 + 4);

    const auto back = bench::report_from_json(nlohmann::ordered_json::parse(bench::to_json(report).dump()));
    CHECK(bench::summary_csv(back) == summary);
    CHECK(bench::runs_csv(back) == bench::runs_csv(report));

    bench::CalibrationStore store2;
    const auto again = bench::run_sweep(sweep, cfg, store2, 2);
    CHECK(bench::to_json(again).dump() == bench::to_json(report).dump());

    auto other = sweep;
    other.seed = 12;
    CHECK(bench::runs_csv(bench::run_sweep(other, cfg, store2)) != bench::runs_csv(report));

    bench::SweepReport empty;
    empty.param = "rho";
    CHECK(bench::summary_csv(empty) == "param,value,method,runs,violations,violation_rate,mean_fdp,power,power_runs,band\n");
}

TEST_CASE("sweep over schemes gives a full power matrix") {
    bench::CalibrationStore store;
    bench::SweepConfig sweep;
    sweep.base = small_sim();
    sweep.grid = {0.0, 0.3, 0.6};
    sweep.runs = 1;
    auto cfg = small_config();
    cfg.D = 2;
    cfg.methods = {"kopi_harmonic", "kopi_arithmetic", "kopi_geometric", "kopi_quantile"};
    const auto report = bench::run_sweep(sweep, cfg, store);
    const auto matrix = bench::power_matrix_csv(report);
    CHECK(count_lines(matrix) == 5);
    CHECK(matrix.find("NA") == std::string::npos);
    CHECK(store.computed() == 4);
}

TEST_CASE("sweep parameter validation") {
    bench::CalibrationStore store;
    bench::SweepConfig sweep;
    sweep.base = small_sim();
    sweep.param = "temperature";
    sweep.grid = {1.0};
    sweep.runs = 1;
    CHECK_THROWS_AS(bench::run_sweep(sweep, small_config(), store), Error);
    sweep.param = "rho";
    sweep.grid = {1.5};
    CHECK_THROWS_AS(bench::run_sweep(sweep, small_config(), store), Error);
    sweep.param = "n";
    sweep.grid = {10.5};
    CHECK_THROWS_AS(bench::run_sweep(sweep, small_config(), store), Error);
    sweep.grid = {};
    CHECK_THROWS_AS(bench::run_sweep(sweep, small_config(), store), Error);
}

TEST_CASE("calibration store uses the disk cache") {
    const auto dir = std::filesystem::temp_directory_path() / "kopi_bench_store_test";
    std::filesystem::remove_all(dir);
    const auto cfg = small_config();
    const auto spec = bench::calibration_spec_for(cfg, 30, cfg.scheme);
    std::ostringstream log1, log2;
    bench::CalibrationStore first(dir, 1, &log1);
    const auto a = first.get(spec);
    first.get(spec);
    CHECK(first.computed() == 1);
    CHECK(first.cache_hits() == 0);
    CHECK(log1.str().rfind("null cache miss", 0) == 0);

    bench::CalibrationStore second(dir, 1, &log2);
    const auto b = second.get(spec);
    CHECK(second.cache_hits() == 1);
    CHECK(log2.str().rfind("null cache hit", 0) == 0);
    CHECK(a.family.thresholds == b.family.thresholds);
    CHECK(a.lambda == b.lambda);
    std::filesystem::remove_all(dir);
}
