#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "kopi/jer.hpp"
#include "kopi/null_cache.hpp"

using namespace kopi;
using Catch::Approx;

namespace {

jer::NullPiMatrix sorted_rows(std::initializer_list<std::initializer_list<double>> rows) {
    jer::NullPiMatrix m;
    m.rows.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index r = 0;
    for (const auto& row : rows) {
        Eigen::Index c = 0;
        for (double v : row) m.rows(r, c++) = v;
        ++r;
    }
    m.p = static_cast<std::size_t>(m.rows.cols());
    m.sorted = true;
    return m;
}

jer::ThresholdFamily family(std::initializer_list<double> t) {
    jer::ThresholdFamily f;
    f.thresholds.resize(static_cast<Eigen::Index>(t.size()));
    Eigen::Index i = 0;
    for (double v : t) f.thresholds(i++) = v;
    return f;
}

// Plain loops over rows and coordinates.
double jer_oracle(const jer::NullPiMatrix& m, const jer::ThresholdFamily& t) {
    int hits = 0;
    for (Eigen::Index b = 0; b < m.rows.rows(); ++b) {
        bool any = false;
        for (Eigen::Index k = 0; k < t.thresholds.size(); ++k) any = any || m.rows(b, k) < t.thresholds(k);
        hits += any;
    }
    return static_cast<double>(hits) / static_cast<double>(m.rows.rows());
}

// Linear scan over every template index, keeping the largest that qualifies.
std::size_t calibration_scan(const jer::NullPiMatrix& m, const jer::Template& tmpl, double alpha) {
    std::size_t best = 0;
    for (std::size_t b = 1; b <= tmpl.size(); ++b)
        if (jer_oracle(m, tmpl.family(b)) <= alpha) best = b;
    return best;
}

} // namespace

TEST_CASE("null pi from a sign vector") {
    const std::vector<int> signs{+1, -1, +1};
    std::vector<double> out(3);
    jer::null_pi_row_from_signs(signs, out);
    CHECK(out == std::vector<double>{1.0 / 3, 1.0, 2.0 / 3});
    std::sort(out.begin(), out.end());
    CHECK(out == std::vector<double>{1.0 / 3, 2.0 / 3, 1.0});

    const std::vector<int> negative(5, -1);
    std::vector<double> ones(5);
    jer::null_pi_row_from_signs(negative, ones);
    CHECK(ones == std::vector<double>(5, 1.0));

    const std::vector<int> positive(4, +1);
    std::vector<double> low(4);
    jer::null_pi_row_from_signs(positive, low);
    CHECK(low == std::vector<double>(4, 0.25));
}

TEST_CASE("sampled null rows have the sign-process structure") {
    const std::size_t p = 17;
    const auto m = jer::sample_null_pi(400, p, Stream(3), false);
    CHECK_FALSE(m.sorted);
    for (Eigen::Index b = 0; b < m.rows.rows(); ++b) {
        std::size_t ones_before = 0;
        for (Eigen::Index j = 0; j < m.rows.cols(); ++j) {
            const double v = m.rows(b, j);
            const double z = v * static_cast<double>(p) - 1.0;
            REQUIRE(z == Approx(std::round(z)).margin(1e-9));
            if (v < 1.0) REQUIRE(static_cast<std::size_t>(std::lround(z)) == ones_before);
            // Away from the last coordinate, 1 means a negative sign.
            if (v == 1.0 && j + 1 < m.rows.cols()) ++ones_before;
        }
    }
    const auto s = jer::sample_null_pi(400, p, Stream(3), true);
    for (Eigen::Index b = 0; b < s.rows.rows(); ++b) {
        Eigen::RowVectorXd row = m.rows.row(b);
        std::sort(row.begin(), row.end());
        REQUIRE(s.rows.row(b) == row);
        for (Eigen::Index j = 1; j < s.rows.cols(); ++j) REQUIRE(s.rows(b, j - 1) <= s.rows(b, j));
    }
}

TEST_CASE("null marginal: half the coordinates equal one") {
    const auto m = jer::sample_null_pi(20000, 20, Stream(4), false);
    const double frac = static_cast<double>((m.rows.array() == 1.0).count()) / static_cast<double>(m.rows.size());
    // Pooled binomial 3 sigma on 4e5 coordinates is 0.0024.
    CHECK(std::abs(frac - 0.5) < 0.005);
}

TEST_CASE("empirical JER") {
    const auto m = sorted_rows({{0.2, 0.5}, {0.05, 0.5}});
    CHECK(jer::empirical_jer(m, family({0.1, 0.4})) == 0.5);
    CHECK(jer::empirical_jer(m, family({0.0, 0.0})) == 0.0);
    CHECK_THROWS_AS(jer::empirical_jer(m, family({0.1, 0.2, 0.3})), Error);

    // All-ones family: a row survives only when every sign is negative, or
    // when the single positive sign sits at the last position.
    const std::size_t p = 6, B = 40000;
    const auto null = jer::sample_null_pi(B, p, Stream(5), true);
    const double expected = 1.0 - 2.0 * std::pow(0.5, static_cast<double>(p));
    const double sd = std::sqrt(expected * (1.0 - expected) / static_cast<double>(B));
    CHECK(std::abs(jer::empirical_jer(null, family({1, 1, 1, 1, 1, 1})) - expected) < 4.0 * sd);
}

TEST_CASE("template from order statistics") {
    const auto rows = sorted_rows({{0.1, 0.5}, {0.3, 0.7}});
    const auto t = jer::template_from_rows(rows, 2);
    CHECK(t.family(1).thresholds == family({0.1, 0.5}).thresholds);
    CHECK(t.family(2).thresholds == family({0.3, 0.7}).thresholds);

    const auto single = jer::build_template(1, 10, 3, Stream(6));
    const auto source = jer::sample_null_pi(1, 10, Stream(6), true);
    CHECK(single.family(1).thresholds == source.rows.row(0).head(3).transpose());

    const auto big = jer::build_template(300, 40, 5, Stream(7));
    for (Eigen::Index k = 0; k < 5; ++k)
        for (Eigen::Index b = 1; b < 300; ++b) REQUIRE(big.families(b - 1, k) <= big.families(b, k));
}

TEST_CASE("JER is non-decreasing along a template") {
    const auto null = jer::sample_null_pi(500, 12, Stream(8), true);
    const auto tmpl = jer::build_template(64, 12, 4, Stream(9));
    double prev = 0.0;
    for (std::size_t b = 1; b <= tmpl.size(); ++b) {
        const double j = jer::empirical_jer(null, tmpl.family(b));
        CHECK(j == jer_oracle(null, tmpl.family(b)));
        CHECK(j >= prev);
        prev = j;
    }
}

TEST_CASE("calibration") {
    jer::Template tmpl;
    tmpl.families.resize(2, 2);
    tmpl.families << 0.05, 0.1, 0.2, 0.5;
    const auto null = sorted_rows({{0.1, 0.6}, {0.3, 0.7}});
    const auto cal = jer::calibrate(null, tmpl, 0.25);
    CHECK(cal.lambda == 0.5);
    CHECK(cal.index == 1);
    CHECK(cal.family.thresholds == family({0.05, 0.1}).thresholds);
    CHECK(cal.empirical_jer == 0.0);
    CHECK_FALSE(cal.degenerate);

    const auto top = jer::calibrate(null, tmpl, 0.5);
    CHECK(top.lambda == 1.0);

    jer::Template strict;
    strict.families.resize(1, 2);
    strict.families << 0.2, 0.5;
    const auto degenerate = jer::calibrate(null, strict, 0.0);
    CHECK(degenerate.degenerate);
    CHECK(degenerate.family.thresholds == Vector::Zero(2));
    CHECK(jer::empirical_jer(null, degenerate.family) == 0.0);
}

TEST_CASE("binary search matches a linear scan") {
    Stream rng(10);
    for (int trial = 0; trial < 100; ++trial) {
        const auto p = 2 + static_cast<std::size_t>(rng() % 20);
        const auto B = 1 + static_cast<std::size_t>(rng() % 200);
        const auto Bp = 1 + static_cast<std::size_t>(rng() % 64);
        const auto k_max = 1 + static_cast<std::size_t>(rng() % p);
        const double alpha = uniform01(rng) * 0.5;
        const auto null = jer::sample_null_pi(B, p, rng.split(2 * trial), true);
        const auto tmpl = jer::build_template(Bp, p, k_max, rng.split(2 * trial + 1));
        const auto cal = jer::calibrate(null, tmpl, alpha);
        const auto expected = calibration_scan(null, tmpl, alpha);
        REQUIRE(cal.index == expected);
        REQUIRE(cal.degenerate == (expected == 0));
        if (expected > 0) REQUIRE(cal.empirical_jer <= alpha);
    }
}

TEST_CASE("aggregated null rows") {
    using pistats::AggregationKind;
    Stream rng(1);
    RowMatrix draws(2, 2);
    draws << 0.5, 1.0, 1.0, 0.5;
    std::vector<double> out(2);
    jer::aggregate_null_rows(draws, {AggregationKind::harmonic}, jer::PairingMode::rank, rng, out);
    CHECK(out[0] == Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(out[1] == Approx(2.0 / 3.0).epsilon(1e-15));

    RowMatrix ones = RowMatrix::Ones(2, 3);
    std::vector<double> agg(3);
    jer::aggregate_null_rows(ones, {AggregationKind::harmonic}, jer::PairingMode::rank, rng, agg);
    CHECK(agg == std::vector<double>(3, 1.0));

    RowMatrix mixed(2, 2);
    mixed << 0.5, 1.0, 1.0, 0.5;
    jer::aggregate_null_rows(mixed, {AggregationKind::arithmetic}, jer::PairingMode::sorted, rng, out);
    CHECK(out == std::vector<double>{0.5, 1.0});
}

TEST_CASE("aggregated calibration with D = 1 reduces to single-draw calibration") {
    const Stream root(21);
    const std::size_t p = 30, B = 300, Bp = 50, k_max = 3;
    for (auto kind : {pistats::AggregationKind::harmonic, pistats::AggregationKind::arithmetic,
                      pistats::AggregationKind::geometric}) {
        const auto agg = jer::aggregated_calibrate(1, B, Bp, p, k_max, {kind}, jer::PairingMode::rank, 0.1, root);
        // Same streams as the aggregated path: null rows from split(0).split(0), template from split(1).split(0).
        const auto null = jer::sample_null_pi(B, p, root.split(0).split(0), true);
        const auto tmpl = jer::build_template(Bp, p, k_max, root.split(1).split(0));
        const auto single = jer::calibrate(null, tmpl, 0.1);
        CHECK(agg.index == single.index);
        CHECK(agg.family.thresholds == single.family.thresholds);
    }
}

TEST_CASE("aggregated templates stay monotone for every scheme") {
    using pistats::AggregationKind;
    for (auto kind : {AggregationKind::harmonic, AggregationKind::arithmetic, AggregationKind::geometric,
                      AggregationKind::quantile}) {
        const auto t = jer::aggregated_template(5, 80, 25, 4, {kind, 0.5}, Stream(30));
        for (Eigen::Index k = 0; k < 4; ++k)
            for (Eigen::Index b = 1; b < 80; ++b) REQUIRE(t.families(b - 1, k) <= t.families(b, k));
    }
}

TEST_CASE("threaded sampling is identical to serial sampling") {
    const auto serial = jer::aggregated_null_pi(3, 200, 15, {}, jer::PairingMode::permuted, Stream(40), 1);
    const auto threaded = jer::aggregated_null_pi(3, 200, 15, {}, jer::PairingMode::permuted, Stream(40), 4);
    CHECK(serial.rows == threaded.rows);
}

TEST_CASE("null cache round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "kopi_test_null_cache";
    std::filesystem::remove_all(dir);
    jer::NullSpec spec{12, 150, 3, {pistats::AggregationKind::quantile, 0.3}, jer::PairingMode::permuted, 99};

    const auto first = jer::load_or_sample_null(dir, spec);
    CHECK_FALSE(first.cache_hit);
    CHECK(std::filesystem::exists(first.file));
    const auto second = jer::load_or_sample_null(dir, spec);
    CHECK(second.cache_hit);
    CHECK(second.matrix.rows == first.matrix.rows);
    CHECK(second.matrix.rows == jer::sample_null_for(spec).rows);

    // Header must match exactly.
    auto other = spec;
    other.seed = 100;
    CHECK_FALSE(jer::read_null_cache(first.file, other).has_value());
    other = spec;
    other.scheme.gamma = 0.4;
    CHECK_FALSE(jer::read_null_cache(first.file, other).has_value());

    {
        std::ifstream in(first.file, std::ios::binary);
        char magic[5];
        in.read(magic, 5);
        CHECK(std::string(magic, 5) == "KOPI0");
    }

    // A truncated payload behind a valid header is an error, not a miss.
    std::filesystem::resize_file(first.file, std::filesystem::file_size(first.file) - 8);
    CHECK_THROWS_AS(jer::read_null_cache(first.file, spec), Error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("calibrate_spec equals aggregated_calibrate with the seed stream") {
    const auto dir = std::filesystem::temp_directory_path() / "kopi_test_calibrate_spec";
    std::filesystem::remove_all(dir);
    jer::CalibrationSpec spec;
    spec.p = 40;
    spec.D = 4;
    spec.B = 500;
    spec.B_prime = 100;
    spec.k_max = 2;
    spec.alpha = 0.1;
    spec.seed = 5;
    const auto direct = jer::aggregated_calibrate(spec.D, spec.B, spec.B_prime, spec.p, spec.k_max, spec.scheme,
                                                  spec.pairing, spec.alpha, Stream(spec.seed));
    const auto cold = jer::calibrate_spec(spec, dir);
    const auto warm = jer::calibrate_spec(spec, dir);
    CHECK_FALSE(cold.cache_hit);
    CHECK(warm.cache_hit);
    CHECK(cold.result.index == direct.index);
    CHECK(warm.result.family.thresholds == direct.family.thresholds);
    CHECK(jer::calibrate_spec(spec).result.index == direct.index);
    std::filesystem::remove_all(dir);
}

TEST_CASE("default k_max") {
    CHECK(jer::default_k_max(500) == 10);
    CHECK(jer::default_k_max(200) == 4);
    CHECK(jer::default_k_max(10) == 1);
    CHECK(jer::default_k_max(1) == 1);
}
