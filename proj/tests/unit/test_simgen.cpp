#include <catch_amalgamated.hpp>

#include "kopi/simgen.hpp"

using namespace kopi;
using Catch::Approx;

namespace {

Matrix empirical_cov(const Matrix& X) {
    Matrix Z = X;
    center_columns(Z);
    return Z.transpose() * Z / static_cast<double>(X.rows());
}

} // namespace

TEST_CASE("Toeplitz target matrix") {
    Matrix expected(3, 3);
    expected << 1, 0.5, 0.25, 0.5, 1, 0.5, 0.25, 0.5, 1;
    CHECK(simgen::toeplitz_covariance(3, 0.5) == expected);
}

TEST_CASE("AR(1) design reproduces the Toeplitz covariance") {
    Stream rng(1);
    const Matrix X = simgen::gen_toeplitz_design(100000, 6, 0.5, rng);
    const Matrix diff = empirical_cov(X) - simgen::toeplitz_covariance(6, 0.5);
    CHECK(diff.cwiseAbs().maxCoeff() < 0.02);

    Stream rng2(2);
    const Matrix X2 = simgen::gen_toeplitz_design(50000, 4, 0.5, rng2);
    CHECK(empirical_cov(X2)(0, 2) == Approx(0.25).margin(0.02));

    Stream rng3(3);
    const Matrix X3 = simgen::gen_toeplitz_design(50000, 4, 0.0, rng3);
    const Matrix off = empirical_cov(X3) - Matrix::Identity(4, 4);
    CHECK(off.cwiseAbs().maxCoeff() < 0.03);
}

TEST_CASE("design columns are centered") {
    Stream rng(4);
    const Matrix X = simgen::gen_toeplitz_design(57, 9, 0.7, rng);
    CHECK(X.colwise().mean().cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("invalid correlation") {
    Stream rng(5);
    CHECK_THROWS_AS(simgen::gen_toeplitz_design(10, 3, 1.0, rng), Error);
    CHECK_THROWS_AS(simgen::gen_toeplitz_design(10, 3, -0.1, rng), Error);
    simgen::SimConfig bad;
    bad.rho = 1.0;
    CHECK_THROWS_AS(simgen::simulate(bad), Error);
}

TEST_CASE("support draws") {
    Stream a(6);
    CHECK(simgen::draw_support(12, 1.0, a) == Vector::Ones(12));

    Stream b(7);
    const Vector beta = simgen::draw_support(500, 0.1, b);
    CHECK(beta.sum() == 50.0);
    CHECK(((beta.array() == 0.0) || (beta.array() == 1.0)).all());

    Stream c1(8), c2(8);
    CHECK(simgen::draw_support(100, 0.3, c1) == simgen::draw_support(100, 0.3, c2));

    Stream d(9);
    CHECK_THROWS_AS(simgen::draw_support(500, 0.001, d), Error);

    // floor(s p) even when s p is not an integer.
    Stream e(10);
    CHECK(simgen::draw_support(37, 0.1, e).sum() == 3.0);
}

TEST_CASE("response noise scale") {
    Stream rng(11);
    const Matrix X = simgen::gen_toeplitz_design(200, 30, 0.5, rng);
    const Vector beta = simgen::draw_support(30, 0.2, rng);
    const auto r = simgen::gen_response(X, beta, 2.0, rng);
    const Vector signal = X * beta;
    CHECK(signal.norm() / (r.sigma * r.noise.norm()) == Approx(2.0).epsilon(1e-12));
    // Recompute sigma from the stored noise.
    const double sigma = signal.norm() / (2.0 * r.noise.norm());
    CHECK(r.sigma == Approx(sigma).epsilon(1e-14));
    CHECK((r.y - signal - sigma * r.noise).cwiseAbs().maxCoeff() < 1e-12);

    const auto loud = simgen::gen_response(X, beta, 1e12, rng);
    CHECK((loud.y - signal).norm() < 1e-9 * signal.norm());

    CHECK_THROWS_AS(simgen::gen_response(X, Vector::Zero(30), 2.0, rng), Error);
}

TEST_CASE("simulate is deterministic and consistent") {
    simgen::SimConfig cfg;
    cfg.n = 80;
    cfg.p = 40;
    cfg.seed = 77;
    const auto a = simgen::simulate(cfg);
    const auto b = simgen::simulate(cfg);
    CHECK(a.design == b.design);
    CHECK(a.response == b.response);
    CHECK(a.support == b.support);
    CHECK(a.support.size() == 4);
    for (auto j : a.support) CHECK(j < 40);
    CHECK(a.design.colwise().mean().cwiseAbs().maxCoeff() < 1e-10);

    cfg.seed = 78;
    CHECK(simgen::simulate(cfg).design != a.design);

    cfg.global_null = true;
    const auto null = simgen::simulate(cfg);
    CHECK(null.support.empty());
    CHECK(null.response == null.noise);

    cfg.global_null = false;
    cfg.standardize = true;
    const auto st = simgen::simulate(cfg);
    for (Eigen::Index j = 0; j < st.design.cols(); ++j)
        CHECK(st.design.col(j).squaredNorm() / 80.0 == Approx(1.0).epsilon(1e-12));
}
