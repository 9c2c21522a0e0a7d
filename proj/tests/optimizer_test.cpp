#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "gradal/optimizer.hpp"

using namespace gradal;

namespace {

Eigen::MatrixXd box(double lo, double hi, int d) {
    Eigen::MatrixXd b(d, 2);
    b.col(0).setConstant(lo);
    b.col(1).setConstant(hi);
    return b;
}

const Eigen::MatrixXd kNoDesign = Eigen::MatrixXd(0, 2);

}  // namespace

TEST_CASE("recovers the maximum of a concave quadratic") {
    std::mt19937_64 eng(103);
    std::uniform_real_distribution<double> u(0.15, 0.85);
    for (int trial = 0; trial < 10; ++trial) {
        int d = 1 + static_cast<int>(eng() % 4);
        Eigen::VectorXd c(d);
        for (int j = 0; j < d; ++j) c[j] = u(eng);
        OptimConfig cfg;
        cfg.seed = trial;
        OptimResult res = maximize(
            [&](const Eigen::VectorXd& x) { return -(x - c).squaredNorm(); },
            box(0.0, 1.0, d), Eigen::MatrixXd(0, d), cfg);
        CHECK((res.point - c).norm() < 1e-4);
        CHECK(res.value == doctest::Approx(0.0).epsilon(1e-6));
    }
}

TEST_CASE("beats a dense grid on wiggly 2-d objectives") {
    std::mt19937_64 eng(107);
    std::uniform_real_distribution<double> u(0.5, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        double a = u(eng), b = u(eng), p = u(eng);
        auto f = [&](const Eigen::VectorXd& x) {
            return std::sin(3.0 * a * x[0]) * std::cos(2.0 * b * x[1]) +
                   0.5 * std::sin(5.0 * p * x[0] * x[1]);
        };
        double grid_best = -1e300;
        for (int i = 0; i <= 200; ++i)
            for (int j = 0; j <= 200; ++j) {
                Eigen::VectorXd x(2);
                x << i / 200.0, j / 200.0;
                grid_best = std::max(grid_best, f(x));
            }
        OptimConfig cfg;
        cfg.seed = trial;
        cfg.raw_candidates = 4096;
        cfg.refine_starts = 16;
        OptimResult res = maximize(f, box(0.0, 1.0, 2), Eigen::MatrixXd(0, 2), cfg);
        CHECK(res.value >= grid_best - 2e-3);
    }
}

TEST_CASE("result stays inside the box and away from the design") {
    auto f = [](const Eigen::VectorXd& x) { return x.sum(); };  // max at the corner
    OptimConfig cfg;
    OptimResult res = maximize(f, box(-1.0, 2.0, 3), Eigen::MatrixXd(0, 3), cfg);
    for (int j = 0; j < 3; ++j) {
        CHECK(res.point[j] >= -1.0);
        CHECK(res.point[j] <= 2.0);
    }
    CHECK(res.value == doctest::Approx(6.0).epsilon(1e-8));

    // a design point sitting exactly on the optimum forces a nearby-but-
    // separated answer
    Eigen::MatrixXd design(1, 1);
    design << 0.5;
    OptimConfig sep;
    sep.min_separation = 0.05;  // normalized units on a [0,1] box
    auto g = [](const Eigen::VectorXd& x) { return -(x[0] - 0.5) * (x[0] - 0.5); };
    OptimResult r = maximize(g, box(0.0, 1.0, 1), design, sep);
    CHECK(std::abs(r.point[0] - 0.5) >= 0.05 - 1e-12);
    CHECK(std::abs(r.point[0] - 0.5) < 0.2);
}

TEST_CASE("deterministic given the seed, seed changes the path") {
    auto f = [](const Eigen::VectorXd& x) {
        return std::sin(9.0 * x[0]) + std::cos(7.0 * x[1]);
    };
    OptimConfig cfg;
    cfg.seed = 5;
    OptimResult a = maximize(f, box(0.0, 1.0, 2), Eigen::MatrixXd(0, 2), cfg);
    OptimResult b = maximize(f, box(0.0, 1.0, 2), Eigen::MatrixXd(0, 2), cfg);
    CHECK(a.point == b.point);
    CHECK(a.value == b.value);
}

TEST_CASE("constant objectives return a valid point") {
    OptimConfig cfg;
    OptimResult res =
        maximize([](const Eigen::VectorXd&) { return 1.5; }, box(0.0, 1.0, 2),
                 Eigen::MatrixXd(0, 2), cfg);
    CHECK(res.value == 1.5);
    CHECK(res.point.size() == 2);
    CHECK((res.point.array() >= 0.0).all());
    CHECK((res.point.array() <= 1.0).all());
}

TEST_CASE("projected quasi-Newton core solves a box-constrained quadratic") {
    // maximize -(x0-2)^2 - (x1+1)^2 on [0,1]^2: optimum at (1, 0)
    auto vg = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
        if (g) {
            (*g)(0) = -2.0 * (x[0] - 2.0);
            (*g)(1) = -2.0 * (x[1] + 1.0);
        }
        return -(x[0] - 2.0) * (x[0] - 2.0) - (x[1] + 1.0) * (x[1] + 1.0);
    };
    Eigen::VectorXd x0 = Eigen::VectorXd::Constant(2, 0.5);
    auto [x, v] = detail::lbfgs_box_maximize(vg, x0, Eigen::VectorXd::Zero(2),
                                             Eigen::VectorXd::Ones(2), 100);
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(x[1] == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(v == doctest::Approx(-2.0).epsilon(1e-8));
}
