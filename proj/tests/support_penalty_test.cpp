#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "gradal/support_penalty.hpp"

using namespace gradal;

namespace {

Eigen::MatrixXd gaussian_blob(std::mt19937_64& eng, int m, const Eigen::VectorXd& mean,
                              double sd) {
    std::normal_distribution<double> n(0.0, sd);
    Eigen::MatrixXd x(m, mean.size());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < mean.size(); ++j) x(i, j) = mean[j] + n(eng);
    return x;
}

SupportModel single_component(double radius, double a = 10.0, double b = 0.0) {
    SupportModel s;
    GmmComponent comp;
    comp.weight = 1.0;
    comp.mean = Eigen::VectorXd::Zero(2);
    comp.cov = Eigen::MatrixXd::Identity(2, 2);
    s.gmm.components = {comp};
    s.radii = Eigen::VectorXd::Constant(1, radius);
    s.sharpness = a;
    s.dilation = b;
    s.group_indices = {0, 1};
    return s;
}

}  // namespace

TEST_CASE("GMM radius quantile matches the chi-distribution oracle") {
    std::mt19937_64 eng(5);
    const int m = 6000, s = 3;
    Eigen::MatrixXd samples = gaussian_blob(eng, m, Eigen::VectorXd::Zero(s), 1.0);
    SupportModel support = fit_support(samples, 1, 0.99, 42);
    // 0.99 quantile of the chi distribution with 3 dof
    const double chi_q99 = 3.36820;
    CHECK(support.radii[0] == doctest::Approx(chi_q99).epsilon(0.10));
}

TEST_CASE("two separated blobs recovered by a 2-component fit") {
    std::mt19937_64 eng(9);
    Eigen::VectorXd c1(2), c2(2);
    c1 << 0.0, 0.0;
    c2 << 5.0, 5.0;
    Eigen::MatrixXd x(400, 2);
    x << gaussian_blob(eng, 200, c1, 0.2), gaussian_blob(eng, 200, c2, 0.2);
    Gmm gmm = Gmm::fit(x, 2, 3);
    REQUIRE(gmm.components.size() == 2);
    double d1 = std::min((gmm.components[0].mean - c1).norm(),
                         (gmm.components[1].mean - c1).norm());
    double d2 = std::min((gmm.components[0].mean - c2).norm(),
                         (gmm.components[1].mean - c2).norm());
    CHECK(d1 < 0.1);
    CHECK(d2 < 0.1);
    CHECK(gmm.components[0].weight + gmm.components[1].weight == doctest::Approx(1.0));

    Gmm bic = Gmm::fit_bic(x, 4, 3);
    CHECK(bic.components.size() == 2);  // BIC should prefer the true k
}

TEST_CASE("degenerate samples fall back to the covariance floor") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(50, 2);
    Gmm gmm = Gmm::fit(x, 1, 1, /*cov_floor=*/1e-6);
    CHECK(gmm.components[0].cov(0, 0) == doctest::Approx(1e-6).epsilon(0.5));
    CHECK(gmm.components[0].mean.norm() < 1e-12);
}

TEST_CASE("soft-min field values") {
    SupportModel s = single_component(3.0);
    Eigen::VectorXd z0 = Eigen::VectorXd::Zero(2);
    CHECK(soft_min_field(s, z0) == doctest::Approx(3.0).epsilon(1e-12));
    Eigen::VectorXd zb(2);
    zb << 3.0, 0.0;  // on the boundary, d = R
    CHECK(soft_min_field(s, zb) == doctest::Approx(0.0).epsilon(1e-12));

    // far-apart components: log-sum-exp collapses to the hard max of -s_i
    SupportModel two = single_component(1.0);
    GmmComponent far;
    far.weight = 0.5;
    far.mean = Eigen::VectorXd::Constant(2, 50.0);
    far.cov = Eigen::MatrixXd::Identity(2, 2);
    two.gmm.components.push_back(far);
    two.radii = Eigen::VectorXd::Ones(2);
    Eigen::VectorXd z(2);
    z << 0.5, 0.0;
    double s1 = (z - two.gmm.components[0].mean).norm() - 1.0;
    double s2 = (z - two.gmm.components[1].mean).norm() - 1.0;
    CHECK(soft_min_field(two, z) == doctest::Approx(-std::min(s1, s2)).epsilon(1e-6));
}

TEST_CASE("penalty orientation: interior -> 1, boundary -> 1/2, exterior -> 0") {
    SupportModel s = single_component(3.0, 10.0, 0.0);
    Eigen::VectorXd interior = Eigen::VectorXd::Zero(2);
    CHECK(penalty(s, interior) >= 1.0 - 1e-9);  // sigma(30)
    Eigen::VectorXd boundary(2);
    boundary << 3.0, 0.0;
    CHECK(penalty(s, boundary) == doctest::Approx(0.5).epsilon(1e-12));
    Eigen::VectorXd outside(2);
    outside << 3.0 + 10.0 / s.sharpness, 0.0;  // d = R + b + 10/a
    CHECK(penalty(s, outside) == doctest::Approx(1.0 / (1.0 + std::exp(10.0))).epsilon(1e-6));

    // inverted mode reproduces the opposite orientation
    SupportModel strict = s;
    strict.inverted_gate = true;
    CHECK(penalty(strict, interior) <= 1e-9);
    CHECK(penalty(strict, boundary) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("penalty is bounded, smooth, and uses only group coordinates") {
    SupportModel s = single_component(2.0);
    s.group_indices = {1, 3};
    std::mt19937_64 eng(21);
    std::uniform_real_distribution<double> u(-6.0, 6.0);
    double prev = -1.0;
    for (int i = 0; i < 400; ++i) {
        Eigen::VectorXd x(5);
        for (int j = 0; j < 5; ++j) x[j] = u(eng);
        double p = penalty(s, x);
        CHECK(p > 0.0);
        CHECK(p < 1.0);
        // non-group coordinates must not matter
        Eigen::VectorXd x2 = x;
        x2[0] += 3.0;
        x2[2] -= 2.0;
        x2[4] += 1.0;
        CHECK(penalty(s, x2) == doctest::Approx(p).epsilon(1e-15));
        (void)prev;
    }

    // smoothness along a ray crossing the boundary (a = 10)
    SupportModel ray = single_component(2.0, 10.0, 0.0);
    double last = penalty_group(ray, Eigen::VectorXd::Zero(2));
    for (int i = 1; i <= 1000; ++i) {
        Eigen::VectorXd z(2);
        z << 4.0 * i / 1000.0, 0.0;
        double p = penalty_group(ray, z);
        CHECK(std::abs(p - last) < 1e-1);  // no jumps on a fine grid
        CHECK(p <= last + 1e-12);          // monotone along the ray (k = 1)
        last = p;
    }
}

TEST_CASE("validation catches inconsistent support models") {
    SupportModel s = single_component(1.0);
    CHECK_NOTHROW(s.validate());
    s.radii = Eigen::VectorXd::Zero(1);
    CHECK_THROWS(s.validate());
    s = single_component(1.0);
    s.sharpness = 0.0;
    CHECK_THROWS(s.validate());
    s = single_component(1.0);
    s.group_indices = {2, 2};
    CHECK_THROWS(s.validate());
    CHECK_THROWS(fit_support(Eigen::MatrixXd::Random(5, 2), 1, 0.99, 0));  // m < 10k
}
