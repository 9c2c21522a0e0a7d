#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace gradal {

struct GmmComponent {
    double weight = 1.0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Gaussian mixture over a dependent coordinate group, fit by EM.
struct Gmm {
    std::vector<GmmComponent> components;

    int dim() const { return components.empty() ? 0 : static_cast<int>(components[0].mean.size()); }

    static Gmm fit(const Eigen::MatrixXd& samples, int k, std::uint64_t seed,
                   double cov_floor = 1e-8, int max_iters = 200);
    /// BIC-selected component count over k in [1, k_max].
    static Gmm fit_bic(const Eigen::MatrixXd& samples, int k_max, std::uint64_t seed);

    Eigen::MatrixXd sample(int count, std::uint64_t seed) const;
    double log_density(const Eigen::VectorXd& z) const;
};

/// Union-of-ellipsoids support approximation for a dependent input group,
/// gated by a log-sum-exp soft minimum and a sigmoid.
struct SupportModel {
    std::vector<int> group_indices;   // coordinates forming z, within the full d
    Gmm gmm;
    Eigen::VectorXd radii;            // R_i > 0, one per component
    double sharpness = 10.0;          // a
    double dilation = 0.0;            // b >= 0
    // Flips the gate to sigma(a(b - S(z))): ~0 inside the support and ~1
    // outside, the mirror image of the default orientation. Off by default.
    bool inverted_gate = false;

    void validate() const;
};

/// EM-fit a k-component GMM and set each radius at the given quantile of the
/// Mahalanobis distances of the samples assigned to that component.
SupportModel fit_support(const Eigen::MatrixXd& samples, int k,
                         double radius_quantile, std::uint64_t seed);

/// Mahalanobis distance to component i.
double mahalanobis(const SupportModel& support, int i, const Eigen::VectorXd& z);

/// S(z) = log sum_i exp(-(d_i(z) - R_i)), max-shifted for stability.
double soft_min_field(const SupportModel& support, const Eigen::VectorXd& z);

/// Smooth gate in (0,1): ~1 inside the union of ellipsoids, ~0 far outside.
/// Extracts the group coordinates of x.
double penalty(const SupportModel& support, const Eigen::VectorXd& x);

/// Same gate applied directly to a group-space point z.
double penalty_group(const SupportModel& support, const Eigen::VectorXd& z);

}  // namespace gradal
