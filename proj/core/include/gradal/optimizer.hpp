#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

namespace gradal {

struct OptimConfig {
    int raw_candidates = 0;        // 0 means 512 d
    int refine_starts = 8;
    int max_refine_iters = 60;
    double min_separation = 1e-6;  // normalized
    std::uint64_t seed = 0;

    int effective_raw(int d) const { return raw_candidates > 0 ? raw_candidates : 512 * d; }
};

struct OptimResult {
    Eigen::VectorXd point;
    double value = 0.0;
};

/// Maximize over the box: low-discrepancy raw scan, bounded quasi-Newton
/// refinement of the top starts with central finite differences, rejection
/// of points within min_separation of the design. Deterministic given seed.
OptimResult maximize(const std::function<double(const Eigen::VectorXd&)>& objective,
                     const Eigen::MatrixXd& bounds, const Eigen::MatrixXd& design,
                     const OptimConfig& config);

namespace detail {
/// Projected L-BFGS ascent on [lower, upper]; returns the best iterate.
/// Used both for acquisition refinement and hyperparameter fitting.
std::pair<Eigen::VectorXd, double> lbfgs_box_maximize(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>& value_grad,
    Eigen::VectorXd x0, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
    int max_iters);
}  // namespace detail

}  // namespace gradal
