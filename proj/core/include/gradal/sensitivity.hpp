#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

#include "gradal/gp.hpp"
#include "gradal/inputs.hpp"

namespace gradal {

struct SensitivityReport {
    Eigen::VectorXd dgsm;
    Eigen::VectorXd sobol_first;
    Eigen::VectorXd sobol_total;
    double variance = 0.0;
    int mc_size = 0;
    std::uint64_t seed = 0;
};

/// Plug-in DGSM: mean of squared analytic posterior-mean gradients over an
/// input-distribution sample.
Eigen::VectorXd dgsm_plugin(const GpModel& model, const InputModel& inputs,
                            int mc_size, std::uint64_t seed);

/// Analytic gradient of the posterior mean, natural units.
Eigen::VectorXd posterior_mean_gradient(const GpModel& model, const Eigen::VectorXd& x);

using Evaluator = std::function<double(const Eigen::VectorXd&)>;

struct SobolEstimate {
    Eigen::VectorXd first;
    Eigen::VectorXd total;
    double variance = 0.0;
};

/// Saltelli pick-freeze scheme (first order via the covariance estimator,
/// total via Jansen) on an arbitrary evaluator. Requires independent
/// marginals.
SobolEstimate sobol_pickfreeze(const Evaluator& f, const InputModel& inputs,
                               int mc_size, std::uint64_t seed);
/// Same scheme on the GP posterior mean.
SobolEstimate sobol_pickfreeze(const GpModel& model, const InputModel& inputs,
                               int mc_size, std::uint64_t seed);

/// Poincaré constant: closed form for uniform/normal marginals.
double poincare_constant(const Marginal& marginal);
/// Grid supremum of 4 [min(F,1-F)/rho]^2 for user-supplied cdf/pdf.
double poincare_constant_grid(const std::function<double(double)>& cdf,
                              const std::function<double(double)>& pdf,
                              double lo, double hi, int grid_size = 100001);

/// Upper bound C_k D_k / Var on the total Sobol index.
Eigen::VectorXd dgsm_sobol_bound(const Eigen::VectorXd& dgsm,
                                 const Eigen::VectorXd& constants, double variance);

struct Metrics {
    double rmse_dgsm = 0.0;
    double rmse_sobol = 0.0;
    double q2 = 0.0;
};

/// RMSE over input dimensions against reference indices plus predictive Q^2
/// on held-out evaluations.
Metrics metrics(const Eigen::VectorXd& dgsm_estimate, const Eigen::VectorXd& dgsm_reference,
                const Eigen::VectorXd& sobol_estimate, const Eigen::VectorXd& sobol_reference,
                const Eigen::VectorXd& test_truth, const Eigen::VectorXd& test_prediction);

double q_squared(const Eigen::VectorXd& truth, const Eigen::VectorXd& prediction);

}  // namespace gradal
