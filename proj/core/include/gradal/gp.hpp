#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "gradal/kernel.hpp"

namespace gradal {

struct Dataset {
    Eigen::MatrixXd points;   // n x d, natural units
    Eigen::VectorXd outputs;  // n
};

struct FitConfig {
    int restarts = 8;
    int max_iters = 80;
    double lengthscale_lo = 1e-2;     // normalized coordinates
    double lengthscale_hi = 1e2;
    double noise_variance = 0.0;      // fixed observation noise (standardized units)
    double min_separation = 1e-9;     // duplicate-row rejection, normalized
    bool refit_hyperparameters = true;
};

struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
};

/// Immutable fitted surrogate. Inputs are normalized to the unit cube from
/// the declared box bounds and outputs standardized for fitting; all public
/// quantities are reported in natural units.
class GpModel {
  public:
    /// Maximum-likelihood fit with multi-start quasi-Newton ascent in
    /// log-hyperparameter space. Deterministic given seed.
    static GpModel fit(const Dataset& data, const Eigen::MatrixXd& bounds,
                       std::uint64_t seed, const FitConfig& config = {});

    /// Build a model at fixed hyperparameters (kernel given in normalized
    /// coordinates / standardized outputs).
    static GpModel with_hyperparameters(const Dataset& data, const Eigen::MatrixXd& bounds,
                                        const KernelSpec& kernel_normalized,
                                        const FitConfig& config = {});

    Prediction predict(const Eigen::VectorXd& x) const;

    int dim() const { return static_cast<int>(bounds_.rows()); }
    int size() const { return static_cast<int>(design_norm_.rows()); }
    const Eigen::MatrixXd& bounds() const { return bounds_; }
    const Dataset& dataset() const { return data_; }
    double mean_constant() const { return y_mean_; }
    double noise_variance() const { return noise_; }
    double jitter() const { return jitter_; }
    /// Kernel in normalized coordinates / standardized output units.
    const KernelSpec& kernel_normalized() const { return kernel_; }
    /// Kernel hyperparameters expressed in natural units.
    KernelSpec kernel_natural() const;
    double log_marginal_likelihood() const { return lml_; }

    // Internals used by the gradient-field and acquisition modules.
    const Eigen::MatrixXd& design_normalized() const { return design_norm_; }
    const Eigen::VectorXd& alpha() const { return alpha_; }
    const Eigen::LLT<Eigen::MatrixXd>& factorization() const { return llt_; }
    double output_std() const { return y_std_; }
    Eigen::VectorXd to_normalized(const Eigen::VectorXd& x) const;
    Eigen::VectorXd widths() const { return bounds_.col(1) - bounds_.col(0); }
    /// Covariance vector k(X, x) in normalized space.
    Eigen::VectorXd kvec_normalized(const Eigen::VectorXd& xn) const;
    /// Posterior (mean, variance) in standardized/normalized space.
    Prediction predict_normalized(const Eigen::VectorXd& xn) const;
    /// Distance (normalized, Euclidean) from x to the closest design row.
    double separation_normalized(const Eigen::VectorXd& x) const;
    double min_separation() const { return min_sep_; }

  private:
    GpModel() = default;
    static GpModel assemble(const Dataset& data, const Eigen::MatrixXd& bounds,
                            const KernelSpec& kernel, const FitConfig& config);

    Dataset data_;
    Eigen::MatrixXd bounds_;       // d x 2
    Eigen::MatrixXd design_norm_;  // n x d in [0,1]^d
    Eigen::VectorXd y_std_outputs_;
    double y_mean_ = 0.0, y_std_ = 1.0;
    KernelSpec kernel_;            // normalized coordinates
    double noise_ = 0.0;
    double jitter_ = 0.0;
    double min_sep_ = 1e-9;
    double lml_ = 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd alpha_;        // K^-1 y_std
};

/// N_f hypothetical observations at one candidate, sharing a single
/// augmented factorization of the (n+1)-point system.
class FantasyBatch {
  public:
    FantasyBatch(const GpModel& base, const Eigen::VectorXd& x, int count, std::uint64_t seed);

    int count() const { return static_cast<int>(draws_.size()); }
    const Eigen::VectorXd& candidate() const { return x_; }
    /// Hypothetical outputs in natural units.
    double draw(int m) const { return draws_[m]; }
    /// Posterior under fantasy m at a test point (natural units). The
    /// variance is identical across draws.
    Prediction predict(int m, const Eigen::VectorXd& t) const;
    const GpModel& base() const { return *base_; }

    // Standardized-space internals shared by all draws.
    double candidate_variance_normalized() const { return s_; }
    const Eigen::VectorXd& candidate_kvec_solved() const { return kx_solved_; }
    Eigen::VectorXd draws_normalized() const;

  private:
    const GpModel* base_;
    Eigen::VectorXd x_, xn_;
    std::vector<double> draws_;        // natural units
    Eigen::VectorXd kx_solved_;        // K^-1 k(X, x)
    double mu_n_ = 0.0, s_ = 0.0;      // standardized predictive mean/variance (+noise+jitter)
};

}  // namespace gradal
