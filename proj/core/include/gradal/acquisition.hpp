#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>

#include "gradal/gradient_field.hpp"
#include "gradal/support_penalty.hpp"

namespace gradal {

enum class AcquisitionKind {
    PartialMaxVar,
    PartialRedVar,
    GradMaxVar,
    GradVarRed,
    GlobalGradVarRed,
    GlobalGradVarRedKmeans,
    RandomSobol,   // baseline: next low-discrepancy point, no optimization
};

AcquisitionKind acquisition_kind_from_string(const std::string& name);
std::string to_string(AcquisitionKind kind);

struct AcquisitionSpec {
    AcquisitionKind kind = AcquisitionKind::GlobalGradVarRed;
    int fantasy_count = 8;          // N_f
    int site_count = 0;             // N; 0 means 50 d
    int chunk_count = 0;            // C, Kmeans variant only
    bool balanced_chunks = true;
    std::optional<SupportModel> penalty;
    std::uint64_t seed = 0;

    void validate() const;
    int effective_site_count(int d) const { return site_count > 0 ? site_count : 50 * d; }
};

/// Variance of the sum of squared partial derivatives with correlations
/// ignored: sum_j 2 (S_j^2 + 2 mu_j^2 S_j), S_j the j-th marginal gradient
/// variance.
double partial_max_var(const GpModel& model, const Eigen::VectorXd& x);

/// One-step reduction of the same quantity under the frozen-mean look-ahead
/// approximation; deterministic, no sampling.
double partial_red_var(const GpModel& model, const Eigen::VectorXd& x);

/// Var(Z_x^T Z_x) with the full d x d gradient covariance at x.
double grad_max_var(const GpModel& model, const Eigen::VectorXd& x);

/// Fantasy-averaged reduction of Var(Z_x^T Z_x).
double grad_var_red(const GpModel& model, const Eigen::VectorXd& x,
                    int fantasy_count, std::uint64_t seed);

/// Per-iteration cache for the global criterion: base gradient posterior at
/// the shared sites X_s (exact or chunked) plus the quantities reused across
/// candidates. Read-only once built.
class GlobalGradContext {
  public:
    GlobalGradContext(const GpModel& model, const Eigen::MatrixXd& sites);
    GlobalGradContext(const GpModel& model, const Eigen::MatrixXd& sites,
                      const Clustering& clustering);

    double base_variance() const { return base_variance_; }
    const GpModel& model() const { return *model_; }
    const Eigen::MatrixXd& sites() const { return sites_; }
    bool chunked() const { return posterior_.chunked(); }
    const GradientPosterior& posterior() const { return posterior_; }

    /// Var reduction of ||Z_Xs||^2 for candidate x, averaged over fantasies.
    /// The look-ahead covariance is a rank-one downdate shared by all draws.
    double variance_reduction(const Eigen::VectorXd& x, int fantasy_count,
                              std::uint64_t seed) const;

  private:
    void finalize();
    const GpModel* model_;
    Eigen::MatrixXd sites_;
    GradientPosterior posterior_;
    double base_variance_ = 0.0;
    // exact-form caches
    Eigen::VectorXd sigma_mu_;           // Sigma mu
    // per-cluster caches for the chunked form
    std::vector<Eigen::VectorXd> block_mu_, block_sigma_mu_;
};

double global_grad_var_red(const GpModel& model, const Eigen::VectorXd& x,
                           const Eigen::MatrixXd& sites, int fantasy_count,
                           std::uint64_t seed,
                           const Clustering* chunking = nullptr);

/// Dispatcher; applies the support penalty multiplicatively when present.
/// Global kinds require a prebuilt context.
double evaluate(const AcquisitionSpec& spec, const GpModel& model,
                const Eigen::VectorXd& x,
                const GlobalGradContext* context = nullptr);

}  // namespace gradal
