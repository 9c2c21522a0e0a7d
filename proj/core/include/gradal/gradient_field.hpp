#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "gradal/gp.hpp"

namespace gradal {

/// Joint posterior of the stacked gradient at N sites, row index
/// r = (l-1)d + j for site l, coordinate j. Either the full Nd x Nd
/// covariance or per-cluster diagonal blocks. Natural units.
struct GradientPosterior {
    Eigen::MatrixXd sites;                      // N x d
    Eigen::VectorXd mean;                       // Nd
    Eigen::MatrixXd cov;                        // Nd x Nd; empty in block form
    std::vector<Eigen::MatrixXd> blocks;        // per-cluster covariance blocks
    std::vector<std::vector<int>> cluster_members;  // site indices per cluster

    bool chunked() const { return !blocks.empty(); }
    int site_count() const { return static_cast<int>(sites.rows()); }
    int dim() const { return static_cast<int>(sites.cols()); }
};

struct Clustering {
    std::vector<int> assignment;   // N entries in [0, C)
    std::vector<int> sizes;        // n_1..n_C
    double delta = 0.0;            // min_{i!=j} Delta_ij; +inf when C = 1
    Eigen::MatrixXd delta_pairs;   // C x C, scaled distances

    int cluster_count() const { return static_cast<int>(sizes.size()); }
    bool balanced() const;
};

/// Computable bound on the exact-vs-chunked variance gap.
struct BoundCertificate {
    double frob_bound = 0.0;    // on ||E||_F^2
    double spec_bound = 0.0;    // on ||E||_2
    double total_bound = 0.0;   // 2 frob + 4 ||mu||^2 spec
    double frob_bound_pairwise = 0.0;  // tighter sum_{i!=j} n_i n_j h(Delta_ij)
    std::optional<double> exact_error;
};

/// Exact stacked gradient posterior at the given sites.
GradientPosterior gradient_posterior(const GpModel& model, const Eigen::MatrixXd& sites);

/// Var(Z^T Z) = 2 Tr(Sigma^2) + 4 mu^T Sigma mu for the exact form.
double quad_form_variance(const GradientPosterior& posterior);

/// KMeans (Lloyd) in normalized input space under the kernel's scaled
/// metric; balanced mode enforces |n_i - n_j| <= 1 via capacity-constrained
/// assignment. Deterministic given seed.
Clustering cluster_sites(const GpModel& model, const Eigen::MatrixXd& sites,
                         int cluster_count, bool balanced, std::uint64_t seed);

/// Within-cluster blocks only; cross blocks are never materialized.
GradientPosterior chunked_gradient_posterior(const GpModel& model,
                                             const Eigen::MatrixXd& sites,
                                             const Clustering& clustering);

/// Sum over clusters of 2 Tr((Sigma_ii)^2) + 4 mu_i^T Sigma_ii mu_i.
double chunked_quad_form_variance(const GradientPosterior& block_posterior);

/// Certificate on |V - Vtilde| for a fixed clustering, from the
/// Frobenius envelope h at the inter-cluster separations.
BoundCertificate error_certificate(const KernelSpec& kernel, const Clustering& clustering,
                                   double mean_norm_sq);

/// Smallest C whose block storage fits the cap (entries), by enumeration of
/// balanced sizes. Heuristic guidance; throws if even C = N does not fit.
int suggest_chunk_count(std::size_t memory_cap_entries, int site_count, int dim);

}  // namespace gradal
