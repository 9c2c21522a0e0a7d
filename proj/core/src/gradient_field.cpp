#include "gradal/gradient_field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "rng_util.hpp"

namespace gradal {

namespace {

// Exact covariance assembly is intended for moderate site counts; beyond
// this the chunked path should be used.
constexpr int kMaxExactRows = 8000;

// Stacked prior cross-covariance grad(site) vs training values, normalized
// units: rows (l-1)d+j, columns the n training points.
Eigen::MatrixXd grad_cross_matrix(const GpModel& model, const Eigen::MatrixXd& sites_norm) {
    const int n = model.size();
    const int d = model.dim();
    const int nsites = static_cast<int>(sites_norm.rows());
    const auto& kernel = model.kernel_normalized();
    Eigen::MatrixXd g(nsites * d, n);
    for (int l = 0; l < nsites; ++l)
        for (int i = 0; i < n; ++i)
            g.block(l * d, i, d, 1) = kernel_grad_x(
                kernel, sites_norm.row(l).transpose(),
                model.design_normalized().row(i).transpose());
    return g;
}

// Scale from normalized gradient rows to natural units: y_std / width_j.
Eigen::VectorXd stacked_scale(const GpModel& model, int nsites) {
    const int d = model.dim();
    Eigen::VectorXd w = model.widths();
    Eigen::VectorXd s(nsites * d);
    for (int l = 0; l < nsites; ++l)
        for (int j = 0; j < d; ++j)
            s[l * d + j] = model.output_std() / (w[j] > 0.0 ? w[j] : 1.0);
    return s;
}

Eigen::MatrixXd sites_to_normalized(const GpModel& model, const Eigen::MatrixXd& sites) {
    Eigen::MatrixXd out(sites.rows(), sites.cols());
    for (int l = 0; l < sites.rows(); ++l)
        out.row(l) = model.to_normalized(sites.row(l).transpose()).transpose();
    return out;
}

// Posterior covariance block between the stacked gradients of two site
// subsets (normalized units). gsolved = K^-1 G^T for the column subset.
Eigen::MatrixXd posterior_grad_block(const GpModel& model,
                                     const Eigen::MatrixXd& sites_norm_a,
                                     const Eigen::MatrixXd& sites_norm_b,
                                     const Eigen::MatrixXd& ga,
                                     const Eigen::MatrixXd& gb) {
    const int d = model.dim();
    const int na = static_cast<int>(sites_norm_a.rows());
    const int nb = static_cast<int>(sites_norm_b.rows());
    const auto& kernel = model.kernel_normalized();
    Eigen::MatrixXd h(na * d, nb * d);
    for (int l = 0; l < na; ++l)
        for (int m = 0; m < nb; ++m)
            h.block(l * d, m * d, d, d) = kernel_cross_hessian(
                kernel, sites_norm_a.row(l).transpose(), sites_norm_b.row(m).transpose());
    h.noalias() -= ga * model.factorization().solve(gb.transpose());
    return h;
}

}  // namespace

GradientPosterior gradient_posterior(const GpModel& model, const Eigen::MatrixXd& sites) {
    const int d = model.dim();
    const int nsites = static_cast<int>(sites.rows());
    if (nsites < 1) throw std::invalid_argument("gradient_posterior: need N >= 1");
    if (sites.cols() != d) throw std::invalid_argument("gradient_posterior: dimension mismatch");
    if (nsites * d > kMaxExactRows)
        throw std::runtime_error(
            "gradient_posterior: exact covariance too large; use the chunked path");

    Eigen::MatrixXd sn = sites_to_normalized(model, sites);
    Eigen::MatrixXd g = grad_cross_matrix(model, sn);
    Eigen::VectorXd scale = stacked_scale(model, nsites);

    GradientPosterior out;
    out.sites = sites;
    out.mean = scale.asDiagonal() * (g * model.alpha());
    Eigen::MatrixXd cov = posterior_grad_block(model, sn, sn, g, g);
    cov = scale.asDiagonal() * cov * scale.asDiagonal();
    out.cov = 0.5 * (cov + cov.transpose());
    // Jitter relative to the mean diagonal keeps the matrix numerically PSD.
    double mean_diag = out.cov.diagonal().mean();
    out.cov.diagonal().array() += 1e-12 * std::max(mean_diag, 1e-300);
    return out;
}

double quad_form_variance(const GradientPosterior& posterior) {
    if (posterior.chunked())
        throw std::invalid_argument(
            "quad_form_variance: block posterior; use chunked_quad_form_variance");
    return 2.0 * posterior.cov.squaredNorm() +
           4.0 * posterior.mean.dot(posterior.cov * posterior.mean);
}

bool Clustering::balanced() const {
    auto [mn, mx] = std::minmax_element(sizes.begin(), sizes.end());
    return *mx - *mn <= 1;
}

Clustering cluster_sites(const GpModel& model, const Eigen::MatrixXd& sites,
                         int cluster_count, bool balanced, std::uint64_t seed) {
    const int n = static_cast<int>(sites.rows());
    if (cluster_count < 1 || cluster_count > n)
        throw std::invalid_argument("cluster_sites: need 1 <= C <= N");

    // Work in the kernel's scaled metric: u = x_norm / theta.
    Eigen::MatrixXd sn = sites_to_normalized(model, sites);
    const auto& theta = model.kernel_normalized().lengthscales;
    Eigen::MatrixXd u = sn.array().rowwise() / theta.transpose().array();

    Clustering out;
    out.assignment.assign(n, 0);
    const int c = cluster_count;

    if (c > 1) {
        // k-means++ init.
        auto eng = detail::engine(detail::derive_seed(seed, 0x6b6d));
        std::vector<int> centers_idx = {static_cast<int>(eng() % n)};
        while (static_cast<int>(centers_idx.size()) < c) {
            Eigen::VectorXd mind = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::max());
            for (int i = 0; i < n; ++i)
                for (int p : centers_idx)
                    mind[i] = std::min(mind[i], (u.row(i) - u.row(p)).squaredNorm());
            double total = mind.sum();
            int chosen = static_cast<int>(eng() % n);
            if (total > 0.0) {
                double t = detail::uniform01(eng) * total, acc = 0.0;
                for (int i = 0; i < n; ++i) {
                    acc += mind[i];
                    if (acc >= t) { chosen = i; break; }
                }
            }
            centers_idx.push_back(chosen);
        }
        Eigen::MatrixXd centers(c, u.cols());
        for (int j = 0; j < c; ++j) centers.row(j) = u.row(centers_idx[j]);

        // Balanced sizes are floor(N/C) or floor(N/C)+1 with exactly
        // N mod C clusters at the larger size.
        const int floor_cap = n / c;
        const int extra = n % c;
        for (int iter = 0; iter < 100; ++iter) {
            std::vector<int> next(n, -1);
            if (!balanced) {
                for (int i = 0; i < n; ++i) {
                    int best = 0;
                    double bestd = std::numeric_limits<double>::max();
                    for (int j = 0; j < c; ++j) {
                        double dd = (u.row(i) - centers.row(j)).squaredNorm();
                        if (dd < bestd) { bestd = dd; best = j; }
                    }
                    next[i] = best;
                }
            } else {
                // Greedy capacity-constrained assignment in order of the
                // margin between best and second-best center.
                Eigen::MatrixXd dist(n, c);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < c; ++j)
                        dist(i, j) = (u.row(i) - centers.row(j)).squaredNorm();
                std::vector<int> order(n);
                std::iota(order.begin(), order.end(), 0);
                std::vector<double> margin(n);
                for (int i = 0; i < n; ++i) {
                    Eigen::VectorXd row = dist.row(i);
                    std::sort(row.data(), row.data() + c);
                    margin[i] = c > 1 ? row[1] - row[0] : 0.0;
                }
                std::stable_sort(order.begin(), order.end(),
                                 [&](int a, int b) { return margin[a] > margin[b]; });
                std::vector<int> load(c, 0);
                int big_used = 0;
                for (int i : order) {
                    int best = -1;
                    double bestd = std::numeric_limits<double>::max();
                    for (int j = 0; j < c; ++j) {
                        bool open = load[j] < floor_cap ||
                                    (load[j] == floor_cap && big_used < extra);
                        if (!open) continue;
                        if (dist(i, j) < bestd) { bestd = dist(i, j); best = j; }
                    }
                    next[i] = best;
                    if (load[best] >= floor_cap) ++big_used;
                    ++load[best];
                }
            }
            bool changed = next != out.assignment;
            out.assignment = next;
            // Recompute centers.
            Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(c, u.cols());
            std::vector<int> counts(c, 0);
            for (int i = 0; i < n; ++i) {
                sums.row(out.assignment[i]) += u.row(i);
                ++counts[out.assignment[i]];
            }
            for (int j = 0; j < c; ++j)
                if (counts[j] > 0) centers.row(j) = sums.row(j) / counts[j];
            if (!changed) break;
        }
    }

    out.sizes.assign(c, 0);
    for (int a : out.assignment) ++out.sizes[a];

    // Inter-cluster separations in the scaled metric.
    out.delta_pairs = Eigen::MatrixXd::Zero(c, c);
    if (c == 1) {
        out.delta = std::numeric_limits<double>::infinity();
    } else {
        out.delta_pairs.setConstant(std::numeric_limits<double>::infinity());
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < i; ++j) {
                int a = out.assignment[i], b = out.assignment[j];
                if (a == b) continue;
                double r = (u.row(i) - u.row(j)).norm();
                out.delta_pairs(a, b) = std::min(out.delta_pairs(a, b), r);
                out.delta_pairs(b, a) = out.delta_pairs(a, b);
            }
        out.delta = std::numeric_limits<double>::infinity();
        for (int a = 0; a < c; ++a)
            for (int b = 0; b < a; ++b)
                out.delta = std::min(out.delta, out.delta_pairs(a, b));
        for (int a = 0; a < c; ++a) out.delta_pairs(a, a) = 0.0;
    }
    return out;
}

GradientPosterior chunked_gradient_posterior(const GpModel& model,
                                             const Eigen::MatrixXd& sites,
                                             const Clustering& clustering) {
    const int d = model.dim();
    const int nsites = static_cast<int>(sites.rows());
    if (static_cast<int>(clustering.assignment.size()) != nsites)
        throw std::invalid_argument("chunked_gradient_posterior: clustering size mismatch");
    const int c = clustering.cluster_count();

    Eigen::MatrixXd sn = sites_to_normalized(model, sites);
    Eigen::MatrixXd g = grad_cross_matrix(model, sn);
    Eigen::VectorXd scale = stacked_scale(model, nsites);

    GradientPosterior out;
    out.sites = sites;
    out.mean = scale.asDiagonal() * (g * model.alpha());
    out.cluster_members.resize(c);
    for (int i = 0; i < nsites; ++i)
        out.cluster_members[clustering.assignment[i]].push_back(i);

    out.blocks.resize(c);
    for (int ci = 0; ci < c; ++ci) {
        const auto& members = out.cluster_members[ci];
        const int ni = static_cast<int>(members.size());
        Eigen::MatrixXd sub_sites(ni, d);
        Eigen::MatrixXd sub_g(ni * d, model.size());
        Eigen::VectorXd sub_scale(ni * d);
        for (int p = 0; p < ni; ++p) {
            sub_sites.row(p) = sn.row(members[p]);
            sub_g.middleRows(p * d, d) = g.middleRows(members[p] * d, d);
            sub_scale.segment(p * d, d) = scale.segment(members[p] * d, d);
        }
        Eigen::MatrixXd block = posterior_grad_block(model, sub_sites, sub_sites, sub_g, sub_g);
        block = sub_scale.asDiagonal() * block * sub_scale.asDiagonal();
        out.blocks[ci] = 0.5 * (block + block.transpose());
        double mean_diag = out.blocks[ci].diagonal().mean();
        out.blocks[ci].diagonal().array() += 1e-12 * std::max(mean_diag, 1e-300);
    }
    return out;
}

double chunked_quad_form_variance(const GradientPosterior& posterior) {
    if (!posterior.chunked())
        throw std::invalid_argument("chunked_quad_form_variance: posterior is not in block form");
    const int d = posterior.dim();
    double total = 0.0;
    for (std::size_t ci = 0; ci < posterior.blocks.size(); ++ci) {
        const auto& members = posterior.cluster_members[ci];
        const int ni = static_cast<int>(members.size());
        Eigen::VectorXd mu(ni * d);
        for (int p = 0; p < ni; ++p)
            mu.segment(p * d, d) = posterior.mean.segment(members[p] * d, d);
        const auto& block = posterior.blocks[ci];
        total += 2.0 * block.squaredNorm() + 4.0 * mu.dot(block * mu);
    }
    return total;
}

BoundCertificate error_certificate(const KernelSpec& kernel, const Clustering& clustering,
                                   double mean_norm_sq) {
    BoundCertificate cert;
    const int c = clustering.cluster_count();
    if (c == 1) return cert;  // no discarded blocks, exact-zero certificate
    if (!std::isfinite(clustering.delta))
        throw std::invalid_argument("error_certificate: clustering has no finite delta");

    const int n = std::accumulate(clustering.sizes.begin(), clustering.sizes.end(), 0);
    double sum_sq = 0.0;
    int n_max = 0;
    for (int s : clustering.sizes) {
        sum_sq += static_cast<double>(s) * s;
        n_max = std::max(n_max, s);
    }
    const double h_delta = frobenius_envelope_h(kernel, clustering.delta);
    cert.frob_bound = (static_cast<double>(n) * n - sum_sq) * h_delta;

    double b;
    if (clustering.balanced())
        b = static_cast<double>(n) * (1.0 - 1.0 / c);
    else
        b = (static_cast<double>(n) + static_cast<double>(c - 2) * n_max) / 2.0;
    cert.spec_bound = b * std::sqrt(h_delta);
    cert.total_bound = 2.0 * cert.frob_bound + 4.0 * mean_norm_sq * cert.spec_bound;

    cert.frob_bound_pairwise = 0.0;
    for (int i = 0; i < c; ++i)
        for (int j = 0; j < c; ++j)
            if (i != j)
                cert.frob_bound_pairwise +=
                    static_cast<double>(clustering.sizes[i]) * clustering.sizes[j] *
                    frobenius_envelope_h(kernel, clustering.delta_pairs(i, j));
    return cert;
}

int suggest_chunk_count(std::size_t memory_cap_entries, int site_count, int dim) {
    for (int c = 1; c <= site_count; ++c) {
        // Balanced sizes for C clusters.
        const int base = site_count / c, extra = site_count % c;
        std::size_t entries = 0;
        for (int i = 0; i < c; ++i) {
            std::size_t ni = static_cast<std::size_t>(base + (i < extra ? 1 : 0));
            entries += (ni * dim) * (ni * dim);
        }
        if (entries <= memory_cap_entries) return c;
    }
    throw std::invalid_argument(
        "suggest_chunk_count: memory cap below singleton block storage");
}

}  // namespace gradal
