#include "gradal/support_penalty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "rng_util.hpp"

namespace gradal {

namespace {

double log_mvn_pdf(const Eigen::VectorXd& z, const Eigen::VectorXd& mu,
                   const Eigen::LLT<Eigen::MatrixXd>& llt) {
    const int s = static_cast<int>(z.size());
    Eigen::VectorXd w = llt.matrixL().solve(z - mu);
    double logdet = 0.0;
    for (int i = 0; i < s; ++i) logdet += std::log(llt.matrixL()(i, i));
    return -0.5 * w.squaredNorm() - logdet - 0.5 * s * std::log(2.0 * M_PI);
}

Eigen::LLT<Eigen::MatrixXd> safe_llt(Eigen::MatrixXd cov, double floor) {
    for (int attempt = 0; attempt < 12; ++attempt) {
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() == Eigen::Success) return llt;
        cov.diagonal().array() += floor;
        floor *= 10.0;
    }
    throw std::runtime_error("Gmm: covariance not positive definite after flooring");
}

double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

}  // namespace

Gmm Gmm::fit(const Eigen::MatrixXd& samples, int k, std::uint64_t seed,
             double cov_floor, int max_iters) {
    const int m = static_cast<int>(samples.rows());
    const int s = static_cast<int>(samples.cols());
    if (k < 1 || m < k) throw std::invalid_argument("Gmm::fit: need 1 <= k <= m");

    Eigen::VectorXd mean = samples.colwise().mean();
    Eigen::MatrixXd centered = samples.rowwise() - mean.transpose();
    Eigen::MatrixXd base_cov = centered.transpose() * centered / std::max(m - 1, 1);
    base_cov.diagonal().array() += cov_floor;

    // k-means++-style seeding of the component means.
    auto eng = detail::engine(detail::derive_seed(seed, 0x6e6d));
    std::vector<int> picked = {static_cast<int>(eng() % m)};
    while (static_cast<int>(picked.size()) < k) {
        Eigen::VectorXd mind = Eigen::VectorXd::Constant(m, std::numeric_limits<double>::max());
        for (int i = 0; i < m; ++i)
            for (int p : picked)
                mind[i] = std::min(mind[i], (samples.row(i) - samples.row(p)).squaredNorm());
        double total = mind.sum();
        if (total <= 0.0) {
            picked.push_back(static_cast<int>(eng() % m));
            continue;
        }
        double u = detail::uniform01(eng) * total, acc = 0.0;
        int chosen = m - 1;
        for (int i = 0; i < m; ++i) {
            acc += mind[i];
            if (acc >= u) { chosen = i; break; }
        }
        picked.push_back(chosen);
    }

    Gmm gmm;
    for (int c = 0; c < k; ++c)
        gmm.components.push_back({1.0 / k, samples.row(picked[c]).transpose(), base_cov});

    Eigen::MatrixXd resp(m, k);
    double prev_ll = -std::numeric_limits<double>::max();
    for (int iter = 0; iter < max_iters; ++iter) {
        // E step
        std::vector<Eigen::LLT<Eigen::MatrixXd>> llts;
        for (auto& comp : gmm.components) llts.push_back(safe_llt(comp.cov, cov_floor));
        double ll = 0.0;
        for (int i = 0; i < m; ++i) {
            Eigen::VectorXd lp(k);
            for (int c = 0; c < k; ++c)
                lp[c] = std::log(std::max(gmm.components[c].weight, 1e-300)) +
                        log_mvn_pdf(samples.row(i).transpose(), gmm.components[c].mean, llts[c]);
            double mx = lp.maxCoeff();
            double lse = mx + std::log((lp.array() - mx).exp().sum());
            ll += lse;
            resp.row(i) = (lp.array() - lse).exp();
        }
        // M step
        for (int c = 0; c < k; ++c) {
            double nk = resp.col(c).sum();
            auto& comp = gmm.components[c];
            if (nk < 1e-8) {  // collapsed component: reseed at the worst-fit sample
                int worst = 0;
                resp.col(c).minCoeff(&worst);
                comp = {1.0 / m, samples.row(worst).transpose(), base_cov};
                continue;
            }
            comp.weight = nk / m;
            comp.mean = (samples.transpose() * resp.col(c)) / nk;
            Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(s, s);
            for (int i = 0; i < m; ++i) {
                Eigen::VectorXd diff = samples.row(i).transpose() - comp.mean;
                cov.noalias() += resp(i, c) * diff * diff.transpose();
            }
            comp.cov = cov / nk;
            comp.cov.diagonal().array() += cov_floor;
        }
        if (std::abs(ll - prev_ll) < 1e-9 * (1.0 + std::abs(ll))) break;
        prev_ll = ll;
    }
    return gmm;
}

Gmm Gmm::fit_bic(const Eigen::MatrixXd& samples, int k_max, std::uint64_t seed) {
    const int m = static_cast<int>(samples.rows());
    const int s = static_cast<int>(samples.cols());
    double best_bic = std::numeric_limits<double>::max();
    Gmm best;
    for (int k = 1; k <= k_max && m >= 10 * k; ++k) {
        Gmm g = fit(samples, k, seed);
        double ll = 0.0;
        for (int i = 0; i < m; ++i) ll += g.log_density(samples.row(i).transpose());
        const double params = k * (1 + s + s * (s + 1) / 2.0) - 1;
        const double bic = -2.0 * ll + params * std::log(static_cast<double>(m));
        if (bic < best_bic) { best_bic = bic; best = g; }
    }
    return best;
}

Eigen::MatrixXd Gmm::sample(int count, std::uint64_t seed) const {
    const int s = dim();
    std::vector<Eigen::LLT<Eigen::MatrixXd>> llts;
    for (const auto& comp : components) llts.push_back(safe_llt(comp.cov, 1e-12));
    Eigen::MatrixXd out(count, s);
    for (int i = 0; i < count; ++i) {
        auto eng = detail::engine(detail::derive_seed(seed, 0x6d78, i));
        double u = detail::uniform01(eng), acc = 0.0;
        int c = static_cast<int>(components.size()) - 1;
        for (std::size_t j = 0; j < components.size(); ++j) {
            acc += components[j].weight;
            if (u <= acc) { c = static_cast<int>(j); break; }
        }
        Eigen::VectorXd z(s);
        for (int j = 0; j < s; ++j) z[j] = detail::standard_normal(eng);
        out.row(i) = (components[c].mean +
                      Eigen::MatrixXd(llts[c].matrixL()) * z).transpose();
    }
    return out;
}

double Gmm::log_density(const Eigen::VectorXd& z) const {
    Eigen::VectorXd lp(components.size());
    for (std::size_t c = 0; c < components.size(); ++c) {
        auto llt = safe_llt(components[c].cov, 1e-12);
        lp[c] = std::log(std::max(components[c].weight, 1e-300)) +
                log_mvn_pdf(z, components[c].mean, llt);
    }
    double mx = lp.maxCoeff();
    return mx + std::log((lp.array() - mx).exp().sum());
}

void SupportModel::validate() const {
    if (gmm.components.empty()) throw std::invalid_argument("SupportModel: empty mixture");
    if (radii.size() != static_cast<Eigen::Index>(gmm.components.size()))
        throw std::invalid_argument("SupportModel: one radius per component required");
    if (!(radii.array() > 0.0).all())
        throw std::invalid_argument("SupportModel: radii must be positive");
    if (!(sharpness > 0.0)) throw std::invalid_argument("SupportModel: sharpness must be > 0");
    if (dilation < 0.0) throw std::invalid_argument("SupportModel: dilation must be >= 0");
    std::vector<int> sorted = group_indices;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::invalid_argument("SupportModel: duplicate group indices");
}

SupportModel fit_support(const Eigen::MatrixXd& samples, int k,
                         double radius_quantile, std::uint64_t seed) {
    const int m = static_cast<int>(samples.rows());
    if (m < 10 * k) throw std::invalid_argument("fit_support: need at least 10k samples");
    SupportModel support;
    support.gmm = Gmm::fit(samples, k, seed);
    const int kk = static_cast<int>(support.gmm.components.size());
    support.radii.resize(kk);

    // Assign each sample to its closest component in Mahalanobis distance,
    // then set R_i at the requested quantile of assigned distances.
    std::vector<Eigen::LLT<Eigen::MatrixXd>> llts;
    for (const auto& comp : support.gmm.components) llts.push_back(safe_llt(comp.cov, 1e-12));
    std::vector<std::vector<double>> dists(kk);
    for (int i = 0; i < m; ++i) {
        double best = std::numeric_limits<double>::max();
        int who = 0;
        for (int c = 0; c < kk; ++c) {
            double d = llts[c].matrixL()
                           .solve(samples.row(i).transpose() - support.gmm.components[c].mean)
                           .norm();
            if (d < best) { best = d; who = c; }
        }
        dists[who].push_back(best);
    }
    for (int c = 0; c < kk; ++c) {
        auto& v = dists[c];
        if (v.size() < 2) {
            // Degenerate assignment; fall back to all-sample distances.
            v.clear();
            for (int i = 0; i < m; ++i)
                v.push_back(llts[c].matrixL()
                                .solve(samples.row(i).transpose() -
                                       support.gmm.components[c].mean)
                                .norm());
        }
        std::sort(v.begin(), v.end());
        double pos = radius_quantile * (v.size() - 1);
        int lo = static_cast<int>(pos);
        int hi = std::min<int>(lo + 1, static_cast<int>(v.size()) - 1);
        double r = v[lo] + (pos - lo) * (v[hi] - v[lo]);
        support.radii[c] = std::max(r, 1e-6);
    }
    return support;
}

double mahalanobis(const SupportModel& support, int i, const Eigen::VectorXd& z) {
    const auto& comp = support.gmm.components.at(i);
    auto llt = safe_llt(comp.cov, 1e-12);
    return llt.matrixL().solve(z - comp.mean).norm();
}

double soft_min_field(const SupportModel& support, const Eigen::VectorXd& z) {
    const int k = static_cast<int>(support.gmm.components.size());
    Eigen::VectorXd neg_s(k);
    for (int i = 0; i < k; ++i)
        neg_s[i] = support.radii[i] - mahalanobis(support, i, z);
    double mx = neg_s.maxCoeff();
    return mx + std::log((neg_s.array() - mx).exp().sum());
}

double penalty_group(const SupportModel& support, const Eigen::VectorXd& z) {
    const double S = soft_min_field(support, z);
    const double a = support.sharpness, b = support.dilation;
    return support.inverted_gate ? sigmoid(a * (b - S)) : sigmoid(a * (S + b));
}

double penalty(const SupportModel& support, const Eigen::VectorXd& x) {
    Eigen::VectorXd z(support.group_indices.size());
    for (std::size_t p = 0; p < support.group_indices.size(); ++p)
        z[p] = x[support.group_indices[p]];
    return penalty_group(support, z);
}

}  // namespace gradal
