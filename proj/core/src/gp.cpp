#include "gradal/gp.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gradal/inputs.hpp"
#include "gradal/optimizer.hpp"
#include "rng_util.hpp"

namespace gradal {

namespace {

constexpr double kJitterStart = 1e-10;
constexpr double kJitterMax = 1e-4;

Eigen::MatrixXd normalize_design(const Eigen::MatrixXd& points, const Eigen::MatrixXd& bounds) {
    const int n = static_cast<int>(points.rows());
    const int d = static_cast<int>(points.cols());
    Eigen::MatrixXd out(n, d);
    for (int j = 0; j < d; ++j) {
        double w = bounds(j, 1) - bounds(j, 0);
        if (w <= 0.0) w = 1.0;
        out.col(j) = (points.col(j).array() - bounds(j, 0)) / w;
    }
    return out;
}

Eigen::MatrixXd gram(const KernelSpec& kernel, const Eigen::MatrixXd& x) {
    const int n = static_cast<int>(x.rows());
    Eigen::MatrixXd k(n, n);
    for (int i = 0; i < n; ++i) {
        k(i, i) = kernel.output_scale;
        for (int j = 0; j < i; ++j) {
            double v = kernel_value(kernel, x.row(i).transpose(), x.row(j).transpose());
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

struct Factorized {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter;
};

Factorized factorize_with_jitter(const Eigen::MatrixXd& k, double noise) {
    for (double jitter = kJitterStart; jitter <= kJitterMax * 1.0001; jitter *= 10.0) {
        Eigen::MatrixXd kj = k;
        kj.diagonal().array() += noise + jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(kj);
        if (llt.info() == Eigen::Success) return {std::move(llt), jitter};
    }
    throw std::runtime_error(
        "GpModel: Cholesky factorization failed after jitter escalation; "
        "design is ill-conditioned");
}

// Log marginal likelihood and its gradient with respect to
// (log theta_1..d, log sigma^2), zero-mean standardized outputs.
double lml_value_grad(const Eigen::MatrixXd& xn, const Eigen::VectorXd& y, double noise,
                      const Eigen::VectorXd& log_params, Eigen::VectorXd* grad) {
    const int n = static_cast<int>(xn.rows());
    const int d = static_cast<int>(xn.cols());
    KernelSpec kernel{std::exp(log_params[d]), log_params.head(d).array().exp().matrix()};
    Eigen::MatrixXd k = gram(kernel, xn);
    Factorized fac;
    try {
        fac = factorize_with_jitter(k, noise);
    } catch (const std::runtime_error&) {
        if (grad) grad->setZero(d + 1);
        return -std::numeric_limits<double>::infinity();
    }
    Eigen::VectorXd alpha = fac.llt.solve(y);
    double logdet = 0.0;
    for (int i = 0; i < n; ++i) logdet += std::log(fac.llt.matrixL()(i, i));
    double lml = -0.5 * y.dot(alpha) - logdet - 0.5 * n * std::log(2.0 * M_PI);
    if (grad) {
        grad->resize(d + 1);
        Eigen::MatrixXd kinv = fac.llt.solve(Eigen::MatrixXd::Identity(n, n));
        Eigen::MatrixXd w = alpha * alpha.transpose() - kinv;
        // d k / d log sigma^2 is the noiseless Gram matrix itself.
        (*grad)[d] = 0.5 * (w.array() * k.array()).sum();
        const double sqrt5 = 2.2360679774997896964;
        const double amp = kernel.amplitude();
        for (int j = 0; j < d; ++j) {
            Eigen::MatrixXd dk(n, n);
            for (int a = 0; a < n; ++a) {
                dk(a, a) = 0.0;
                for (int b = 0; b < a; ++b) {
                    double r = scaled_distance(kernel, xn.row(a).transpose(),
                                               xn.row(b).transpose());
                    double dj = (xn(a, j) - xn(b, j)) / kernel.lengthscales[j];
                    // d k / d log theta_j = A (1+sqrt5 r) e^{-sqrt5 r} (delta_j/theta_j)^2
                    double v = amp * (1.0 + sqrt5 * r) * std::exp(-sqrt5 * r) * dj * dj;
                    dk(a, b) = v;
                    dk(b, a) = v;
                }
            }
            (*grad)[j] = 0.5 * (w.array() * dk.array()).sum();
        }
    }
    return lml;
}

}  // namespace

GpModel GpModel::assemble(const Dataset& data, const Eigen::MatrixXd& bounds,
                          const KernelSpec& kernel, const FitConfig& config) {
    const int n = static_cast<int>(data.points.rows());
    if (n < 2) throw std::invalid_argument("GpModel: need n >= 2 observations");
    if (data.outputs.size() != n)
        throw std::invalid_argument("GpModel: points/outputs size mismatch");
    if (bounds.rows() != data.points.cols() || bounds.cols() != 2)
        throw std::invalid_argument("GpModel: bounds must be d x 2");
    kernel.validate();

    GpModel m;
    m.data_ = data;
    m.bounds_ = bounds;
    m.design_norm_ = normalize_design(data.points, bounds);
    m.min_sep_ = config.min_separation;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j)
            if ((m.design_norm_.row(i) - m.design_norm_.row(j)).norm() < config.min_separation)
                throw std::invalid_argument("GpModel: duplicate design rows within minimum separation");

    m.y_mean_ = data.outputs.mean();
    double var = (data.outputs.array() - m.y_mean_).square().sum() / std::max(n - 1, 1);
    m.y_std_ = var > 0.0 ? std::sqrt(var) : 1.0;
    m.y_std_outputs_ = (data.outputs.array() - m.y_mean_) / m.y_std_;

    m.kernel_ = kernel;
    m.noise_ = config.noise_variance;
    Eigen::MatrixXd k = gram(kernel, m.design_norm_);
    auto fac = factorize_with_jitter(k, m.noise_);
    m.llt_ = std::move(fac.llt);
    m.jitter_ = fac.jitter;
    m.alpha_ = m.llt_.solve(m.y_std_outputs_);
    double logdet = 0.0;
    for (int i = 0; i < n; ++i) logdet += std::log(m.llt_.matrixL()(i, i));
    m.lml_ = -0.5 * m.y_std_outputs_.dot(m.alpha_) - logdet - 0.5 * n * std::log(2.0 * M_PI);
    return m;
}

GpModel GpModel::with_hyperparameters(const Dataset& data, const Eigen::MatrixXd& bounds,
                                      const KernelSpec& kernel_normalized,
                                      const FitConfig& config) {
    return assemble(data, bounds, kernel_normalized, config);
}

GpModel GpModel::fit(const Dataset& data, const Eigen::MatrixXd& bounds,
                     std::uint64_t seed, const FitConfig& config) {
    const int d = static_cast<int>(data.points.cols());
    Eigen::MatrixXd xn = normalize_design(data.points, bounds);
    const double mean = data.outputs.mean();
    double var = (data.outputs.array() - mean).square().sum() /
                 std::max<int>(static_cast<int>(data.outputs.size()) - 1, 1);
    const double y_std = var > 0.0 ? std::sqrt(var) : 1.0;
    Eigen::VectorXd y = (data.outputs.array() - mean) / y_std;

    Eigen::VectorXd lower(d + 1), upper(d + 1);
    lower.head(d).setConstant(std::log(config.lengthscale_lo));
    upper.head(d).setConstant(std::log(config.lengthscale_hi));
    lower[d] = std::log(1e-4);
    upper[d] = std::log(1e3);

    auto objective = [&](const Eigen::VectorXd& p, Eigen::VectorXd* g) {
        return lml_value_grad(xn, y, config.noise_variance, p, g);
    };

    // Multi-start: a canonical start plus low-discrepancy restarts in
    // log-hyperparameter space.
    std::vector<Eigen::VectorXd> starts;
    Eigen::VectorXd p0(d + 1);
    p0.head(d).setConstant(std::log(0.3));
    p0[d] = 0.0;
    starts.push_back(p0);
    if (config.restarts > 1) {
        SobolSequence seq(d + 1, /*scrambled=*/true, detail::derive_seed(seed, 0xf17));
        Eigen::MatrixXd u = seq.points(config.restarts - 1, 1);
        Eigen::VectorXd rlo(d + 1), rhi(d + 1);
        rlo.head(d).setConstant(std::log(std::max(0.05, config.lengthscale_lo)));
        rhi.head(d).setConstant(std::log(std::min(2.0, config.lengthscale_hi)));
        rlo[d] = std::log(0.1);
        rhi[d] = std::log(10.0);
        for (int i = 0; i < config.restarts - 1; ++i)
            starts.push_back(rlo + u.row(i).transpose().cwiseProduct(rhi - rlo));
    }

    Eigen::VectorXd best_p = p0;
    double best_val = -std::numeric_limits<double>::infinity();
    for (const auto& start : starts) {
        auto [p, val] =
            detail::lbfgs_box_maximize(objective, start, lower, upper, config.max_iters);
        if (val > best_val) {
            best_val = val;
            best_p = p;
        }
    }
    KernelSpec kernel{std::exp(best_p[d]), best_p.head(d).array().exp().matrix()};
    return assemble(data, bounds, kernel, config);
}

KernelSpec GpModel::kernel_natural() const {
    KernelSpec k = kernel_;
    k.output_scale *= y_std_ * y_std_;
    Eigen::VectorXd w = widths();
    for (int j = 0; j < dim(); ++j) {
        if (w[j] <= 0.0) w[j] = 1.0;
        k.lengthscales[j] *= w[j];
    }
    return k;
}

Eigen::VectorXd GpModel::to_normalized(const Eigen::VectorXd& x) const {
    if (x.size() != dim()) throw std::invalid_argument("GpModel: point dimension mismatch");
    Eigen::VectorXd out(dim());
    for (int j = 0; j < dim(); ++j) {
        double w = bounds_(j, 1) - bounds_(j, 0);
        if (w <= 0.0) w = 1.0;
        out[j] = (x[j] - bounds_(j, 0)) / w;
    }
    return out;
}

Eigen::VectorXd GpModel::kvec_normalized(const Eigen::VectorXd& xn) const {
    const int n = size();
    Eigen::VectorXd k(n);
    for (int i = 0; i < n; ++i)
        k[i] = kernel_value(kernel_, xn, design_norm_.row(i).transpose());
    return k;
}

Prediction GpModel::predict_normalized(const Eigen::VectorXd& xn) const {
    Eigen::VectorXd k = kvec_normalized(xn);
    Eigen::VectorXd v = llt_.matrixL().solve(k);
    double variance = kernel_.output_scale - v.squaredNorm();
    return {k.dot(alpha_), std::max(variance, 0.0)};
}

Prediction GpModel::predict(const Eigen::VectorXd& x) const {
    Prediction p = predict_normalized(to_normalized(x));
    return {y_mean_ + y_std_ * p.mean, y_std_ * y_std_ * p.variance};
}

double GpModel::separation_normalized(const Eigen::VectorXd& x) const {
    Eigen::VectorXd xn = to_normalized(x);
    return (design_norm_.rowwise() - xn.transpose()).rowwise().norm().minCoeff();
}

FantasyBatch::FantasyBatch(const GpModel& base, const Eigen::VectorXd& x, int count,
                           std::uint64_t seed)
    : base_(&base), x_(x) {
    if (count < 1) throw std::invalid_argument("FantasyBatch: need count >= 1");
    xn_ = base.to_normalized(x);
    if (base.separation_normalized(x) < base.min_separation())
        throw std::runtime_error(
            "FantasyBatch: candidate duplicates a training point; it adds no information");
    Eigen::VectorXd k = base.kvec_normalized(xn_);
    kx_solved_ = base.factorization().solve(k);
    Prediction pn = base.predict_normalized(xn_);
    mu_n_ = pn.mean;
    s_ = pn.variance + base.noise_variance() + base.jitter();
    const double sd = std::sqrt(std::max(pn.variance, 0.0));
    draws_.resize(count);
    auto eng = detail::engine(detail::derive_seed(seed, 0xfa27a5));
    for (int m = 0; m < count; ++m) {
        double yn = mu_n_ + sd * detail::standard_normal(eng);
        draws_[m] = base.mean_constant() + base.output_std() * yn;
    }
}

Prediction FantasyBatch::predict(int m, const Eigen::VectorXd& t) const {
    const GpModel& b = *base_;
    Eigen::VectorXd tn = b.to_normalized(t);
    Eigen::VectorXd kt = b.kvec_normalized(tn);
    Prediction pn = b.predict_normalized(tn);
    // Posterior cross-covariance between t and the candidate.
    double cross = kernel_value(b.kernel_normalized(), tn, xn_) - kt.dot(kx_solved_);
    double yn = (draws_[m] - b.mean_constant()) / b.output_std();
    double mean_n = pn.mean + cross * (yn - mu_n_) / s_;
    double var_n = std::max(pn.variance - cross * cross / s_, 0.0);
    return {b.mean_constant() + b.output_std() * mean_n,
            b.output_std() * b.output_std() * var_n};
}

Eigen::VectorXd FantasyBatch::draws_normalized() const {
    Eigen::VectorXd out(count());
    for (int m = 0; m < count(); ++m)
        out[m] = (draws_[m] - base_->mean_constant()) / base_->output_std();
    return out;
}

}  // namespace gradal
