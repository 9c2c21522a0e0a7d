#include "gradal/acquisition.hpp"

#include <cmath>
#include <stdexcept>

#include "rng_util.hpp"

namespace gradal {

namespace {

// Natural-unit cross covariance between the gradient at x and the value at
// x, plus the natural look-ahead denominator s = sigma^2(x) + noise + jitter.
struct LocalCross {
    Eigen::VectorXd c;  // d
    double s;
};

LocalCross grad_value_cross(const GpModel& model, const Eigen::VectorXd& x) {
    const int d = model.dim();
    const int n = model.size();
    const auto& kernel = model.kernel_normalized();
    Eigen::VectorXd xn = model.to_normalized(x);
    Eigen::VectorXd kx = model.kvec_normalized(xn);
    Eigen::VectorXd ksolved = model.factorization().solve(kx);

    // prior term grad_x k(x, x) vanishes at r = 0
    Eigen::VectorXd cn = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < n; ++i)
        cn -= ksolved[i] *
              kernel_grad_x(kernel, xn, model.design_normalized().row(i).transpose());

    Eigen::VectorXd w = model.widths();
    const double ys2 = model.output_std() * model.output_std();
    LocalCross out;
    out.c.resize(d);
    for (int j = 0; j < d; ++j)
        out.c[j] = ys2 / (w[j] > 0.0 ? w[j] : 1.0) * cn[j];
    double var_n = model.predict_normalized(xn).variance;
    out.s = ys2 * (var_n + model.noise_variance() + model.jitter());
    return out;
}

double partial_sum(const Eigen::VectorXd& mu, const Eigen::VectorXd& v) {
    double total = 0.0;
    for (int j = 0; j < mu.size(); ++j)
        total += 2.0 * (v[j] * v[j] + 2.0 * mu[j] * mu[j] * v[j]);
    return total;
}

}  // namespace

AcquisitionKind acquisition_kind_from_string(const std::string& name) {
    if (name == "partial-max-var") return AcquisitionKind::PartialMaxVar;
    if (name == "partial-red-var") return AcquisitionKind::PartialRedVar;
    if (name == "grad-max-var") return AcquisitionKind::GradMaxVar;
    if (name == "grad-var-red") return AcquisitionKind::GradVarRed;
    if (name == "global-grad-var-red") return AcquisitionKind::GlobalGradVarRed;
    if (name == "global-grad-var-red-kmeans") return AcquisitionKind::GlobalGradVarRedKmeans;
    if (name == "random-sobol") return AcquisitionKind::RandomSobol;
    throw std::invalid_argument("unknown acquisition kind: " + name);
}

std::string to_string(AcquisitionKind kind) {
    switch (kind) {
        case AcquisitionKind::PartialMaxVar: return "partial-max-var";
        case AcquisitionKind::PartialRedVar: return "partial-red-var";
        case AcquisitionKind::GradMaxVar: return "grad-max-var";
        case AcquisitionKind::GradVarRed: return "grad-var-red";
        case AcquisitionKind::GlobalGradVarRed: return "global-grad-var-red";
        case AcquisitionKind::GlobalGradVarRedKmeans: return "global-grad-var-red-kmeans";
        case AcquisitionKind::RandomSobol: return "random-sobol";
    }
    throw std::logic_error("to_string: bad acquisition kind");
}

void AcquisitionSpec::validate() const {
    if (fantasy_count < 1)
        throw std::invalid_argument("AcquisitionSpec: fantasy_count must be >= 1");
    if (site_count < 0)
        throw std::invalid_argument("AcquisitionSpec: site_count must be >= 0");
    if (kind == AcquisitionKind::GlobalGradVarRedKmeans && chunk_count < 1)
        throw std::invalid_argument(
            "AcquisitionSpec: kmeans variant requires chunk_count >= 1");
    if (penalty) penalty->validate();
}

double partial_max_var(const GpModel& model, const Eigen::VectorXd& x) {
    GradientPosterior p = gradient_posterior(model, x.transpose());
    return partial_sum(p.mean, p.cov.diagonal());
}

double partial_red_var(const GpModel& model, const Eigen::VectorXd& x) {
    GradientPosterior p = gradient_posterior(model, x.transpose());
    LocalCross lc = grad_value_cross(model, x);
    Eigen::VectorXd v = p.cov.diagonal();
    Eigen::VectorXd v_new = v - lc.c.cwiseProduct(lc.c) / lc.s;
    v_new = v_new.cwiseMax(0.0);
    return partial_sum(p.mean, v) - partial_sum(p.mean, v_new);
}

double grad_max_var(const GpModel& model, const Eigen::VectorXd& x) {
    return quad_form_variance(gradient_posterior(model, x.transpose()));
}

double grad_var_red(const GpModel& model, const Eigen::VectorXd& x,
                    int fantasy_count, std::uint64_t seed) {
    GradientPosterior p = gradient_posterior(model, x.transpose());
    LocalCross lc = grad_value_cross(model, x);
    const double base = quad_form_variance(p);

    Eigen::MatrixXd cov_new = p.cov - lc.c * lc.c.transpose() / lc.s;
    const double tr2 = cov_new.squaredNorm();

    FantasyBatch batch(model, x, fantasy_count, seed);
    const double mu_x = model.predict(x).mean;
    double avg = 0.0;
    for (int m = 0; m < batch.count(); ++m) {
        double t = (batch.draw(m) - mu_x) / lc.s;
        Eigen::VectorXd mu_new = p.mean + t * lc.c;
        avg += 2.0 * tr2 + 4.0 * mu_new.dot(cov_new * mu_new);
    }
    avg /= batch.count();
    return base - avg;
}

GlobalGradContext::GlobalGradContext(const GpModel& model, const Eigen::MatrixXd& sites)
    : model_(&model), sites_(sites), posterior_(gradient_posterior(model, sites)) {
    finalize();
}

GlobalGradContext::GlobalGradContext(const GpModel& model, const Eigen::MatrixXd& sites,
                                     const Clustering& clustering)
    : model_(&model),
      sites_(sites),
      posterior_(chunked_gradient_posterior(model, sites, clustering)) {
    finalize();
}

void GlobalGradContext::finalize() {
    if (!posterior_.chunked()) {
        base_variance_ = quad_form_variance(posterior_);
        sigma_mu_ = posterior_.cov * posterior_.mean;
    } else {
        base_variance_ = chunked_quad_form_variance(posterior_);
        const int d = posterior_.dim();
        const std::size_t c = posterior_.blocks.size();
        block_mu_.resize(c);
        block_sigma_mu_.resize(c);
        for (std::size_t ci = 0; ci < c; ++ci) {
            const auto& members = posterior_.cluster_members[ci];
            Eigen::VectorXd mu(members.size() * d);
            for (std::size_t p = 0; p < members.size(); ++p)
                mu.segment(p * d, d) = posterior_.mean.segment(members[p] * d, d);
            block_mu_[ci] = mu;
            block_sigma_mu_[ci] = posterior_.blocks[ci] * mu;
        }
    }
}

double GlobalGradContext::variance_reduction(const Eigen::VectorXd& x, int fantasy_count,
                                             std::uint64_t seed) const {
    const GpModel& model = *model_;
    const int d = model.dim();
    const int nsites = static_cast<int>(sites_.rows());
    const auto& kernel = model.kernel_normalized();

    Eigen::VectorXd xn = model.to_normalized(x);
    Eigen::VectorXd kx = model.kvec_normalized(xn);
    Eigen::VectorXd ksolved = model.factorization().solve(kx);

    // Stacked posterior cross covariance c = Cov(grad(X_s), y(x) | D),
    // natural units: prior grad term minus the training correction.
    Eigen::VectorXd w = model.widths();
    const double ys2 = model.output_std() * model.output_std();
    Eigen::VectorXd c(nsites * d);
    for (int l = 0; l < nsites; ++l) {
        Eigen::VectorXd sl = model.to_normalized(sites_.row(l).transpose());
        Eigen::VectorXd cn = kernel_grad_x(kernel, sl, xn);
        for (int i = 0; i < model.size(); ++i)
            cn -= ksolved[i] *
                  kernel_grad_x(kernel, sl, model.design_normalized().row(i).transpose());
        for (int j = 0; j < d; ++j)
            c[l * d + j] = ys2 / (w[j] > 0.0 ? w[j] : 1.0) * cn[j];
    }
    double var_n = model.predict_normalized(xn).variance;
    const double s = ys2 * (var_n + model.noise_variance() + model.jitter());

    FantasyBatch batch(model, x, fantasy_count, seed);
    const double mu_x = model.predict(x).mean;

    if (!posterior_.chunked()) {
        const double tr2 = posterior_.cov.squaredNorm();
        Eigen::VectorXd sc = posterior_.cov * c;
        const double q = c.dot(sc);
        const double n2 = c.squaredNorm();
        const double tr2_new = tr2 - 2.0 * q / s + n2 * n2 / (s * s);
        const double a0 = posterior_.mean.dot(sigma_mu_);
        const double a1 = sigma_mu_.dot(c);
        const double b0 = posterior_.mean.dot(c);
        double avg = 0.0;
        for (int m = 0; m < batch.count(); ++m) {
            double t = (batch.draw(m) - mu_x) / s;
            double mu_sigma_mu = a0 + 2.0 * t * a1 + t * t * q;
            double mu_c = b0 + t * n2;
            avg += 2.0 * tr2_new + 4.0 * (mu_sigma_mu - mu_c * mu_c / s);
        }
        avg /= batch.count();
        return base_variance_ - avg;
    }

    // Chunked form: same algebra per diagonal block.
    std::vector<double> qv(posterior_.blocks.size()), n2v(qv.size()), a0v(qv.size()),
        a1v(qv.size()), b0v(qv.size()), tr2v(qv.size());
    for (std::size_t ci = 0; ci < posterior_.blocks.size(); ++ci) {
        const auto& members = posterior_.cluster_members[ci];
        Eigen::VectorXd ci_c(members.size() * d);
        for (std::size_t p = 0; p < members.size(); ++p)
            ci_c.segment(p * d, d) = c.segment(members[p] * d, d);
        Eigen::VectorXd sc = posterior_.blocks[ci] * ci_c;
        qv[ci] = ci_c.dot(sc);
        n2v[ci] = ci_c.squaredNorm();
        tr2v[ci] = posterior_.blocks[ci].squaredNorm() - 2.0 * qv[ci] / s +
                   n2v[ci] * n2v[ci] / (s * s);
        a0v[ci] = block_mu_[ci].dot(block_sigma_mu_[ci]);
        a1v[ci] = block_sigma_mu_[ci].dot(ci_c);
        b0v[ci] = block_mu_[ci].dot(ci_c);
    }
    double avg = 0.0;
    for (int m = 0; m < batch.count(); ++m) {
        double t = (batch.draw(m) - mu_x) / s;
        double total = 0.0;
        for (std::size_t ci = 0; ci < posterior_.blocks.size(); ++ci) {
            double mu_sigma_mu = a0v[ci] + 2.0 * t * a1v[ci] + t * t * qv[ci];
            double mu_c = b0v[ci] + t * n2v[ci];
            total += 2.0 * tr2v[ci] + 4.0 * (mu_sigma_mu - mu_c * mu_c / s);
        }
        avg += total;
    }
    avg /= batch.count();
    return base_variance_ - avg;
}

double global_grad_var_red(const GpModel& model, const Eigen::VectorXd& x,
                           const Eigen::MatrixXd& sites, int fantasy_count,
                           std::uint64_t seed, const Clustering* chunking) {
    if (chunking) {
        GlobalGradContext ctx(model, sites, *chunking);
        return ctx.variance_reduction(x, fantasy_count, seed);
    }
    GlobalGradContext ctx(model, sites);
    return ctx.variance_reduction(x, fantasy_count, seed);
}

double evaluate(const AcquisitionSpec& spec, const GpModel& model,
                const Eigen::VectorXd& x, const GlobalGradContext* context) {
    double value = 0.0;
    switch (spec.kind) {
        case AcquisitionKind::PartialMaxVar:
            value = partial_max_var(model, x);
            break;
        case AcquisitionKind::PartialRedVar:
            value = partial_red_var(model, x);
            break;
        case AcquisitionKind::GradMaxVar:
            value = grad_max_var(model, x);
            break;
        case AcquisitionKind::GradVarRed:
            value = grad_var_red(model, x, spec.fantasy_count, spec.seed);
            break;
        case AcquisitionKind::GlobalGradVarRed:
        case AcquisitionKind::GlobalGradVarRedKmeans:
            if (!context)
                throw std::invalid_argument(
                    "evaluate: global criteria require a prebuilt context");
            value = context->variance_reduction(x, spec.fantasy_count, spec.seed);
            break;
        case AcquisitionKind::RandomSobol:
            value = 0.0;  // selection is by sequence order, not optimization
            break;
    }
    if (spec.penalty) value *= penalty(*spec.penalty, x);
    return value;
}

}  // namespace gradal
