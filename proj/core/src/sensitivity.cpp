#include "gradal/sensitivity.hpp"

#include <cmath>
#include <stdexcept>

#include "rng_util.hpp"

namespace gradal {

Eigen::VectorXd posterior_mean_gradient(const GpModel& model, const Eigen::VectorXd& x) {
    const int d = model.dim();
    const auto& kernel = model.kernel_normalized();
    Eigen::VectorXd xn = model.to_normalized(x);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < model.size(); ++i)
        g += model.alpha()[i] *
             kernel_grad_x(kernel, xn, model.design_normalized().row(i).transpose());
    Eigen::VectorXd w = model.widths();
    for (int j = 0; j < d; ++j)
        g[j] *= model.output_std() / (w[j] > 0.0 ? w[j] : 1.0);
    return g;
}

Eigen::VectorXd dgsm_plugin(const GpModel& model, const InputModel& inputs,
                            int mc_size, std::uint64_t seed) {
    if (mc_size < 1) throw std::invalid_argument("dgsm_plugin: mc_size must be >= 1");
    Eigen::MatrixXd x = sample_input(inputs, mc_size, seed);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(model.dim());
    for (int i = 0; i < mc_size; ++i)
        acc += posterior_mean_gradient(model, x.row(i).transpose()).cwiseAbs2();
    return acc / mc_size;
}

SobolEstimate sobol_pickfreeze(const Evaluator& f, const InputModel& inputs,
                               int mc_size, std::uint64_t seed) {
    if (inputs.dependent_group)
        throw std::invalid_argument("sobol_pickfreeze: requires independent marginals");
    if (mc_size < 2) throw std::invalid_argument("sobol_pickfreeze: mc_size must be >= 2");
    const int d = inputs.dim();

    // A and B matrices. A scrambled 2d-dimensional low-discrepancy stream
    // (first d columns -> A, last d -> B) sharply reduces estimator noise;
    // beyond the direction-number table width, fall back to disjoint
    // pseudo-random streams.
    Eigen::MatrixXd a(mc_size, d), b(mc_size, d);
    if (2 * d <= 64) {
        SobolSequence seq(2 * d, true, detail::derive_seed(seed, 0xabab));
        Eigen::MatrixXd u = seq.points(mc_size);
        for (int i = 0; i < mc_size; ++i)
            for (int j = 0; j < d; ++j) {
                a(i, j) = marginal_quantile(inputs.marginals[j], u(i, j));
                b(i, j) = marginal_quantile(inputs.marginals[j], u(i, d + j));
            }
    } else {
        for (int i = 0; i < mc_size; ++i) {
            auto ea = detail::engine(detail::derive_seed(seed, 0xa11, i));
            auto eb = detail::engine(detail::derive_seed(seed, 0xb22, i));
            for (int j = 0; j < d; ++j) {
                a(i, j) = marginal_quantile(inputs.marginals[j], detail::uniform01(ea));
                b(i, j) = marginal_quantile(inputs.marginals[j], detail::uniform01(eb));
            }
        }
    }

    Eigen::VectorXd fa(mc_size), fb(mc_size);
    for (int i = 0; i < mc_size; ++i) {
        fa[i] = f(a.row(i).transpose());
        fb[i] = f(b.row(i).transpose());
    }
    double mean = (fa.sum() + fb.sum()) / (2.0 * mc_size);
    double var = ((fa.array() - mean).square().sum() +
                  (fb.array() - mean).square().sum()) /
                 (2.0 * mc_size - 1.0);
    if (var <= 0.0) var = 1e-300;

    SobolEstimate out;
    out.variance = var;
    out.first.resize(d);
    out.total.resize(d);
    Eigen::VectorXd xk(d);
    for (int k = 0; k < d; ++k) {
        double s_acc = 0.0, t_acc = 0.0;
        for (int i = 0; i < mc_size; ++i) {
            xk = a.row(i).transpose();
            xk[k] = b(i, k);
            double fab = f(xk);
            s_acc += fb[i] * (fab - fa[i]);
            t_acc += (fa[i] - fab) * (fa[i] - fab);
        }
        out.first[k] = s_acc / mc_size / var;
        out.total[k] = t_acc / (2.0 * mc_size) / var;
    }
    return out;
}

SobolEstimate sobol_pickfreeze(const GpModel& model, const InputModel& inputs,
                               int mc_size, std::uint64_t seed) {
    return sobol_pickfreeze(
        [&model](const Eigen::VectorXd& x) { return model.predict(x).mean; }, inputs,
        mc_size, seed);
}

double poincare_constant(const Marginal& marginal) {
    return std::visit(
        [](const auto& arg) -> double {
            using T = std::decay_t<decltype(arg)>;
            if constexpr (std::is_same_v<T, Uniform>) {
                const double w = arg.hi - arg.lo;
                return w * w;
            } else if constexpr (std::is_same_v<T, Normal>) {
                return 2.0 * M_PI * arg.sigma * arg.sigma;
            } else {
                return 0.0;
            }
        },
        marginal);
}

double poincare_constant_grid(const std::function<double(double)>& cdf,
                              const std::function<double(double)>& pdf,
                              double lo, double hi, int grid_size) {
    if (!(hi > lo)) throw std::invalid_argument("poincare_constant_grid: need hi > lo");
    if (grid_size < 3) throw std::invalid_argument("poincare_constant_grid: grid too small");
    double sup = 0.0;
    for (int i = 1; i < grid_size - 1; ++i) {
        double t = lo + (hi - lo) * i / (grid_size - 1.0);
        double rho = pdf(t);
        if (rho <= 0.0) continue;
        double cap = std::min(cdf(t), 1.0 - cdf(t)) / rho;
        sup = std::max(sup, 4.0 * cap * cap);
    }
    return sup;
}

Eigen::VectorXd dgsm_sobol_bound(const Eigen::VectorXd& dgsm,
                                 const Eigen::VectorXd& constants, double variance) {
    if (dgsm.size() != constants.size())
        throw std::invalid_argument("dgsm_sobol_bound: size mismatch");
    if (!(variance > 0.0))
        throw std::invalid_argument("dgsm_sobol_bound: variance must be positive");
    return constants.cwiseProduct(dgsm) / variance;
}

double q_squared(const Eigen::VectorXd& truth, const Eigen::VectorXd& prediction) {
    if (truth.size() != prediction.size() || truth.size() < 2)
        throw std::invalid_argument("q_squared: need matching vectors, size >= 2");
    double mean = truth.mean();
    double ss_tot = (truth.array() - mean).square().sum();
    double ss_res = (truth - prediction).squaredNorm();
    if (ss_tot <= 0.0) return ss_res <= 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
    return 1.0 - ss_res / ss_tot;
}

Metrics metrics(const Eigen::VectorXd& dgsm_estimate, const Eigen::VectorXd& dgsm_reference,
                const Eigen::VectorXd& sobol_estimate, const Eigen::VectorXd& sobol_reference,
                const Eigen::VectorXd& test_truth, const Eigen::VectorXd& test_prediction) {
    if (dgsm_estimate.size() != dgsm_reference.size() ||
        sobol_estimate.size() != sobol_reference.size())
        throw std::invalid_argument("metrics: reference size mismatch");
    Metrics m;
    m.rmse_dgsm =
        std::sqrt((dgsm_estimate - dgsm_reference).squaredNorm() / dgsm_estimate.size());
    m.rmse_sobol =
        std::sqrt((sobol_estimate - sobol_reference).squaredNorm() / sobol_estimate.size());
    m.q2 = q_squared(test_truth, test_prediction);
    return m;
}

}  // namespace gradal
