#include "gradal/kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace gradal {

namespace {

constexpr double kSqrt5 = 2.2360679774997896964;
// Below this the analytic continuous extensions at r=0 are used.
constexpr double kZeroRadius = 1e-12;

void check_dims(const KernelSpec& spec,
                const Eigen::VectorXd& x, const Eigen::VectorXd& xp) {
    if (x.size() != spec.dim() || xp.size() != spec.dim())
        throw std::invalid_argument("kernel: point dimension does not match spec");
}

}  // namespace

double KernelSpec::l_squared() const {
    return lengthscales.array().pow(-4).sum();
}

void KernelSpec::validate() const {
    if (dim() < 1) throw std::invalid_argument("KernelSpec: need d >= 1");
    if (!(output_scale > 0.0))
        throw std::invalid_argument("KernelSpec: output_scale must be > 0");
    if (!(lengthscales.array() > 0.0).all())
        throw std::invalid_argument("KernelSpec: lengthscales must be > 0");
}

double scaled_distance(const KernelSpec& spec,
                       const Eigen::VectorXd& x, const Eigen::VectorXd& xp) {
    check_dims(spec, x, xp);
    return std::sqrt(((x - xp).array() / spec.lengthscales.array()).square().sum());
}

double kernel_value(const KernelSpec& spec,
                    const Eigen::VectorXd& x, const Eigen::VectorXd& xp) {
    const double r = scaled_distance(spec, x, xp);
    const double z = kSqrt5 * r;
    return spec.output_scale * (1.0 + z + (5.0 / 3.0) * r * r) * std::exp(-z);
}

Eigen::VectorXd kernel_grad_x(const KernelSpec& spec,
                              const Eigen::VectorXd& x, const Eigen::VectorXd& xp) {
    const double r = scaled_distance(spec, x, xp);
    if (r < kZeroRadius) return Eigen::VectorXd::Zero(spec.dim());
    const double z = kSqrt5 * r;
    const double coeff = -spec.amplitude() * (1.0 + z) * std::exp(-z);
    return coeff * ((x - xp).array() / spec.lengthscales.array().square()).matrix();
}

Eigen::MatrixXd kernel_cross_hessian(const KernelSpec& spec,
                                     const Eigen::VectorXd& x, const Eigen::VectorXd& xp) {
    const double r = scaled_distance(spec, x, xp);
    const double A = spec.amplitude();
    const Eigen::ArrayXd inv_sq = spec.lengthscales.array().square().inverse();
    if (r < kZeroRadius)
        return (A * inv_sq).matrix().asDiagonal();
    const double z = kSqrt5 * r;
    const double e = std::exp(-z);
    const Eigen::VectorXd w = ((x - xp).array() * inv_sq).matrix();  // Lambda^-2 delta
    // grad_x grad_x' k = A e^{-z} [ (1+z) Lambda^-2 - 5 w w^T ]
    Eigen::MatrixXd out = (-5.0 * A * e) * (w * w.transpose());
    out.diagonal() += (A * e * (1.0 + z)) * inv_sq.matrix();
    return out;
}

double frobenius_envelope_h(const KernelSpec& spec, double r) {
    if (r < 0.0) throw std::domain_error("frobenius_envelope_h: r must be >= 0");
    const double A = spec.amplitude();
    const double tmin = spec.theta_min();
    const double z = kSqrt5 * r;
    const double r2 = r * r;
    return 2.0 * A * A * std::exp(-2.0 * z) *
           (25.0 * r2 * r2 / (tmin * tmin * tmin * tmin) +
            (1.0 + z) * (1.0 + z) * spec.l_squared());
}

}  // namespace gradal
