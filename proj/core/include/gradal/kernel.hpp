#pragma once

#include <Eigen/Dense>

namespace gradal {

/// ARD Matérn-5/2 hyperparameters: output variance sigma^2 and one
/// lengthscale per input dimension.
struct KernelSpec {
    double output_scale = 1.0;       // sigma^2
    Eigen::VectorXd lengthscales;    // theta_1..theta_d, all > 0

    int dim() const { return static_cast<int>(lengthscales.size()); }

    // Constants entering the Frobenius envelope h(r).
    double amplitude() const { return 5.0 * output_scale / 3.0; }      // A
    double theta_min() const { return lengthscales.minCoeff(); }
    double l_squared() const;                                          // sum theta_i^-4

    void validate() const;
};

/// Lengthscale-weighted distance r(x,x') = sqrt(sum (x_i-x'_i)^2 / theta_i^2).
double scaled_distance(const KernelSpec& spec,
                       const Eigen::VectorXd& x, const Eigen::VectorXd& xp);

/// k(x,x') = sigma^2 (1 + sqrt5 r + (5/3) r^2) exp(-sqrt5 r)
double kernel_value(const KernelSpec& spec,
                    const Eigen::VectorXd& x, const Eigen::VectorXd& xp);

/// Gradient of k with respect to x. Continuous at r=0 (zero vector);
/// the gradient with respect to x' is the negation.
Eigen::VectorXd kernel_grad_x(const KernelSpec& spec,
                              const Eigen::VectorXd& x, const Eigen::VectorXd& xp);

/// Cross-Hessian grad_x grad_x' k(x,x'), a symmetric d x d matrix.
/// At x = x' this equals (5 sigma^2 / 3) Lambda^-2.
Eigen::MatrixXd kernel_cross_hessian(const KernelSpec& spec,
                                     const Eigen::VectorXd& x, const Eigen::VectorXd& xp);

/// Envelope h(r) bounding ||grad_x grad_x' k||_F^2 for the Matérn-5/2 kernel:
///   h(r) = 2 A^2 exp(-2 sqrt5 r) (25 r^4 / theta_min^4 + (1 + sqrt5 r)^2 L^2)
/// Non-increasing in r; throws std::domain_error for r < 0.
double frobenius_envelope_h(const KernelSpec& spec, double r);

}  // namespace gradal
