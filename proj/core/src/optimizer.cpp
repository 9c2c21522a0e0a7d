#include "gradal/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "gradal/inputs.hpp"

namespace gradal {

namespace detail {

namespace {
Eigen::VectorXd project(Eigen::VectorXd x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}
}  // namespace

std::pair<Eigen::VectorXd, double> lbfgs_box_maximize(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>& value_grad,
    Eigen::VectorXd x0, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
    int max_iters) {
    const int n = static_cast<int>(x0.size());
    const int history = 8;
    x0 = project(std::move(x0), lower, upper);

    Eigen::VectorXd x = x0, g(n);
    double f = value_grad(x, &g);
    if (!std::isfinite(f)) return {x, f};
    Eigen::VectorXd best_x = x;
    double best_f = f;

    std::deque<Eigen::VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;

    for (int iter = 0; iter < max_iters; ++iter) {
        // Two-loop recursion on the ascent direction.
        Eigen::VectorXd q = g;
        std::vector<double> alpha(s_hist.size());
        for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
            alpha[i] = rho_hist[i] * s_hist[i].dot(q);
            q -= alpha[i] * y_hist[i];
        }
        if (!s_hist.empty()) {
            double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
            if (std::isfinite(gamma) && gamma > 0) q *= gamma;
        }
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            double beta = rho_hist[i] * y_hist[i].dot(q);
            q += (alpha[i] - beta) * s_hist[i];
        }
        Eigen::VectorXd dir = q;
        if (dir.dot(g) <= 0.0) dir = g;  // fall back to steepest ascent

        // Backtracking Armijo line search on the projected path.
        double step = 1.0;
        const double c1 = 1e-4;
        double f_new = f;
        Eigen::VectorXd x_new = x, g_new(n);
        bool accepted = false;
        for (int ls = 0; ls < 30; ++ls) {
            x_new = project(x + step * dir, lower, upper);
            Eigen::VectorXd dx = x_new - x;
            if (dx.norm() < 1e-14) break;
            f_new = value_grad(x_new, &g_new);
            if (std::isfinite(f_new) && f_new >= f + c1 * g.dot(dx)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        Eigen::VectorXd s = x_new - x;
        Eigen::VectorXd yv = g - g_new;  // ascent: curvature pair uses -grad diff
        double sy = s.dot(yv);
        if (sy > 1e-12) {
            s_hist.push_back(s);
            y_hist.push_back(yv);
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > history) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        x = x_new;
        f = f_new;
        g = g_new;
        if (f > best_f) { best_f = f; best_x = x; }
        if (g.norm() < 1e-10 * (1.0 + std::abs(f))) break;
    }
    return {best_x, best_f};
}

}  // namespace detail

namespace {

double min_design_distance(const Eigen::VectorXd& xn, const Eigen::MatrixXd& design_norm) {
    if (design_norm.rows() == 0) return std::numeric_limits<double>::infinity();
    return (design_norm.rowwise() - xn.transpose()).rowwise().norm().minCoeff();
}

}  // namespace

OptimResult maximize(const std::function<double(const Eigen::VectorXd&)>& objective,
                     const Eigen::MatrixXd& bounds, const Eigen::MatrixXd& design,
                     const OptimConfig& config) {
    const int d = static_cast<int>(bounds.rows());
    if (!bounds.allFinite()) throw std::invalid_argument("maximize: bounds must be finite");
    Eigen::VectorXd lo = bounds.col(0), width = bounds.col(1) - bounds.col(0);
    for (int j = 0; j < d; ++j)
        if (width[j] <= 0.0) width[j] = 1.0;

    auto to_natural = [&](const Eigen::VectorXd& u) -> Eigen::VectorXd {
        return lo + u.cwiseProduct(width);
    };
    // Normalized design for separation checks.
    Eigen::MatrixXd design_norm(design.rows(), d);
    for (int i = 0; i < design.rows(); ++i)
        design_norm.row(i) =
            ((design.row(i).transpose() - lo).cwiseQuotient(width)).transpose();

    auto eval = [&](const Eigen::VectorXd& u) { return objective(to_natural(u)); };

    const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(d);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(d);
    const double fd_step = 1e-6;

    auto fd_value_grad = [&](const Eigen::VectorXd& u, Eigen::VectorXd* g) -> double {
        double f = eval(u);
        if (g) {
            g->resize(d);
            for (int j = 0; j < d; ++j) {
                Eigen::VectorXd up = u, um = u;
                up[j] = std::min(u[j] + fd_step, 1.0);
                um[j] = std::max(u[j] - fd_step, 0.0);
                double span = up[j] - um[j];
                (*g)[j] = span > 0 ? (eval(up) - eval(um)) / span : 0.0;
            }
        }
        return f;
    };

    for (int attempt = 0; attempt < 2; ++attempt) {
        const int raw = config.effective_raw(d) << attempt;
        SobolSequence seq(d, /*scrambled=*/true, config.seed);
        Eigen::MatrixXd cand = seq.points(raw, 1);

        std::vector<double> values(raw);
        for (int i = 0; i < raw; ++i) values[i] = eval(cand.row(i).transpose());

        std::vector<int> order(raw);
        for (int i = 0; i < raw; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return values[a] > values[b];  // stable: ties keep lowest index first
        });

        struct Entry {
            Eigen::VectorXd u;
            double value;
            int origin;
        };
        std::vector<Entry> finalists;
        int starts = 0;
        for (int idx : order) {
            if (min_design_distance(cand.row(idx).transpose(), design_norm) <
                config.min_separation)
                continue;
            finalists.push_back({cand.row(idx).transpose(), values[idx], idx});
            if (starts < config.refine_starts) {
                auto [u_ref, f_ref] = detail::lbfgs_box_maximize(
                    fd_value_grad, cand.row(idx).transpose(), zeros, ones,
                    config.max_refine_iters);
                if (f_ref >= values[idx] &&
                    min_design_distance(u_ref, design_norm) >= config.min_separation)
                    finalists.push_back({u_ref, f_ref, idx});
                ++starts;
            }
        }
        if (finalists.empty()) continue;  // retry with an enlarged raw set

        const Entry* best = &finalists.front();
        for (const auto& e : finalists)
            if (e.value > best->value ||
                (e.value == best->value && e.origin < best->origin))
                best = &e;
        return {to_natural(best->u), best->value};
    }
    throw std::runtime_error("maximize: all candidates rejected by minimum separation");
}

}  // namespace gradal
