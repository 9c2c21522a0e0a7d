#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gradal/inputs.hpp"
#include "gradal/sensitivity.hpp"

namespace gradal {

struct Benchmark {
    std::string id;
    int dimension = 0;
    InputModel inputs;
    Evaluator evaluator;
    /// Analytic reference indices when known; otherwise filled from the
    /// cached MC oracle (see reference_cache).
    std::optional<Eigen::VectorXd> dgsm_reference;
    std::optional<Eigen::VectorXd> sobol_total_reference;
};

double ishigami(const Eigen::VectorXd& x, double a = 7.0, double b = 0.05);
double gsobol(const Eigen::VectorXd& x, const Eigen::VectorXd& a);
double hartmann4(const Eigen::VectorXd& x);
double morris(const Eigen::VectorXd& x);

/// Analytic G-Sobol total indices from V_j = 1/(3 (1+a_j)^2).
Eigen::VectorXd gsobol_total_indices(const Eigen::VectorXd& a);
Eigen::VectorXd gsobol_first_indices(const Eigen::VectorXd& a);
/// Analytic Ishigami DGSM vector for uniform [-pi, pi]^3 inputs.
Eigen::VectorXd ishigami_dgsm(double a = 7.0, double b = 0.05);
Eigen::VectorXd ishigami_total_indices(double a = 7.0, double b = 0.05);

/// Deterministic smooth d=2 function: a fixed GP prior draw on a 33 x 33
/// grid over [0,1]^2, interpolated by noise-free conditioning.
Benchmark gp_path_function(std::uint64_t seed);

/// Registry: ishigami, gsobol2, gsobol6, gsobol15, hartmann4, morris,
/// gp-path. Throws std::out_of_range for unknown ids.
Benchmark make_benchmark(const std::string& id);
std::vector<std::string> benchmark_ids();

/// Line-JSON subprocess adapter: writes {"x": [...]} to the command's stdin,
/// reads {"y": ...} from its stdout. Retries once on malformed output.
class ExternalSimulator {
  public:
    explicit ExternalSimulator(std::string command, double timeout_seconds = 60.0);
    double operator()(const Eigen::VectorXd& x) const;

  private:
    std::string command_;
    double timeout_;
};

/// Large-MC reference indices on the true function, cached as JSON
/// (function id, seed, mc_size, vectors) under cache_dir.
struct ReferenceCache {
    std::string dir;
    Eigen::VectorXd dgsm;
    Eigen::VectorXd sobol_total;
    double variance = 0.0;
};
ReferenceCache build_reference(const Benchmark& bench, const std::string& cache_dir,
                               int mc_size = 1 << 18, std::uint64_t seed = 20240901);

}  // namespace gradal
