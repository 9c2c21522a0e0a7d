#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gradal/support_penalty.hpp"

namespace gradal {

struct Uniform { double lo = 0.0, hi = 1.0; };
struct Normal  { double mu = 0.0, sigma = 1.0; };
struct Fixed   { double value = 0.0; };
using Marginal = std::variant<Uniform, Normal, Fixed>;

double marginal_quantile(const Marginal& m, double u);
// Box of a marginal; normals are truncated at +-6 sigma.
std::pair<double, double> marginal_bounds(const Marginal& m);

struct DependentGroup {
    std::vector<int> indices;
    Gmm gmm;
};

/// Input distribution: independent marginals plus at most one dependent
/// GMM-modelled group.
struct InputModel {
    std::vector<Marginal> marginals;
    std::optional<DependentGroup> dependent_group;

    int dim() const { return static_cast<int>(marginals.size()); }
    bool coordinate_dependent(int j) const;
    /// d x 2 matrix of (lo, hi) per coordinate.
    Eigen::MatrixXd box_bounds() const;
    void validate() const;

    static InputModel uniform_box(const Eigen::MatrixXd& bounds);  // d x 2
    static InputModel uniform_unit(int d);
};

/// Joe-Kuo Sobol sequence, natural (non-Gray) indexing, d <= 64.
/// Index 0 (the origin) is skipped by the design helpers.
class SobolSequence {
  public:
    explicit SobolSequence(int dim, bool scrambled = false, std::uint64_t seed = 0);

    int dim() const { return dim_; }
    /// Point at 1-based index i of the (unskipped) sequence.
    Eigen::VectorXd point(std::uint64_t index) const;
    /// Rows 1..count of the sequence as a count x d matrix.
    Eigen::MatrixXd points(int count, std::uint64_t start_index = 1) const;

    /// Load direction numbers from a text asset ("dim s a m_1..m_s" rows)
    /// instead of the embedded table; affects subsequently built sequences.
    static void load_direction_table(const std::string& path);

  private:
    int dim_;
    std::vector<std::array<std::uint32_t, 32>> dirs_;  // per-dim direction numbers
    std::vector<std::uint32_t> scramble_;
};

struct DesignGenerator {
    enum class Kind { sobol_sequence, uniform_random };
    Kind kind = Kind::sobol_sequence;
    std::uint64_t seed = 0;
    bool scrambled = false;
};

/// Low-discrepancy (or random) design mapped through marginal quantiles;
/// dependent-group columns are filled by GMM sampling.
Eigen::MatrixXd initial_design(const InputModel& model, int count,
                               const DesignGenerator& generator);

/// i.i.d. sample honoring the marginals and the dependent group.
Eigen::MatrixXd sample_input(const InputModel& model, int count, std::uint64_t seed);

}  // namespace gradal
