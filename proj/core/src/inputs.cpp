#include "gradal/inputs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "rng_util.hpp"

namespace gradal {

namespace {

// Acklam's rational approximation of the standard normal quantile.
double inverse_normal_cdf(double p) {
    if (p <= 0.0) return -8.0;
    if (p >= 1.0) return 8.0;
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double q, x;
    if (p < plow) {
        q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // One Halley refinement keeps the tail accurate enough for design mapping.
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    x = x - u / (1.0 + x * u / 2.0);
    return x;
}

struct SobolRow {
    std::uint32_t s;
    std::uint32_t a;
    std::uint32_t m[9];
};

#include "sobol_directions_data.inc"

std::vector<std::vector<std::uint32_t>>* g_user_table = nullptr;

constexpr int kBits = 32;

std::array<std::uint32_t, 32> build_directions(int dim_index, std::uint32_t s,
                                               std::uint32_t a,
                                               const std::uint32_t* m) {
    std::array<std::uint32_t, 32> v{};
    if (dim_index == 0) {
        for (int k = 0; k < kBits; ++k) v[k] = 1u << (31 - k);
        return v;
    }
    for (std::uint32_t k = 0; k < s && k < kBits; ++k)
        v[k] = m[k] << (31 - k);
    for (std::uint32_t k = s; k < kBits; ++k) {
        v[k] = v[k - s] ^ (v[k - s] >> s);
        for (std::uint32_t i = 1; i < s; ++i)
            if ((a >> (s - 1 - i)) & 1u) v[k] ^= v[k - i];
    }
    return v;
}

}  // namespace

double marginal_quantile(const Marginal& m, double u) {
    return std::visit(
        [&](const auto& arg) -> double {
            using T = std::decay_t<decltype(arg)>;
            if constexpr (std::is_same_v<T, Uniform>) {
                return arg.lo + u * (arg.hi - arg.lo);
            } else if constexpr (std::is_same_v<T, Normal>) {
                double z = std::clamp(inverse_normal_cdf(u), -6.0, 6.0);
                return arg.mu + arg.sigma * z;
            } else {
                return arg.value;
            }
        },
        m);
}

std::pair<double, double> marginal_bounds(const Marginal& m) {
    return std::visit(
        [](const auto& arg) -> std::pair<double, double> {
            using T = std::decay_t<decltype(arg)>;
            if constexpr (std::is_same_v<T, Uniform>) {
                return {arg.lo, arg.hi};
            } else if constexpr (std::is_same_v<T, Normal>) {
                return {arg.mu - 6.0 * arg.sigma, arg.mu + 6.0 * arg.sigma};
            } else {
                return {arg.value, arg.value};
            }
        },
        m);
}

bool InputModel::coordinate_dependent(int j) const {
    if (!dependent_group) return false;
    const auto& idx = dependent_group->indices;
    return std::find(idx.begin(), idx.end(), j) != idx.end();
}

Eigen::MatrixXd InputModel::box_bounds() const {
    Eigen::MatrixXd b(dim(), 2);
    for (int j = 0; j < dim(); ++j) {
        auto [lo, hi] = marginal_bounds(marginals[j]);
        b(j, 0) = lo;
        b(j, 1) = hi;
    }
    if (dependent_group) {
        const auto& g = *dependent_group;
        for (std::size_t p = 0; p < g.indices.size(); ++p) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (const auto& comp : g.gmm.components) {
                double sd = std::sqrt(std::max(comp.cov(p, p), 0.0));
                lo = std::min(lo, comp.mean(p) - 6.0 * sd);
                hi = std::max(hi, comp.mean(p) + 6.0 * sd);
            }
            b(g.indices[p], 0) = lo;
            b(g.indices[p], 1) = hi;
        }
    }
    return b;
}

void InputModel::validate() const {
    if (dim() < 1) throw std::invalid_argument("InputModel: need d >= 1");
    if (dependent_group) {
        const auto& idx = dependent_group->indices;
        std::vector<int> sorted = idx;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw std::invalid_argument("InputModel: duplicate dependent indices");
        for (int j : idx)
            if (j < 0 || j >= dim())
                throw std::invalid_argument("InputModel: dependent index out of range");
        if (static_cast<int>(idx.size()) != dependent_group->gmm.dim())
            throw std::invalid_argument("InputModel: group size does not match GMM dimension");
    }
    const auto b = box_bounds();
    if (!b.allFinite()) throw std::invalid_argument("InputModel: non-finite bounds");
}

InputModel InputModel::uniform_box(const Eigen::MatrixXd& bounds) {
    InputModel m;
    for (int j = 0; j < bounds.rows(); ++j)
        m.marginals.push_back(Uniform{bounds(j, 0), bounds(j, 1)});
    return m;
}

InputModel InputModel::uniform_unit(int d) {
    return uniform_box((Eigen::MatrixXd(d, 2) << Eigen::VectorXd::Zero(d),
                        Eigen::VectorXd::Ones(d))
                           .finished());
}

SobolSequence::SobolSequence(int dim, bool scrambled, std::uint64_t seed) : dim_(dim) {
    if (dim < 1 || dim > 64)
        throw std::invalid_argument("SobolSequence: supported dimensions are 1..64");
    dirs_.resize(dim);
    for (int j = 0; j < dim; ++j) {
        if (g_user_table) {
            const auto& row = (*g_user_table)[j];
            dirs_[j] = build_directions(j, row[0], row[1], row.data() + 2);
        } else {
            const SobolRow& row = kSobolRows[j];
            dirs_[j] = build_directions(j, row.s, row.a, row.m);
        }
    }
    scramble_.assign(dim, 0u);
    if (scrambled) {
        auto eng = detail::engine(detail::derive_seed(seed, 0x50b01));
        for (int j = 0; j < dim; ++j)
            scramble_[j] = static_cast<std::uint32_t>(eng() >> 32);
    }
}

Eigen::VectorXd SobolSequence::point(std::uint64_t index) const {
    Eigen::VectorXd x(dim_);
    for (int j = 0; j < dim_; ++j) {
        std::uint32_t acc = scramble_[j];
        std::uint64_t n = index;
        int bit = 0;
        while (n) {
            if (n & 1ULL) acc ^= dirs_[j][bit];
            n >>= 1;
            ++bit;
        }
        x[j] = acc * 0x1.0p-32;
    }
    return x;
}

Eigen::MatrixXd SobolSequence::points(int count, std::uint64_t start_index) const {
    Eigen::MatrixXd out(count, dim_);
    for (int i = 0; i < count; ++i)
        out.row(i) = point(start_index + static_cast<std::uint64_t>(i)).transpose();
    return out;
}

void SobolSequence::load_direction_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("SobolSequence: cannot open " + path);
    auto table = std::make_unique<std::vector<std::vector<std::uint32_t>>>();
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::uint32_t dim, s, a;
        if (!(ss >> dim >> s >> a)) continue;
        std::vector<std::uint32_t> row = {s, a};
        std::uint32_t m;
        while (ss >> m) row.push_back(m);
        if (row.size() != 2 + s)
            throw std::runtime_error("SobolSequence: malformed direction row");
        table->push_back(std::move(row));
    }
    delete g_user_table;
    g_user_table = table.release();
}

Eigen::MatrixXd initial_design(const InputModel& model, int count,
                               const DesignGenerator& generator) {
    if (count < 2) throw std::invalid_argument("initial_design: count must be >= 2");
    model.validate();
    const int d = model.dim();
    Eigen::MatrixXd u(count, d);
    if (generator.kind == DesignGenerator::Kind::sobol_sequence) {
        SobolSequence seq(d, generator.scrambled, generator.seed);
        u = seq.points(count, /*start_index=*/1);  // skip the origin
    } else {
        for (int i = 0; i < count; ++i) {
            auto eng = detail::engine(detail::derive_seed(generator.seed, 0xdeed, i));
            for (int j = 0; j < d; ++j) u(i, j) = detail::uniform01(eng);
        }
    }
    Eigen::MatrixXd x(count, d);
    for (int i = 0; i < count; ++i)
        for (int j = 0; j < d; ++j)
            x(i, j) = marginal_quantile(model.marginals[j], u(i, j));
    if (model.dependent_group) {
        const auto& g = *model.dependent_group;
        Eigen::MatrixXd z = g.gmm.sample(count, detail::derive_seed(generator.seed, 0x96b));
        for (std::size_t p = 0; p < g.indices.size(); ++p)
            x.col(g.indices[p]) = z.col(p);
    }
    return x;
}

Eigen::MatrixXd sample_input(const InputModel& model, int count, std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("sample_input: count must be >= 1");
    const int d = model.dim();
    Eigen::MatrixXd x(count, d);
    for (int i = 0; i < count; ++i) {
        auto eng = detail::engine(detail::derive_seed(seed, 0x5a3e, i));
        for (int j = 0; j < d; ++j)
            x(i, j) = marginal_quantile(model.marginals[j], detail::uniform01(eng));
    }
    if (model.dependent_group) {
        const auto& g = *model.dependent_group;
        Eigen::MatrixXd z = g.gmm.sample(count, detail::derive_seed(seed, 0x96b));
        for (std::size_t p = 0; p < g.indices.size(); ++p)
            x.col(g.indices[p]) = z.col(p);
    }
    return x;
}

}  // namespace gradal
