#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gradal/acquisition.hpp"
#include "gradal/optimizer.hpp"
#include "gradal/sensitivity.hpp"
#include "gradal/testbed.hpp"

namespace gradal {

struct RunConfig {
    std::string benchmark_id = "ishigami";
    std::optional<std::string> external_command;  // overrides the registry evaluator
    std::optional<InputModel> external_inputs;    // required with external_command
    int initial_count = 0;            // 0 means 5 d
    int budget = 0;                   // 0 means 10 d
    AcquisitionSpec acquisition;
    OptimConfig optimizer;
    FitConfig fit;
    int replicates = 1;
    std::uint64_t seed = 0;
    int dgsm_mc = 8192;
    int sobol_mc = 1 << 14;
    int test_size = 1024;
    int reference_mc = 1 << 18;
    std::string out_dir = "out";
    int jobs = 1;
    std::optional<double> wall_time_cap_seconds;
    bool resample_sites_each_iteration = true;

    void validate() const;
    static RunConfig from_json_file(const std::string& path);
    std::string to_json() const;
};

struct IterationRecord {
    int iteration = 0;                 // 0 = initial fit
    Eigen::VectorXd chosen_x;          // empty for iteration 0
    double chosen_y = 0.0;
    double acquisition_value = 0.0;
    Eigen::VectorXd lengthscales;      // fitted, normalized coordinates
    double output_scale = 0.0;
    Eigen::VectorXd dgsm;
    Eigen::VectorXd sobol_total;
    double rmse_dgsm = 0.0;
    double rmse_sobol = 0.0;
    double q2 = 0.0;
    double wall_time_seconds = 0.0;
};

struct RunRecord {
    RunConfig config;
    Eigen::MatrixXd design;            // final design, natural units
    Eigen::VectorXd outputs;
    std::vector<IterationRecord> iterations;
};

/// One replicate of the active-learning loop: initial design, then
/// {fit, draw X_s, maximize acquisition, evaluate, append, metrics} for
/// `budget` steps. Persists design.csv / metrics.csv incrementally under
/// out_dir when persist is true.
RunRecord run_active_learning(const RunConfig& config, std::uint64_t replicate_seed,
                              bool persist = true, const std::string& out_dir = "");

struct ReplicateSummary {
    std::vector<int> iterations;
    // Per iteration: median and quartiles over replicates of each metric.
    std::vector<std::array<double, 3>> rmse_dgsm, rmse_sobol, q2;
    int completed = 0;
    std::string warning;
};

ReplicateSummary run_replicated(const RunConfig& config);

/// CLI entry point: subcommands run, bench, verify-bounds, refs, report.
int cli_main(int argc, char** argv);

}  // namespace gradal
