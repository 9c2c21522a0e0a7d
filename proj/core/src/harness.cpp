#include "gradal/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "rng_util.hpp"

namespace gradal {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_csv_row(std::ostream& os, const std::vector<double>& row) {
    for (std::size_t i = 0; i < row.size(); ++i)
        os << (i ? "," : "") << fmt(row[i]);
    os << "\n";
}

std::array<double, 3> quartiles(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    auto pick = [&](double q) {
        double pos = q * (v.size() - 1);
        std::size_t lo = static_cast<std::size_t>(pos);
        std::size_t hi = std::min(lo + 1, v.size() - 1);
        return v[lo] + (pos - lo) * (v[hi] - v[lo]);
    };
    return {pick(0.25), pick(0.5), pick(0.75)};
}

struct Problem {
    InputModel inputs;
    Evaluator evaluator;
    std::optional<Eigen::VectorXd> dgsm_ref;
    std::optional<Eigen::VectorXd> sobol_total_ref;
};

Problem resolve_problem(const RunConfig& config) {
    Problem p;
    if (config.external_command) {
        if (!config.external_inputs)
            throw std::invalid_argument("RunConfig: external_command requires external_inputs");
        p.inputs = *config.external_inputs;
        p.evaluator = ExternalSimulator(*config.external_command);
        return p;
    }
    Benchmark bench = make_benchmark(config.benchmark_id);
    p.inputs = bench.inputs;
    p.evaluator = bench.evaluator;
    p.dgsm_ref = bench.dgsm_reference;
    p.sobol_total_ref = bench.sobol_total_reference;
    if ((!p.dgsm_ref || !p.sobol_total_ref) && !p.inputs.dependent_group) {
        ReferenceCache ref = build_reference(bench, config.out_dir + "/refs",
                                             config.reference_mc);
        if (!p.dgsm_ref) p.dgsm_ref = ref.dgsm;
        if (!p.sobol_total_ref) p.sobol_total_ref = ref.sobol_total;
    }
    return p;
}

// Next low-discrepancy point in natural units, continuing the initial-design
// stream (initial design consumed indices 1..n0).
Eigen::VectorXd sequence_point(const InputModel& inputs, const SobolSequence& seq,
                               std::uint64_t index, std::uint64_t seed) {
    const int d = inputs.dim();
    Eigen::VectorXd u = seq.point(index);
    Eigen::VectorXd x(d);
    for (int j = 0; j < d; ++j) x[j] = marginal_quantile(inputs.marginals[j], u[j]);
    if (inputs.dependent_group) {
        const auto& g = *inputs.dependent_group;
        Eigen::MatrixXd z =
            g.gmm.sample(1, detail::derive_seed(seed, 0x96b, index));
        for (std::size_t p = 0; p < g.indices.size(); ++p)
            x[g.indices[p]] = z(0, p);
    }
    return x;
}

void persist_design(const std::string& dir, const Eigen::MatrixXd& design,
                    const Eigen::VectorXd& outputs) {
    const std::string tmp = dir + "/design.csv.tmp";
    std::ofstream os(tmp);
    const int d = static_cast<int>(design.cols());
    for (int j = 0; j < d; ++j) os << "x" << j + 1 << ",";
    os << "y\n";
    for (int i = 0; i < design.rows(); ++i) {
        for (int j = 0; j < d; ++j) os << fmt(design(i, j)) << ",";
        os << fmt(outputs[i]) << "\n";
    }
    os.close();
    fs::rename(tmp, dir + "/design.csv");
}

void persist_metrics(const std::string& dir, const RunRecord& record) {
    const int d = static_cast<int>(record.design.cols());
    const std::string tmp = dir + "/metrics.csv.tmp";
    std::ofstream os(tmp);
    os << "iteration,acquisition_value,chosen_y,output_scale";
    for (int j = 0; j < d; ++j) os << ",theta" << j + 1;
    for (int j = 0; j < d; ++j) os << ",dgsm" << j + 1;
    for (int j = 0; j < d; ++j) os << ",sobol_total" << j + 1;
    os << ",rmse_dgsm,rmse_sobol,q2\n";
    for (const auto& it : record.iterations) {
        std::vector<double> row = {static_cast<double>(it.iteration),
                                   it.acquisition_value, it.chosen_y, it.output_scale};
        for (int j = 0; j < d; ++j) row.push_back(it.lengthscales[j]);
        for (int j = 0; j < d; ++j) row.push_back(it.dgsm[j]);
        for (int j = 0; j < d; ++j) row.push_back(it.sobol_total[j]);
        row.push_back(it.rmse_dgsm);
        row.push_back(it.rmse_sobol);
        row.push_back(it.q2);
        write_csv_row(os, row);
    }
    os.close();
    fs::rename(tmp, dir + "/metrics.csv");

    // Wall times are runtime-dependent and therefore live next to, not
    // inside, the reproducible metrics table.
    std::ofstream ts(dir + "/timings.csv");
    ts << "iteration,wall_time_seconds\n";
    for (const auto& it : record.iterations)
        ts << it.iteration << "," << fmt(it.wall_time_seconds) << "\n";
}

}  // namespace

void RunConfig::validate() const {
    if (initial_count != 0 && initial_count < 2)
        throw std::invalid_argument("RunConfig: initial_count must be >= 2 (0 = default 5d)");
    if (budget < 0) throw std::invalid_argument("RunConfig: budget must be >= 0");
    if (replicates < 1) throw std::invalid_argument("RunConfig: replicates must be >= 1");
    if (dgsm_mc < 1 || sobol_mc < 2 || test_size < 2 || reference_mc < 2)
        throw std::invalid_argument("RunConfig: MC sizes too small");
    if (jobs < 1) throw std::invalid_argument("RunConfig: jobs must be >= 1");
    acquisition.validate();
    if (external_command && !external_inputs)
        throw std::invalid_argument("RunConfig: external_command requires external_inputs");
}

std::string RunConfig::to_json() const {
    json doc;
    doc["benchmark"] = benchmark_id;
    if (external_command) doc["external_command"] = *external_command;
    doc["initial_count"] = initial_count;
    doc["budget"] = budget;
    doc["acquisition"] = {{"kind", to_string(acquisition.kind)},
                          {"fantasy_count", acquisition.fantasy_count},
                          {"site_count", acquisition.site_count},
                          {"chunk_count", acquisition.chunk_count},
                          {"balanced_chunks", acquisition.balanced_chunks}};
    doc["optimizer"] = {{"raw_candidates", optimizer.raw_candidates},
                        {"refine_starts", optimizer.refine_starts},
                        {"max_refine_iters", optimizer.max_refine_iters},
                        {"min_separation", optimizer.min_separation}};
    doc["fit"] = {{"restarts", fit.restarts},
                  {"max_iters", fit.max_iters},
                  {"noise_variance", fit.noise_variance}};
    doc["replicates"] = replicates;
    doc["seed"] = seed;
    doc["dgsm_mc"] = dgsm_mc;
    doc["sobol_mc"] = sobol_mc;
    doc["test_size"] = test_size;
    doc["reference_mc"] = reference_mc;
    doc["out_dir"] = out_dir;
    doc["jobs"] = jobs;
    if (wall_time_cap_seconds) doc["wall_time_cap_seconds"] = *wall_time_cap_seconds;
    doc["resample_sites_each_iteration"] = resample_sites_each_iteration;
    return doc.dump(2);
}

RunConfig RunConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("config: " + path + ": " + e.what());
    }
    try {
        RunConfig c;
        c.benchmark_id = doc.value("benchmark", c.benchmark_id);
        if (doc.contains("external_command"))
            c.external_command = doc["external_command"].get<std::string>();
        c.initial_count = doc.value("initial_count", c.initial_count);
        c.budget = doc.value("budget", c.budget);
        if (doc.contains("acquisition")) {
            const auto& a = doc["acquisition"];
            if (a.contains("kind"))
                c.acquisition.kind = acquisition_kind_from_string(a["kind"].get<std::string>());
            c.acquisition.fantasy_count = a.value("fantasy_count", c.acquisition.fantasy_count);
            c.acquisition.site_count = a.value("site_count", c.acquisition.site_count);
            c.acquisition.chunk_count = a.value("chunk_count", c.acquisition.chunk_count);
            c.acquisition.balanced_chunks =
                a.value("balanced_chunks", c.acquisition.balanced_chunks);
        }
        if (doc.contains("optimizer")) {
            const auto& o = doc["optimizer"];
            c.optimizer.raw_candidates = o.value("raw_candidates", c.optimizer.raw_candidates);
            c.optimizer.refine_starts = o.value("refine_starts", c.optimizer.refine_starts);
            c.optimizer.max_refine_iters =
                o.value("max_refine_iters", c.optimizer.max_refine_iters);
            c.optimizer.min_separation = o.value("min_separation", c.optimizer.min_separation);
        }
        if (doc.contains("fit")) {
            const auto& f = doc["fit"];
            c.fit.restarts = f.value("restarts", c.fit.restarts);
            c.fit.max_iters = f.value("max_iters", c.fit.max_iters);
            c.fit.noise_variance = f.value("noise_variance", c.fit.noise_variance);
        }
        c.replicates = doc.value("replicates", c.replicates);
        c.seed = doc.value("seed", c.seed);
        c.dgsm_mc = doc.value("dgsm_mc", c.dgsm_mc);
        c.sobol_mc = doc.value("sobol_mc", c.sobol_mc);
        c.test_size = doc.value("test_size", c.test_size);
        c.reference_mc = doc.value("reference_mc", c.reference_mc);
        c.out_dir = doc.value("out_dir", c.out_dir);
        c.jobs = doc.value("jobs", c.jobs);
        if (doc.contains("wall_time_cap_seconds"))
            c.wall_time_cap_seconds = doc["wall_time_cap_seconds"].get<double>();
        c.resample_sites_each_iteration =
            doc.value("resample_sites_each_iteration", c.resample_sites_each_iteration);
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw std::invalid_argument("config: " + path + ": " + e.what());
    }
}

RunRecord run_active_learning(const RunConfig& config, std::uint64_t replicate_seed,
                              bool persist, const std::string& out_dir) {
    config.validate();
    const std::string dir = out_dir.empty() ? config.out_dir : out_dir;
    if (persist) fs::create_directories(dir);

    Problem problem = resolve_problem(config);
    const int d = problem.inputs.dim();
    const int n0 = config.initial_count > 0 ? config.initial_count : 5 * d;
    const int budget = config.budget;
    const Eigen::MatrixXd bounds = problem.inputs.box_bounds();
    const bool has_refs = problem.dgsm_ref.has_value() && problem.sobol_total_ref.has_value();
    const bool do_sobol = !problem.inputs.dependent_group;

    RunRecord record;
    record.config = config;
    if (persist) {
        std::ofstream snap(dir + "/config.snapshot.json");
        snap << config.to_json() << "\n";
    }

    DesignGenerator gen;
    gen.seed = detail::derive_seed(replicate_seed, 0x1417);
    gen.scrambled = true;  // varies the design across replicates
    record.design = initial_design(problem.inputs, n0, gen);
    record.outputs.resize(n0);
    for (int i = 0; i < n0; ++i) {
        record.outputs[i] = problem.evaluator(record.design.row(i).transpose());
        if (!std::isfinite(record.outputs[i]))
            throw std::runtime_error("run_active_learning: non-finite initial evaluation");
    }
    SobolSequence baseline_seq(d, /*scrambled=*/true, gen.seed);

    // Held-out truth for Q^2, fixed per replicate.
    Eigen::MatrixXd test_x =
        sample_input(problem.inputs, config.test_size, detail::derive_seed(replicate_seed, 0x7e57));
    Eigen::VectorXd test_y(config.test_size);
    for (int i = 0; i < config.test_size; ++i)
        test_y[i] = problem.evaluator(test_x.row(i).transpose());

    const std::uint64_t dgsm_seed = detail::derive_seed(replicate_seed, 0xd65);
    const std::uint64_t pf_seed = detail::derive_seed(replicate_seed, 0x50b);
    const auto t_start = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();
    };

    // The model fitted for iteration t's metrics also selects the point
    // appended for iteration t + 1; one fit per iteration.
    Eigen::VectorXd pending_x;
    double pending_y = 0.0, pending_acq = 0.0;
    for (int t = 0; t <= budget; ++t) {
        const double t_iter0 = elapsed();
        IterationRecord it;
        it.iteration = t;
        if (t > 0) {
            record.design.conservativeResize(record.design.rows() + 1, d);
            record.design.row(record.design.rows() - 1) = pending_x.transpose();
            record.outputs.conservativeResize(record.outputs.size() + 1);
            record.outputs[record.outputs.size() - 1] = pending_y;
            it.chosen_x = pending_x;
            it.chosen_y = pending_y;
            it.acquisition_value = pending_acq;
        }

        Dataset data{record.design, record.outputs};
        GpModel model = GpModel::fit(data, bounds,
                                     detail::derive_seed(replicate_seed, 0x3e7, t), config.fit);
        it.lengthscales = model.kernel_normalized().lengthscales;
        it.output_scale = model.kernel_normalized().output_scale;
        it.dgsm = dgsm_plugin(model, problem.inputs, config.dgsm_mc, dgsm_seed);
        if (do_sobol) {
            SobolEstimate pf = sobol_pickfreeze(model, problem.inputs, config.sobol_mc, pf_seed);
            it.sobol_total = pf.total;
        } else {
            it.sobol_total = Eigen::VectorXd::Zero(d);
        }
        Eigen::VectorXd pred(config.test_size);
        for (int i = 0; i < config.test_size; ++i)
            pred[i] = model.predict(test_x.row(i).transpose()).mean;
        it.q2 = q_squared(test_y, pred);
        if (has_refs) {
            it.rmse_dgsm =
                std::sqrt((it.dgsm - *problem.dgsm_ref).squaredNorm() / d);
            it.rmse_sobol =
                std::sqrt((it.sobol_total - *problem.sobol_total_ref).squaredNorm() / d);
        }
        // Select and evaluate the point to append next iteration.
        if (t < budget) {
            const int tn = t + 1;
            if (config.acquisition.kind == AcquisitionKind::RandomSobol) {
                pending_x = sequence_point(problem.inputs, baseline_seq,
                                           static_cast<std::uint64_t>(n0) + tn, gen.seed);
                pending_acq = 0.0;
            } else {
                AcquisitionSpec spec = config.acquisition;
                spec.seed = detail::derive_seed(replicate_seed, 0xfa7, tn);
                std::unique_ptr<GlobalGradContext> ctx;
                if (spec.kind == AcquisitionKind::GlobalGradVarRed ||
                    spec.kind == AcquisitionKind::GlobalGradVarRedKmeans) {
                    const int nsites = spec.effective_site_count(d);
                    const std::uint64_t site_seed = detail::derive_seed(
                        replicate_seed, 0x517e,
                        config.resample_sites_each_iteration ? tn : 0);
                    Eigen::MatrixXd sites = sample_input(problem.inputs, nsites, site_seed);
                    if (spec.kind == AcquisitionKind::GlobalGradVarRedKmeans) {
                        Clustering clustering = cluster_sites(
                            model, sites, spec.chunk_count, spec.balanced_chunks, site_seed);
                        ctx = std::make_unique<GlobalGradContext>(model, sites, clustering);
                    } else {
                        ctx = std::make_unique<GlobalGradContext>(model, sites);
                    }
                }
                OptimConfig opt = config.optimizer;
                opt.seed = detail::derive_seed(replicate_seed, 0x0b7, tn);
                auto objective = [&](const Eigen::VectorXd& x) {
                    return evaluate(spec, model, x, ctx.get());
                };
                OptimResult res = maximize(objective, bounds, record.design, opt);
                pending_x = res.point;
                pending_acq = res.value;
            }
            try {
                pending_y = problem.evaluator(pending_x);
                if (!std::isfinite(pending_y)) throw std::runtime_error("non-finite evaluation");
            } catch (const std::exception& e) {
                it.wall_time_seconds = elapsed() - t_iter0;
                record.iterations.push_back(it);
                if (persist) {
                    persist_design(dir, record.design, record.outputs);
                    persist_metrics(dir, record);
                }
                throw std::runtime_error(
                    std::string("run_active_learning: evaluation failed: ") + e.what());
            }
        }

        it.wall_time_seconds = elapsed() - t_iter0;
        record.iterations.push_back(it);

        if (persist) {
            persist_design(dir, record.design, record.outputs);
            persist_metrics(dir, record);
        }
        if (config.wall_time_cap_seconds && elapsed() > *config.wall_time_cap_seconds) break;
    }
    return record;
}

ReplicateSummary run_replicated(const RunConfig& config) {
    config.validate();
    fs::create_directories(config.out_dir);

    std::vector<std::optional<RunRecord>> records(config.replicates);
    std::string warning;
    auto run_one = [&](int k) -> std::optional<RunRecord> {
        try {
            return run_active_learning(config, config.seed + static_cast<std::uint64_t>(k),
                                       true, config.out_dir + "/rep" + std::to_string(k));
        } catch (const std::exception&) {
            return std::nullopt;
        }
    };
    if (config.jobs <= 1 || config.replicates == 1) {
        for (int k = 0; k < config.replicates; ++k) records[k] = run_one(k);
    } else {
        for (int base = 0; base < config.replicates; base += config.jobs) {
            std::vector<std::future<std::optional<RunRecord>>> futs;
            for (int k = base; k < std::min(base + config.jobs, config.replicates); ++k)
                futs.push_back(std::async(std::launch::async, run_one, k));
            for (int k = base; k < std::min(base + config.jobs, config.replicates); ++k)
                records[k] = futs[k - base].get();
        }
    }

    ReplicateSummary summary;
    std::size_t rows = 0;
    for (const auto& r : records)
        if (r) {
            ++summary.completed;
            rows = std::max(rows, r->iterations.size());
        }
    if (summary.completed < config.replicates)
        summary.warning = std::to_string(config.replicates - summary.completed) +
                          " replicate(s) failed; summary covers the rest";
    if (summary.completed == 0) {
        summary.warning = "all replicates failed";
        return summary;
    }

    std::ofstream os(config.out_dir + "/summary.csv");
    os << "iteration,rmse_dgsm_q25,rmse_dgsm_med,rmse_dgsm_q75,"
          "rmse_sobol_q25,rmse_sobol_med,rmse_sobol_q75,q2_q25,q2_med,q2_q75\n";
    for (std::size_t i = 0; i < rows; ++i) {
        std::vector<double> vd, vs, vq;
        int iter = 0;
        for (const auto& r : records)
            if (r && i < r->iterations.size()) {
                iter = r->iterations[i].iteration;
                vd.push_back(r->iterations[i].rmse_dgsm);
                vs.push_back(r->iterations[i].rmse_sobol);
                vq.push_back(r->iterations[i].q2);
            }
        summary.iterations.push_back(iter);
        summary.rmse_dgsm.push_back(quartiles(vd));
        summary.rmse_sobol.push_back(quartiles(vs));
        summary.q2.push_back(quartiles(vq));
        std::vector<double> row = {static_cast<double>(iter)};
        for (double v : summary.rmse_dgsm.back()) row.push_back(v);
        for (double v : summary.rmse_sobol.back()) row.push_back(v);
        for (double v : summary.q2.back()) row.push_back(v);
        write_csv_row(os, row);
    }
    return summary;
}

namespace {

int command_run(RunConfig config) {
    ReplicateSummary summary = run_replicated(config);
    if (!summary.warning.empty()) std::fprintf(stderr, "warning: %s\n", summary.warning.c_str());
    if (summary.completed == 0) return 1;
    std::printf("completed %d replicate(s); results in %s\n", summary.completed,
                config.out_dir.c_str());
    return 0;
}

int command_bench(RunConfig base, const std::vector<std::string>& benchmarks,
                  const std::vector<std::string>& acquisitions) {
    const std::string root = base.out_dir;
    int failures = 0;
    for (const auto& bench : benchmarks)
        for (const auto& acq : acquisitions) {
            RunConfig c = base;
            c.benchmark_id = bench;
            c.acquisition.kind = acquisition_kind_from_string(acq);
            c.out_dir = root + "/" + bench + "_" + acq;
            std::printf("== %s / %s ==\n", bench.c_str(), acq.c_str());
            if (command_run(c) != 0) ++failures;
        }
    return failures == 0 ? 0 : 1;
}

int command_verify_bounds(std::uint64_t seed, int instances) {
    std::printf("%-10s %6s %6s %4s %16s %16s %10s\n", "instance", "d", "N", "C",
                "|V-Vtilde|", "bound", "ratio");
    bool ok = true;
    for (int inst = 0; inst < instances; ++inst) {
        auto eng = detail::engine(detail::derive_seed(seed, 0xb0b, inst));
        const int d = 1 + static_cast<int>(eng() % 4);
        const int n = 8 + static_cast<int>(eng() % 25);
        const int c = 2 + static_cast<int>(eng() % 7);
        const int nsites = 6 + static_cast<int>(eng() % 20);

        Eigen::MatrixXd x(n, d), bounds(d, 2);
        bounds.col(0).setZero();
        bounds.col(1).setOnes();
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < d; ++j) x(i, j) = detail::uniform01(eng);
            y[i] = std::sin(3.0 * x.row(i).sum()) + 0.1 * x(i, 0);
        }
        GpModel model = GpModel::fit({x, y}, bounds, detail::derive_seed(seed, 0xf1, inst));
        Eigen::MatrixXd sites(nsites, d);
        for (int i = 0; i < nsites; ++i)
            for (int j = 0; j < d; ++j) sites(i, j) = detail::uniform01(eng);

        GradientPosterior exact = gradient_posterior(model, sites);
        double v = quad_form_variance(exact);
        Clustering clustering = cluster_sites(model, sites, std::min(c, nsites),
                                              inst % 2 == 0, seed + inst);
        GradientPosterior chunked = chunked_gradient_posterior(model, sites, clustering);
        double vt = chunked_quad_form_variance(chunked);
        BoundCertificate cert = error_certificate(model.kernel_natural(), clustering,
                                                  exact.mean.squaredNorm());
        double err = std::abs(v - vt);
        double ratio = cert.total_bound > 0 ? err / cert.total_bound : 0.0;
        if (ratio > 1.0) ok = false;
        std::printf("%-10d %6d %6d %4d %16.6e %16.6e %10.4f\n", inst, d, nsites,
                    clustering.cluster_count(), err, cert.total_bound, ratio);
    }
    std::printf(ok ? "all ratios <= 1\n" : "BOUND VIOLATION\n");
    return ok ? 0 : 1;
}

int command_refs(const std::string& benchmark, const std::string& out, int mc,
                 std::uint64_t seed) {
    Benchmark bench = make_benchmark(benchmark);
    ReferenceCache ref = build_reference(bench, out, mc, seed);
    std::printf("%s: variance %s\n", benchmark.c_str(), fmt(ref.variance).c_str());
    for (int j = 0; j < ref.dgsm.size(); ++j)
        std::printf("  dgsm[%d] = %s  sobol_total[%d] = %s\n", j + 1,
                    fmt(ref.dgsm[j]).c_str(), j + 1, fmt(ref.sobol_total[j]).c_str());
    return 0;
}

int command_report(const std::vector<std::string>& run_dirs, const std::string& out_file) {
    // Merge the per-run summary tables into one long-format plot-data CSV.
    std::ofstream os(out_file);
    os << "run,iteration,rmse_dgsm_med,rmse_sobol_med,q2_med\n";
    for (const auto& dir : run_dirs) {
        std::ifstream in(dir + "/summary.csv");
        if (!in) throw std::runtime_error("report: missing summary.csv in " + dir);
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            std::stringstream ss(line);
            std::vector<double> cols;
            std::string cell;
            while (std::getline(ss, cell, ',')) cols.push_back(std::stod(cell));
            if (cols.size() < 10) continue;
            os << fs::path(dir).filename().string() << "," << static_cast<int>(cols[0])
               << "," << fmt(cols[2]) << "," << fmt(cols[5]) << "," << fmt(cols[8])
               << "\n";
        }
    }
    std::printf("wrote %s\n", out_file.c_str());
    return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"Gradient-based active learning for GP sensitivity analysis"};
    app.require_subcommand(1);

    std::string config_path, out_override, benchmark_override, acquisition_override;
    std::uint64_t seed_override = 0;
    int jobs_override = 0, budget_override = -1, initial_override = -1,
        replicates_override = -1;
    bool have_seed = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON configuration file");
        cmd->add_option("--seed", seed_override, "master seed override")
            ->each([&](const std::string&) { have_seed = true; });
        cmd->add_option("--out", out_override, "output directory override");
        cmd->add_option("--jobs", jobs_override, "parallel replicate workers");
        cmd->add_option("--benchmark", benchmark_override, "benchmark id override");
        cmd->add_option("--budget", budget_override, "enrichment budget override");
        cmd->add_option("--initial", initial_override, "initial design size override");
        cmd->add_option("--replicates", replicates_override, "replicate count override");
        cmd->add_option("--acquisition", acquisition_override, "acquisition kind override");
    };

    auto* run_cmd = app.add_subcommand("run", "execute one experiment configuration");
    add_common(run_cmd);

    auto* bench_cmd =
        app.add_subcommand("bench", "run a benchmark x acquisition configuration matrix");
    std::vector<std::string> bench_list = benchmark_ids();
    std::vector<std::string> acq_list = {"global-grad-var-red", "random-sobol"};
    add_common(bench_cmd);
    bench_cmd->add_option("--benchmarks", bench_list, "benchmark ids");
    bench_cmd->add_option("--acquisitions", acq_list, "acquisition kinds");

    auto* vb_cmd = app.add_subcommand("verify-bounds",
                                      "certificate sweep: chunked-variance error vs bound");
    std::uint64_t vb_seed = 7;
    int vb_instances = 25;
    vb_cmd->add_option("--seed", vb_seed, "sweep seed");
    vb_cmd->add_option("--instances", vb_instances, "number of random instances");

    auto* refs_cmd = app.add_subcommand("refs", "build and cache reference indices");
    std::string refs_benchmark = "hartmann4", refs_out = "out/refs";
    int refs_mc = 1 << 18;
    std::uint64_t refs_seed = 20240901;
    refs_cmd->add_option("--benchmark", refs_benchmark, "benchmark id");
    refs_cmd->add_option("--out", refs_out, "cache directory");
    refs_cmd->add_option("--mc", refs_mc, "Monte Carlo sample size");
    refs_cmd->add_option("--seed", refs_seed, "oracle seed");

    auto* report_cmd =
        app.add_subcommand("report", "merge run summaries into plot-data CSV");
    std::vector<std::string> report_dirs;
    std::string report_out = "plotdata.csv";
    report_cmd->add_option("--runs", report_dirs, "run directories containing summary.csv")
        ->required();
    report_cmd->add_option("--out", report_out, "output CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        RunConfig config;
        if (!config_path.empty()) config = RunConfig::from_json_file(config_path);
        if (!benchmark_override.empty()) config.benchmark_id = benchmark_override;
        if (!acquisition_override.empty())
            config.acquisition.kind = acquisition_kind_from_string(acquisition_override);
        if (have_seed) config.seed = seed_override;
        if (!out_override.empty()) config.out_dir = out_override;
        if (jobs_override > 0) config.jobs = jobs_override;
        if (budget_override >= 0) config.budget = budget_override;
        if (initial_override >= 0) config.initial_count = initial_override;
        if (replicates_override >= 1) config.replicates = replicates_override;

        if (run_cmd->parsed()) {
            config.validate();
            if (config.benchmark_id != "external" && !config.external_command)
                make_benchmark(config.benchmark_id);  // surfaces unknown ids as usage errors
            return command_run(config);
        }
        if (bench_cmd->parsed()) {
            config.validate();
            for (const auto& b : bench_list) make_benchmark(b);
            return command_bench(config, bench_list, acq_list);
        }
        if (vb_cmd->parsed()) return command_verify_bounds(vb_seed, vb_instances);
        if (refs_cmd->parsed()) {
            make_benchmark(refs_benchmark);
            return command_refs(refs_benchmark, refs_out, refs_mc, refs_seed);
        }
        if (report_cmd->parsed()) return command_report(report_dirs, report_out);
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::out_of_range& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

}  // namespace gradal
