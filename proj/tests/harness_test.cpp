#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gradal/harness.hpp"

using namespace gradal;
namespace fs = std::filesystem;

namespace {

RunConfig fast_config(const std::string& dir) {
    RunConfig cfg;
    cfg.benchmark_id = "gsobol2";
    cfg.initial_count = 8;
    cfg.budget = 2;
    cfg.acquisition.kind = AcquisitionKind::GlobalGradVarRed;
    cfg.acquisition.fantasy_count = 2;
    cfg.acquisition.site_count = 12;
    cfg.optimizer.raw_candidates = 32;
    cfg.optimizer.refine_starts = 2;
    cfg.optimizer.max_refine_iters = 10;
    cfg.fit.restarts = 2;
    cfg.fit.max_iters = 30;
    cfg.dgsm_mc = 256;
    cfg.sobol_mc = 256;
    cfg.test_size = 64;
    cfg.out_dir = dir;
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int data_rows(const std::string& csv) {
    int lines = 0;
    for (char c : csv)
        if (c == '\n') ++lines;
    return lines - 1;  // minus header
}

struct TempDir {
    fs::path path;
    explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("zero-budget run produces a single metrics row") {
    TempDir tmp("gradal_h0");
    RunConfig cfg = fast_config(tmp.path.string());
    cfg.budget = 0;
    RunRecord rec = run_active_learning(cfg, 3, true, tmp.path.string());
    CHECK(rec.iterations.size() == 1);
    CHECK(rec.design.rows() == 8);
    CHECK(rec.outputs.size() == 8);
    CHECK(data_rows(slurp(tmp.path / "metrics.csv")) == 1);
    CHECK(data_rows(slurp(tmp.path / "design.csv")) == 8);
    CHECK(fs::exists(tmp.path / "timings.csv"));
}

TEST_CASE("identical config and seed give byte-identical artifacts") {
    TempDir t1("gradal_ha"), t2("gradal_hb");
    RunConfig cfg = fast_config(t1.path.string());
    run_active_learning(cfg, 11, true, t1.path.string());
    cfg.out_dir = t2.path.string();
    run_active_learning(cfg, 11, true, t2.path.string());
    CHECK(slurp(t1.path / "design.csv") == slurp(t2.path / "design.csv"));
    CHECK(slurp(t1.path / "metrics.csv") == slurp(t2.path / "metrics.csv"));
    CHECK(!slurp(t1.path / "metrics.csv").empty());
    // wall times live outside the deterministic artifacts
    CHECK(slurp(t1.path / "metrics.csv").find("wall") == std::string::npos);
}

TEST_CASE("row counts: one metrics row per iteration, one design row per point") {
    TempDir tmp("gradal_hc");
    RunConfig cfg = fast_config(tmp.path.string());
    RunRecord rec = run_active_learning(cfg, 5, true, tmp.path.string());
    CHECK(static_cast<int>(rec.iterations.size()) == cfg.budget + 1);
    CHECK(rec.design.rows() == cfg.initial_count + cfg.budget);
    CHECK(data_rows(slurp(tmp.path / "metrics.csv")) == cfg.budget + 1);
    CHECK(data_rows(slurp(tmp.path / "design.csv")) == cfg.initial_count + cfg.budget);
    for (int t = 0; t <= cfg.budget; ++t) CHECK(rec.iterations[t].iteration == t);
    // chosen points recorded from iteration 1 on
    CHECK(rec.iterations[0].chosen_x.size() == 0);
    CHECK(rec.iterations[1].chosen_x.size() == 2);
}

TEST_CASE("baseline appends the continuation of the initial design sequence") {
    TempDir t1("gradal_hd"), t2("gradal_he");
    RunConfig cfg = fast_config(t1.path.string());
    cfg.acquisition.kind = AcquisitionKind::RandomSobol;
    cfg.initial_count = 8;
    cfg.budget = 2;
    RunRecord grown = run_active_learning(cfg, 9, true, t1.path.string());

    RunConfig flat = cfg;
    flat.out_dir = t2.path.string();
    flat.initial_count = 10;
    flat.budget = 0;
    RunRecord direct = run_active_learning(flat, 9, true, t2.path.string());
    CHECK((grown.design - direct.design).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("config JSON roundtrip and validation") {
    TempDir tmp("gradal_hf");
    RunConfig cfg = fast_config(tmp.path.string());
    cfg.seed = 77;
    cfg.replicates = 3;
    cfg.acquisition.kind = AcquisitionKind::GlobalGradVarRedKmeans;
    cfg.acquisition.chunk_count = 3;
    fs::path file = tmp.path / "cfg.json";
    {
        std::ofstream out(file);
        out << cfg.to_json();
    }
    RunConfig back = RunConfig::from_json_file(file.string());
    CHECK(back.benchmark_id == cfg.benchmark_id);
    CHECK(back.initial_count == cfg.initial_count);
    CHECK(back.budget == cfg.budget);
    CHECK(back.seed == cfg.seed);
    CHECK(back.replicates == cfg.replicates);
    CHECK(back.acquisition.kind == cfg.acquisition.kind);
    CHECK(back.acquisition.chunk_count == cfg.acquisition.chunk_count);
    CHECK(back.dgsm_mc == cfg.dgsm_mc);
    CHECK(back.to_json() == cfg.to_json());

    RunConfig bad = cfg;
    bad.budget = -1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.initial_count = 1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.replicates = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.external_command = "cat";  // external runs must declare their inputs
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    fs::path missing = tmp.path / "missing.json";
    CHECK_THROWS(RunConfig::from_json_file(missing.string()));
    fs::path garbage = tmp.path / "garbage.json";
    {
        std::ofstream out(garbage);
        out << "{ not json";
    }
    CHECK_THROWS_AS(RunConfig::from_json_file(garbage.string()), std::invalid_argument);
}

TEST_CASE("replicated runs: per-replicate folders, summary quartiles") {
    TempDir tmp("gradal_hg");
    RunConfig cfg = fast_config(tmp.path.string());
    cfg.replicates = 2;
    cfg.budget = 1;
    ReplicateSummary s = run_replicated(cfg);
    CHECK(s.completed == 2);
    CHECK(s.warning.empty());
    CHECK(s.iterations.size() == 2);  // budget + 1
    CHECK(s.rmse_dgsm.size() == 2);
    for (const auto& q : s.rmse_dgsm) {
        CHECK(q[0] <= q[1]);
        CHECK(q[1] <= q[2]);
    }
    CHECK(fs::exists(tmp.path / "rep0" / "metrics.csv"));
    CHECK(fs::exists(tmp.path / "rep1" / "metrics.csv"));
    CHECK(fs::exists(tmp.path / "summary.csv"));

    // replicate k is seeded independently: designs differ
    CHECK(slurp(tmp.path / "rep0" / "design.csv") !=
          slurp(tmp.path / "rep1" / "design.csv"));
}

TEST_CASE("command line surface: bad input exits 2") {
    std::vector<const char*> argv = {"gradal", "run", "--config", "/nonexistent.json"};
    CHECK(cli_main(static_cast<int>(argv.size()), const_cast<char**>(argv.data())) == 2);
    std::vector<const char*> bad = {"gradal", "frobnicate"};
    CHECK(cli_main(static_cast<int>(bad.size()), const_cast<char**>(bad.data())) == 2);
}
