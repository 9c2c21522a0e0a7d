#include "gradal/testbed.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "gradal/kernel.hpp"
#include "rng_util.hpp"

namespace gradal {

double ishigami(const Eigen::VectorXd& x, double a, double b) {
    if (x.size() != 3) throw std::invalid_argument("ishigami: d = 3 required");
    return std::sin(x[0]) + a * std::sin(x[1]) * std::sin(x[1]) +
           b * std::pow(x[2], 4) * std::sin(x[0]);
}

double gsobol(const Eigen::VectorXd& x, const Eigen::VectorXd& a) {
    if (x.size() != a.size()) throw std::invalid_argument("gsobol: dimension mismatch");
    double prod = 1.0;
    for (int i = 0; i < x.size(); ++i)
        prod *= (std::abs(4.0 * x[i] - 2.0) + a[i]) / (1.0 + a[i]);
    return prod;
}

namespace {
const double kHartAlpha[4] = {1.0, 1.2, 3.0, 3.2};
const double kHartA[4][4] = {{10, 3, 17, 3.5},
                             {0.05, 10, 17, 0.1},
                             {3, 3.5, 1.7, 10},
                             {17, 8, 0.05, 10}};
const double kHartP[4][4] = {{0.1312, 0.1696, 0.5569, 0.0124},
                             {0.2329, 0.4135, 0.8307, 0.3736},
                             {0.2348, 0.1451, 0.3522, 0.2883},
                             {0.4047, 0.8828, 0.8732, 0.5743}};
}  // namespace

double hartmann4(const Eigen::VectorXd& x) {
    if (x.size() != 4) throw std::invalid_argument("hartmann4: d = 4 required");
    double sum = 0.0;
    for (int i = 0; i < 4; ++i) {
        double q = 0.0;
        for (int j = 0; j < 4; ++j) {
            double t = x[j] - kHartP[i][j];
            q += kHartA[i][j] * t * t;
        }
        sum += kHartAlpha[i] * std::exp(-q);
    }
    return (1.1 - sum) / 0.839;
}

double morris(const Eigen::VectorXd& x) {
    const int d = 20;
    if (x.size() != d) throw std::invalid_argument("morris: d = 20 required");
    Eigen::VectorXd w(d);
    for (int i = 0; i < d; ++i) {
        const int id1 = i + 1;  // coefficients are stated 1-based
        if (id1 == 3 || id1 == 5 || id1 == 7)
            w[i] = 2.0 * (1.1 * x[i] / (x[i] + 0.1) - 0.5);
        else
            w[i] = 2.0 * (x[i] - 0.5);
    }
    double f = 0.0;
    for (int i = 1; i <= d; ++i) {
        double beta = i <= 10 ? 20.0 : (i % 2 == 1 ? 1.0 : -1.0);  // (-1)^(i+1)
        f += beta * w[i - 1];
    }
    for (int i = 1; i <= d; ++i)
        for (int j = i + 1; j <= d; ++j) {
            double beta = (i <= 6 || j <= 6) ? -15.0 : ((i + j) % 2 == 0 ? 1.0 : -1.0);
            f += beta * w[i - 1] * w[j - 1];
        }
    for (int i = 1; i <= 5; ++i)  // third-order coefficients vanish unless min <= 5
        for (int j = i + 1; j <= d; ++j)
            for (int k = j + 1; k <= d; ++k)
                f += -10.0 * w[i - 1] * w[j - 1] * w[k - 1];
    return f;
}

Eigen::VectorXd gsobol_first_indices(const Eigen::VectorXd& a) {
    const int d = static_cast<int>(a.size());
    Eigen::VectorXd v(d);
    for (int j = 0; j < d; ++j) v[j] = 1.0 / (3.0 * (1.0 + a[j]) * (1.0 + a[j]));
    double total = (v.array() + 1.0).prod() - 1.0;
    return v / total;
}

Eigen::VectorXd gsobol_total_indices(const Eigen::VectorXd& a) {
    const int d = static_cast<int>(a.size());
    Eigen::VectorXd v(d);
    for (int j = 0; j < d; ++j) v[j] = 1.0 / (3.0 * (1.0 + a[j]) * (1.0 + a[j]));
    double prod_all = (v.array() + 1.0).prod();
    Eigen::VectorXd t(d);
    for (int j = 0; j < d; ++j) {
        double prod_rest = prod_all / (1.0 + v[j]);
        t[j] = v[j] * prod_rest / (prod_all - 1.0);
    }
    return t;
}

Eigen::VectorXd ishigami_dgsm(double a, double b) {
    const double pi = M_PI;
    const double pi4 = std::pow(pi, 4), pi6 = std::pow(pi, 6), pi8 = std::pow(pi, 8);
    Eigen::VectorXd d(3);
    d[0] = 0.5 * (1.0 + 2.0 * b * pi4 / 5.0 + b * b * pi8 / 9.0);
    d[1] = a * a / 2.0;
    d[2] = 8.0 * b * b * pi6 / 7.0;
    return d;
}

Eigen::VectorXd ishigami_total_indices(double a, double b) {
    const double pi4 = std::pow(M_PI, 4), pi8 = std::pow(M_PI, 8);
    const double v1 = 0.5 * std::pow(1.0 + b * pi4 / 5.0, 2);
    const double v2 = a * a / 8.0;
    const double v13 = 8.0 * b * b * pi8 / 225.0;
    const double v = v1 + v2 + v13;
    Eigen::VectorXd t(3);
    t[0] = (v1 + v13) / v;
    t[1] = v2 / v;
    t[2] = v13 / v;
    return t;
}

Benchmark gp_path_function(std::uint64_t seed) {
    const int g = 33;
    const int n = g * g;
    auto grid = std::make_shared<Eigen::MatrixXd>(n, 2);
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) {
            (*grid)(i * g + j, 0) = static_cast<double>(i) / (g - 1);
            (*grid)(i * g + j, 1) = static_cast<double>(j) / (g - 1);
        }
    auto kernel = std::make_shared<KernelSpec>();
    kernel->output_scale = 1.0;
    kernel->lengthscales = Eigen::VectorXd::Constant(2, 0.3);

    Eigen::MatrixXd k(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
            k(i, j) = kernel_value(*kernel, grid->row(i).transpose(), grid->row(j).transpose());
            k(j, i) = k(i, j);
        }
    k.diagonal().array() += 1e-8;
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("gp_path_function: grid Gram factorization failed");

    auto eng = detail::engine(detail::derive_seed(seed, 0x9a7));
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z[i] = detail::standard_normal(eng);
    Eigen::VectorXd y = Eigen::MatrixXd(llt.matrixL()) * z;
    auto alpha = std::make_shared<Eigen::VectorXd>(llt.solve(y));

    Benchmark bench;
    bench.id = "gp-path";
    bench.dimension = 2;
    bench.inputs = InputModel::uniform_unit(2);
    bench.evaluator = [grid, kernel, alpha](const Eigen::VectorXd& x) -> double {
        const int m = static_cast<int>(grid->rows());
        double acc = 0.0;
        for (int i = 0; i < m; ++i)
            acc += (*alpha)[i] * kernel_value(*kernel, x, grid->row(i).transpose());
        return acc;
    };
    return bench;
}

namespace {

Eigen::VectorXd gsobol_default_a(int d) {
    // Classical Sobol' choice; entries past the fourth saturate at 99.
    static const double head[] = {0.0, 1.0, 4.5, 9.0};
    Eigen::VectorXd a(d);
    for (int j = 0; j < d; ++j) a[j] = j < 4 ? head[j] : 99.0;
    return a;
}

Eigen::VectorXd gsobol_dgsm(const Eigen::VectorXd& a) {
    // Derivative a.e.: +-4/(1+a_j) times the remaining factors;
    // E[g_i^2] = 1 + V_i.
    const int d = static_cast<int>(a.size());
    Eigen::VectorXd v(d), out(d);
    for (int j = 0; j < d; ++j) v[j] = 1.0 / (3.0 * (1.0 + a[j]) * (1.0 + a[j]));
    double prod_all = (v.array() + 1.0).prod();
    for (int j = 0; j < d; ++j)
        out[j] = 16.0 / std::pow(1.0 + a[j], 2) * prod_all / (1.0 + v[j]);
    return out;
}

Benchmark gsobol_benchmark(const std::string& id, int d) {
    Benchmark bench;
    bench.id = id;
    bench.dimension = d;
    bench.inputs = InputModel::uniform_unit(d);
    Eigen::VectorXd a = gsobol_default_a(d);
    bench.evaluator = [a](const Eigen::VectorXd& x) { return gsobol(x, a); };
    bench.dgsm_reference = gsobol_dgsm(a);
    bench.sobol_total_reference = gsobol_total_indices(a);
    return bench;
}

}  // namespace

Benchmark make_benchmark(const std::string& id) {
    if (id == "ishigami") {
        Benchmark bench;
        bench.id = id;
        bench.dimension = 3;
        Eigen::MatrixXd b(3, 2);
        b << -M_PI, M_PI, -M_PI, M_PI, -M_PI, M_PI;
        bench.inputs = InputModel::uniform_box(b);
        bench.evaluator = [](const Eigen::VectorXd& x) { return ishigami(x); };
        bench.dgsm_reference = ishigami_dgsm();
        bench.sobol_total_reference = ishigami_total_indices();
        return bench;
    }
    if (id == "gsobol2") return gsobol_benchmark(id, 2);
    if (id == "gsobol6") return gsobol_benchmark(id, 6);
    if (id == "gsobol15") return gsobol_benchmark(id, 15);
    if (id == "hartmann4") {
        Benchmark bench;
        bench.id = id;
        bench.dimension = 4;
        bench.inputs = InputModel::uniform_unit(4);
        bench.evaluator = [](const Eigen::VectorXd& x) { return hartmann4(x); };
        return bench;
    }
    if (id == "morris") {
        Benchmark bench;
        bench.id = id;
        bench.dimension = 20;
        bench.inputs = InputModel::uniform_unit(20);
        bench.evaluator = [](const Eigen::VectorXd& x) { return morris(x); };
        return bench;
    }
    if (id == "gp-path") return gp_path_function(20240901);
    throw std::out_of_range("make_benchmark: unknown id " + id);
}

std::vector<std::string> benchmark_ids() {
    return {"ishigami", "gsobol2", "gsobol6", "gsobol15", "hartmann4", "morris", "gp-path"};
}

ExternalSimulator::ExternalSimulator(std::string command, double timeout_seconds)
    : command_(std::move(command)), timeout_(timeout_seconds) {
    if (command_.empty()) throw std::invalid_argument("ExternalSimulator: empty command");
}

namespace {

// One request/response round trip over a fresh subprocess.
double run_subprocess_once(const std::string& command, const std::string& request,
                           double timeout_seconds) {
    int in_pipe[2], out_pipe[2];
    if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0)
        throw std::runtime_error("ExternalSimulator: pipe failed");
    pid_t pid = fork();
    if (pid < 0) throw std::runtime_error("ExternalSimulator: fork failed");
    if (pid == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        close(in_pipe[0]);
        close(in_pipe[1]);
        close(out_pipe[0]);
        close(out_pipe[1]);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);

    ssize_t written = write(in_pipe[1], request.data(), request.size());
    close(in_pipe[1]);
    if (written != static_cast<ssize_t>(request.size())) {
        kill(pid, SIGKILL);
        waitpid(pid, nullptr, 0);
        close(out_pipe[0]);
        throw std::runtime_error("ExternalSimulator: failed to write request");
    }

    std::string output;
    char buf[4096];
    const int deadline_ms = static_cast<int>(timeout_seconds * 1000.0);
    int elapsed_ms = 0;
    bool timed_out = false;
    while (true) {
        struct pollfd pfd{out_pipe[0], POLLIN, 0};
        int slice = std::min(100, deadline_ms - elapsed_ms);
        if (slice <= 0) { timed_out = true; break; }
        int rc = poll(&pfd, 1, slice);
        elapsed_ms += slice;
        if (rc < 0) break;
        if (rc == 0) continue;
        ssize_t got = read(out_pipe[0], buf, sizeof(buf));
        if (got <= 0) break;
        output.append(buf, static_cast<std::size_t>(got));
        if (output.find('\n') != std::string::npos) break;
    }
    close(out_pipe[0]);
    if (timed_out) {
        kill(pid, SIGKILL);
        waitpid(pid, nullptr, 0);
        throw std::runtime_error("ExternalSimulator: timeout waiting for response");
    }
    int status = 0;
    waitpid(pid, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
        throw std::runtime_error("ExternalSimulator: command exited abnormally; output: " +
                                 output);

    auto parsed = nlohmann::json::parse(output, nullptr, /*allow_exceptions=*/false);
    if (parsed.is_discarded() || !parsed.contains("y") || !parsed["y"].is_number())
        throw std::runtime_error("ExternalSimulator: malformed response: " + output);
    return parsed["y"].get<double>();
}

}  // namespace

double ExternalSimulator::operator()(const Eigen::VectorXd& x) const {
    nlohmann::json req;
    req["x"] = std::vector<double>(x.data(), x.data() + x.size());
    const std::string line = req.dump() + "\n";
    try {
        return run_subprocess_once(command_, line, timeout_);
    } catch (const std::runtime_error& first) {
        // One retry covers transient startup or formatting hiccups.
        return run_subprocess_once(command_, line, timeout_);
    }
}

ReferenceCache build_reference(const Benchmark& bench, const std::string& cache_dir,
                               int mc_size, std::uint64_t seed) {
    namespace fs = std::filesystem;
    fs::create_directories(cache_dir);
    std::ostringstream name;
    name << bench.id << "_" << seed << "_" << mc_size << ".json";
    const fs::path path = fs::path(cache_dir) / name.str();

    ReferenceCache out;
    out.dir = cache_dir;
    if (fs::exists(path)) {
        std::ifstream in(path);
        nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
        if (!doc.is_discarded() && doc.value("id", "") == bench.id &&
            doc.value("seed", std::uint64_t{0}) == seed &&
            doc.value("mc_size", 0) == mc_size) {
            auto dg = doc["dgsm"].get<std::vector<double>>();
            auto st = doc["sobol_total"].get<std::vector<double>>();
            out.dgsm = Eigen::Map<Eigen::VectorXd>(dg.data(), dg.size());
            out.sobol_total = Eigen::Map<Eigen::VectorXd>(st.data(), st.size());
            out.variance = doc["variance"].get<double>();
            return out;
        }
    }

    const int d = bench.dimension;
    SobolEstimate pf = sobol_pickfreeze(bench.evaluator, bench.inputs, mc_size,
                                        detail::derive_seed(seed, 0x5e1));
    out.sobol_total = pf.total;
    out.variance = pf.variance;

    // DGSM by central finite differences on the true function, clipped to
    // the box so boundary samples stay evaluable.
    Eigen::MatrixXd bounds = bench.inputs.box_bounds();
    Eigen::MatrixXd x = sample_input(bench.inputs, mc_size, detail::derive_seed(seed, 0xd95));
    out.dgsm = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < mc_size; ++i) {
        Eigen::VectorXd p = x.row(i).transpose();
        for (int j = 0; j < d; ++j) {
            double h = 1e-5 * (bounds(j, 1) - bounds(j, 0));
            Eigen::VectorXd up = p, dn = p;
            up[j] = std::min(p[j] + h, bounds(j, 1));
            dn[j] = std::max(p[j] - h, bounds(j, 0));
            double span = up[j] - dn[j];
            if (span <= 0.0) continue;
            double g = (bench.evaluator(up) - bench.evaluator(dn)) / span;
            out.dgsm[j] += g * g;
        }
    }
    out.dgsm /= mc_size;

    nlohmann::json doc;
    doc["id"] = bench.id;
    doc["seed"] = seed;
    doc["mc_size"] = mc_size;
    doc["variance"] = out.variance;
    doc["dgsm"] = std::vector<double>(out.dgsm.data(), out.dgsm.data() + d);
    doc["sobol_total"] =
        std::vector<double>(out.sobol_total.data(), out.sobol_total.data() + d);
    std::ofstream os(path);
    os << doc.dump(2) << "\n";
    return out;
}

}  // namespace gradal
