#include <benchmark/benchmark.h>

#include <Eigen/Dense>
#include <random>

#include "gradal/acquisition.hpp"
#include "gradal/gradient_field.hpp"
#include "gradal/testbed.hpp"

namespace {

using namespace gradal;

Eigen::MatrixXd unit_bounds(int d) {
    Eigen::MatrixXd b(d, 2);
    b.col(0).setZero();
    b.col(1).setOnes();
    return b;
}

GpModel make_model(int d, int n) {
    std::mt19937_64 eng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd pts(n, d);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) pts(i, j) = u(eng);
        y[i] = std::sin(3.0 * pts.row(i).sum());
    }
    KernelSpec kernel;
    kernel.output_scale = 1.0;
    kernel.lengthscales = Eigen::VectorXd::Constant(d, 0.5);
    return GpModel::with_hyperparameters({pts, y}, unit_bounds(d), kernel);
}

Eigen::MatrixXd make_sites(int n, int d) {
    std::mt19937_64 eng(13);
    std::uniform_real_distribution<double> u(0.02, 0.98);
    Eigen::MatrixXd s(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) s(i, j) = u(eng);
    return s;
}

void BM_KernelCrossHessian(benchmark::State& state) {
    const int d = static_cast<int>(state.range(0));
    KernelSpec spec;
    spec.output_scale = 1.0;
    spec.lengthscales = Eigen::VectorXd::Constant(d, 0.7);
    Eigen::VectorXd x = Eigen::VectorXd::Constant(d, 0.2);
    Eigen::VectorXd xp = Eigen::VectorXd::Constant(d, 0.6);
    for (auto _ : state) benchmark::DoNotOptimize(kernel_cross_hessian(spec, x, xp));
}
BENCHMARK(BM_KernelCrossHessian)->Arg(2)->Arg(8)->Arg(20);

void BM_GradientPosterior(benchmark::State& state) {
    const int d = 3;
    const int sites = static_cast<int>(state.range(0));
    GpModel model = make_model(d, 60);
    Eigen::MatrixXd x = make_sites(sites, d);
    for (auto _ : state) benchmark::DoNotOptimize(gradient_posterior(model, x));
}
BENCHMARK(BM_GradientPosterior)->Arg(25)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_ChunkedGradientPosterior(benchmark::State& state) {
    const int d = 3;
    GpModel model = make_model(d, 60);
    Eigen::MatrixXd x = make_sites(120, d);
    Clustering c = cluster_sites(model, x, static_cast<int>(state.range(0)), true, 1);
    for (auto _ : state)
        benchmark::DoNotOptimize(chunked_gradient_posterior(model, x, c));
}
BENCHMARK(BM_ChunkedGradientPosterior)->Arg(2)->Arg(6)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_GlobalAcquisitionEval(benchmark::State& state) {
    const int d = 3;
    GpModel model = make_model(d, 60);
    Eigen::MatrixXd sites = make_sites(static_cast<int>(state.range(0)), d);
    GlobalGradContext ctx(model, sites);
    Eigen::VectorXd x = Eigen::VectorXd::Constant(d, 0.41);
    for (auto _ : state) benchmark::DoNotOptimize(ctx.variance_reduction(x, 8, 3));
}
BENCHMARK(BM_GlobalAcquisitionEval)->Arg(50)->Arg(150)->Unit(benchmark::kMicrosecond);

void BM_FitSmall(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    std::mt19937_64 eng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd pts(n, 3);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < 3; ++j) pts(i, j) = u(eng);
        y[i] = std::sin(5.0 * pts(i, 0)) + pts(i, 1) * pts(i, 2);
    }
    FitConfig cfg;
    cfg.restarts = 4;
    for (auto _ : state)
        benchmark::DoNotOptimize(GpModel::fit({pts, y}, unit_bounds(3), 5, cfg));
}
BENCHMARK(BM_FitSmall)->Arg(30)->Arg(60)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
