#include "blockcv/cvdesign.hpp"
#include "blockcv/gaussian.hpp"
#include "blockcv/laplace.hpp"
#include "blockcv/models.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace blockcv;

namespace {

Eigen::MatrixXd design(Index n, Stream& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(n, 3);
  for (Index j = 1; j < 3; ++j)
    for (Index i = 0; i < n; ++i)
      x(i, j) = z(rng);
  return x;
}

ModelSpec sar_model() {
  ModelSpec m;
  m.name = "sar";
  m.columns = {0, 1};
  return m;
}

struct SarFixture {
  Lattice lattice;
  ModelStructure model;
  Eigen::MatrixXd x;
  Eigen::VectorXd y;

  explicit SarFixture(int side)
      : lattice(side, side), model(lattice, sar_model()) {
    Stream rng(1);
    x = design(lattice.size(), rng);
    ModelSpec dgp = sar_model();
    dgp.columns = {0, 1, 2};
    const ModelStructure truth(lattice, dgp);
    Eigen::VectorXd p(5);
    p << 1, 1, 0.9, 0.95, 5;
    y = simulate(model_density(truth, p, truth.select_columns(x)), rng);
  }
};

void BM_LogDensityDense(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Stream rng(3);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd a(n, n);
  for (auto& v : a.reshaped())
    v = z(rng);
  const Eigen::MatrixXd cov = a * a.transpose() / n + Eigen::MatrixXd::Identity(n, n);
  const auto g = GaussianDensity::from_covariance(Eigen::VectorXd::Zero(n), cov);
  const Eigen::VectorXd y = Eigen::VectorXd::Ones(n);
  for (auto _ : state)
    benchmark::DoNotOptimize(log_density(g, y));
}
BENCHMARK(BM_LogDensityDense)->Arg(16)->Arg(144)->Arg(576);

void BM_SarGradient(benchmark::State& state) {
  const SarFixture f(static_cast<int>(state.range(0)));
  const Eigen::VectorXd p = Eigen::Vector4d(1.0, 1.0, 0.8, 4.0);
  const Eigen::MatrixXd x = f.model.select_columns(f.x);
  for (auto _ : state)
    benchmark::DoNotOptimize(log_density_gradient(f.model, p, x, f.y));
}
BENCHMARK(BM_SarGradient)->Arg(12)->Arg(24);

void BM_SarFoldFit(benchmark::State& state) {
  const SarFixture f(static_cast<int>(state.range(0)));
  const FoldPlan plan = blocked_folds(f.lattice, 4, 1, Scheme::rook);
  const Fold& fold = plan[plan.size() / 2];
  for (auto _ : state) {
    const JointObjective obj(f.model, fold, f.y, f.x);
    benchmark::DoNotOptimize(predictive_block(fit_fold(obj, {})));
  }
}
BENCHMARK(BM_SarFoldFit)->Arg(12)->Arg(24)->Unit(benchmark::kMillisecond);

void BM_KernelFoldFit(benchmark::State& state) {
  const Lattice lattice(static_cast<int>(state.range(0)), static_cast<int>(state.range(0)));
  ModelSpec spec;
  spec.name = "k";
  spec.family = Family::kernel;
  const ModelStructure model(lattice, spec);
  Stream rng(2);
  const Eigen::VectorXd y =
      simulate(kernel_covariance(KernelKind::matern_half, distances(lattice), {1.0, 1.0}), rng);
  const FoldPlan plan = blocked_folds(lattice, 2, 1, Scheme::rook);
  const Eigen::MatrixXd x(lattice.size(), 0);
  for (auto _ : state) {
    const JointObjective obj(model, plan[0], y, x);
    benchmark::DoNotOptimize(predictive_block(fit_fold(obj, {})));
  }
}
BENCHMARK(BM_KernelFoldFit)->Arg(6)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_KMeans(benchmark::State& state) {
  const Lattice lattice(24, 24);
  for (auto _ : state) {
    Stream rng(4);
    benchmark::DoNotOptimize(clustered_folds(lattice, static_cast<int>(state.range(0)), 1, Scheme::rook, rng));
  }
}
BENCHMARK(BM_KMeans)->Arg(12)->Arg(36)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
