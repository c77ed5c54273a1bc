#include <numeric>

#include <benchmark/benchmark.h>

#include "cngp/data.hpp"
#include "cngp/inference.hpp"
#include "cngp/metrics.hpp"
#include "cngp/rng.hpp"

namespace {

using namespace cngp;

Eigen::MatrixXd random_inputs(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  Rng rng(seed, Stream::Benchmark, 0);
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      x(i, j) = rng.uniform(-2.0, 2.0);
    }
  }
  return x;
}

void BM_KernelMatrix(benchmark::State &state) {
  const auto n = state.range(0);
  const Eigen::MatrixXd x = random_inputs(n, 10, 1);
  const Eigen::MatrixXd z = random_inputs(100, 10, 2);
  const auto spec = KernelSpec::isotropic(KernelFamily::SquaredExponential, 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernel_matrix(spec, x, z));
  }
  state.SetItemsProcessed(state.iterations() * n * 100);
}
BENCHMARK(BM_KernelMatrix)->Arg(256)->Arg(2048);

void BM_CholeskyPsd(benchmark::State &state) {
  const auto m = state.range(0);
  const Eigen::MatrixXd z = random_inputs(m, 3, 3);
  const Eigen::MatrixXd k = kernel_matrix(KernelSpec::isotropic(KernelFamily::Matern32, 3), z, z);
  for (auto _ : state) {
    benchmark::DoNotOptimize(cholesky_psd(k));
  }
}
BENCHMARK(BM_CholeskyPsd)->Arg(100)->Arg(400);

void BM_GaussHermiteExpectation(benchmark::State &state) {
  const auto rule = gauss_hermite(static_cast<int>(state.range(0)));
  const StudentTNoise noise{5.0, 0.7};
  double mean = 0.0;
  for (auto _ : state) {
    mean += 1e-9;
    benchmark::DoNotOptimize(gh_expect(mean, 0.4, [&](double f) { return log_density(noise, 0.3, f); }, rule));
  }
}
BENCHMARK(BM_GaussHermiteExpectation)->Arg(20)->Arg(64);

// One minibatch ELBO value and gradient per noise family.
void BM_ElboGradient(benchmark::State &state) {
  const auto family = static_cast<NoiseFamily>(state.range(0));
  const Dataset ds = simulate_friedman(2000, 0.3, 10.0, 4);
  const Eigen::MatrixXd x = fit_standardizer(ds).apply(ds.features);
  TrainConfig config;
  const ModelState model = initial_model(x, ds.target, family, config, 0);
  std::vector<Eigen::Index> batch(256);
  std::iota(batch.begin(), batch.end(), Eigen::Index{0});
  for (auto _ : state) {
    benchmark::DoNotOptimize(elbo_with_gradient(model, x, ds.target, batch, x.rows()));
  }
  state.SetLabel(std::string(to_string(family)));
}
BENCHMARK(BM_ElboGradient)
    ->Arg(static_cast<int>(NoiseFamily::Gaussian))
    ->Arg(static_cast<int>(NoiseFamily::ContaminatedNormal))
    ->Arg(static_cast<int>(NoiseFamily::StudentT))
    ->Arg(static_cast<int>(NoiseFamily::Laplace));

void BM_MixtureInterval(benchmark::State &state) {
  const MixturePred pred{0.1, 0.3, 40.0, 0.8};
  for (auto _ : state) {
    benchmark::DoNotOptimize(predictive_interval(pred, 0.95));
  }
}
BENCHMARK(BM_MixtureInterval);

void BM_FitEpoch(benchmark::State &state) {
  const Dataset ds = simulate_sim1(2000, {0.1, 10.0, 1.0}, 5);
  const Eigen::MatrixXd x = fit_standardizer(ds).apply(ds.features);
  TrainConfig config;
  config.epochs = 1;
  config.restarts = 1;
  config.early_stop_patience = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit(x, ds.target, NoiseFamily::ContaminatedNormal, config));
  }
}
BENCHMARK(BM_FitEpoch)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
