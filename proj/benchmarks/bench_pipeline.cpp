#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "retrofilter/dynamics.hpp"
#include "retrofilter/procnoise.hpp"
#include "retrofilter/scenario.hpp"
#include "retrofilter/spdlinalg.hpp"
#include "retrofilter/ssem.hpp"

using namespace retrofilter;

namespace {

Eigen::MatrixXd random_spd(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = nd(rng);
  Eigen::MatrixXd s = a * a.transpose() / n + 0.1 * Eigen::MatrixXd::Identity(n, n);
  return 0.5 * (s + s.transpose());
}

scenario::ScenarioConfig fig4() {
  scenario::ScenarioConfig cfg;
  cfg.refilter_eta = 1e-5;
  cfg.eta_mode = scenario::EtaMode::Estimated;
  return cfg;
}

const ekf::TrackHistory& source_track() {
  static const ekf::TrackHistory hist = [] {
    const auto cfg = fig4();
    const auto truth = scenario::simulate_truth(cfg);
    return scenario::run_source_filter(cfg, scenario::simulate_detections(cfg, truth));
  }();
  return hist;
}

}  // namespace

static void BM_SafeInvert(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd a = random_spd(static_cast<int>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(linalg::safe_invert(a));
}
BENCHMARK(BM_SafeInvert)->Arg(3)->Arg(6)->Arg(12);

static void BM_BallisticPropagate(benchmark::State& state) {
  const auto cfg = fig4();
  const StateVector x0 = scenario::simulate_truth(cfg).states.at(100);
  const auto dyn = dynamics::DynamicsModel::ballistic();
  for (auto _ : state) benchmark::DoNotOptimize(dynamics::propagate(dyn, x0, 1.0));
}
BENCHMARK(BM_BallisticPropagate);

static void BM_BallisticJacobian(benchmark::State& state) {
  const auto cfg = fig4();
  const StateVector x0 = scenario::simulate_truth(cfg).states.at(100);
  const auto dyn = dynamics::DynamicsModel::ballistic();
  for (auto _ : state) benchmark::DoNotOptimize(dynamics::jacobian(dyn, x0, 1.0));
}
BENCHMARK(BM_BallisticJacobian);

static void BM_EstimateEta(benchmark::State& state) {
  const auto& hist = source_track();
  const auto& prev = hist.estimates.at(200);
  const auto& cur = hist.estimates.at(201);
  const double dt = cur.epoch - prev.epoch;
  const StateMatrix f = dynamics::jacobian(hist.dynamics, prev.mean, dt);
  const StateMatrix b = dynamics::noise_basis(dt);
  procnoise::EtaSearchOptions opts;
  opts.rel_tol = std::pow(10.0, -static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(procnoise::estimate_eta(cur.cov, prev.cov, f, b, opts));
}
BENCHMARK(BM_EstimateEta)->Arg(6)->Arg(10);

static void BM_DecorrelateTrackKnown(benchmark::State& state) {
  const auto& hist = source_track();
  for (auto _ : state) benchmark::DoNotOptimize(ssem::decorrelate_track(hist, ssem::KnownEta{0.01}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(hist.estimates.size()));
}
BENCHMARK(BM_DecorrelateTrackKnown)->Unit(benchmark::kMillisecond);

static void BM_DecorrelateTrackEstimated(benchmark::State& state) {
  const auto& hist = source_track();
  const ssem::EstimatedEta eta{scenario::default_eta_search(), 1};
  for (auto _ : state) benchmark::DoNotOptimize(ssem::decorrelate_track(hist, eta));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(hist.estimates.size()));
}
BENCHMARK(BM_DecorrelateTrackEstimated)->Unit(benchmark::kMillisecond);

static void BM_RunScenario(benchmark::State& state) {
  const auto cfg = fig4();
  for (auto _ : state) benchmark::DoNotOptimize(scenario::run_scenario(cfg));
}
BENCHMARK(BM_RunScenario)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
