#include <benchmark/benchmark.h>

#include <sstream>

#include "interfere/estimands.hpp"
#include "interfere/infectiousness.hpp"
#include "interfere/oracle_sim.hpp"
#include "interfere/selection_gee.hpp"
#include "interfere/trial_data.hpp"

using namespace interfere;

namespace {

TrialTable cholera() {
  std::istringstream in(
      "group_id,assignment,n_treated,cases_treated,n_control,cases_control\n"
      "1,50,12541,16,12541,18\n2,50,11513,26,11513,54\n3,30,10772,17,25134,119\n"
      "4,30,8883,22,20727,122\n5,30,5627,15,13130,92\n");
  return parse_group_summary(in);
}

void BM_AllEffects(benchmark::State& state) {
  const auto t = cholera();
  for (auto _ : state) benchmark::DoNotOptimize(all_effects(t, "30", "50"));
}
BENCHMARK(BM_AllEffects);

void BM_BetaAdjust(benchmark::State& state) {
  const auto s = make_infect_study(0.2, 0.3, 0.3, 0.5);
  double beta = -3.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(beta_adjust(s, beta));
    beta = beta > 3.0 ? -3.0 : beta + 0.01;
  }
}
BENCHMARK(BM_BetaAdjust);

ClusterWorld w4() {
  ClusterWorld w;
  w.cluster_size = 4;
  w.law = ConfounderLaw::ShiftNormal;
  w.l_prob = 0.5;
  w.a0 = -0.5;
  w.a1 = 1.0;
  w.kappa = 0.8;
  return w;
}

void BM_FitGee(benchmark::State& state) {
  const auto sim = simulate_clusters(w4(), static_cast<std::size_t>(state.range(0)), 1);
  auto model = SelectionModel::defaults(1);
  model.propensity.terms = parse_form("1,l", 1);
  for (auto _ : state) {
    const auto p = fit_propensity(sim.data, model);
    benchmark::DoNotOptimize(fit_gee(sim.data, model, p));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FitGee)->Arg(200)->Arg(2000);

}  // namespace
BENCHMARK_MAIN();
