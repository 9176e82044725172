#include <doctest.h>

#include <random>
#include <sstream>

#include "helpers.hpp"
#include "interfere/errors.hpp"
#include "interfere/estimands.hpp"
#include "interfere/infectiousness.hpp"
#include "interfere/oracle_sim.hpp"
#include "oracle_values.hpp"

using namespace interfere;

namespace {

const HouseholdWorld kW1{0.3, 0.2, 0.5, 0.25, 0.4, 0.1, 0.2};

TrialWorld linear_world(double spill, double inter) {
  TrialWorld w;
  w.group_sizes = {10, 12, 20, 8, 15, 30};
  w.rule = {0.2, -0.1, spill, inter};
  w.scale = OutcomeScale::Real;
  w.heterogeneity = 0.3;
  return w;
}

}  // namespace

TEST_SUITE("oracle-sim") {
  TEST_CASE("household worked example") {
    const auto t = true_household_quantities(kW1);
    CHECK(t.pi_d == doctest::Approx(0.6));
    CHECK(t.pi_p == doctest::Approx(0.4));
    CHECK(t.p0 == doctest::Approx(oracle::kHouseholdP0).epsilon(1e-14));
    CHECK(t.theta == doctest::Approx(oracle::kHouseholdTheta).epsilon(1e-13));
    REQUIRE(t.beta);
    CHECK(*t.beta == doctest::Approx(oracle::kHouseholdBeta).epsilon(1e-14));
    CHECK(t.p1 == 0.25);
    CHECK(t.p_u == 0.4);
    CHECK(t.gamma == 0.1);
    CHECK(satisfies_assumption2(kW1));
  }

  TEST_CASE("no protected stratum means no selection") {
    const auto t = true_household_quantities({0.4, 0.0, 0.6, 0.2, 0.5, 0.3, 0.1});
    CHECK(t.p0 == t.p_u);
    CHECK(t.theta == 0.0);
  }

  TEST_CASE("equal stratum risks give beta = theta = 0") {
    const auto t = true_household_quantities({0.3, 0.2, 0.5, 0.25, 0.3, 0.3, 0.1});
    CHECK(*t.beta == 0.0);
    CHECK(std::abs(t.theta) < 1e-15);
  }

  TEST_CASE("invalid household worlds") {
    CHECK_THROWS_AS(validate(HouseholdWorld{0.3, 0.3, 0.3, 0.1, 0.1, 0.1, 0.1}), ValidationError);
    CHECK_THROWS_AS(true_household_quantities({0.0, 0.5, 0.5, 0.1, 0.1, 0.1, 0.1}), ValidationError);
    CHECK_THROWS_AS(simulate_households(kW1, 0, 1), ValidationError);
  }

  TEST_CASE("household simulation is deterministic per seed") {
    for (std::uint64_t seed : {1u, 7u, 20240601u}) {
      std::ostringstream a, b;
      write_households(a, simulate_households(kW1, 500, seed));
      write_households(b, simulate_households(kW1, 500, seed));
      CHECK(a.str() == b.str());
    }
    std::ostringstream a, b;
    write_households(a, simulate_households(kW1, 500, 1));
    write_households(b, simulate_households(kW1, 500, 2));
    CHECK(a.str() != b.str());
    // prefixes agree: draws are keyed by household
    const auto small = simulate_households(kW1, 10, 3);
    const auto large = simulate_households(kW1, 20, 3);
    for (std::size_t i = 0; i < 10; ++i) CHECK(small[i].y2 == large[i].y2);
  }

  TEST_CASE("simulated households converge to the analytic values") {
    const auto t = true_household_quantities(kW1);
    const auto s = summarize_households(simulate_households(kW1, 200000, 9));
    const double se1 = std::sqrt(t.p1 * (1 - t.p1) / double(s.n_index1));
    const double se0 = std::sqrt(t.p0 * (1 - t.p0) / double(s.n_index0));
    CHECK(std::abs(s.p1 - t.p1) < 3 * se1);
    CHECK(std::abs(s.p0 - t.p0) < 3 * se0);
    CHECK(std::abs(s.doomed_fraction() - t.pi_d) < 0.02);
  }

  TEST_CASE("adjusters fed the true parameters recover p_u") {
    const auto t = true_household_quantities(kW1);
    const auto s = make_infect_study(t.p1, t.p0, t.attack1, t.attack0);
    CHECK(theta_adjust(s, t.theta).p_u == doctest::Approx(t.p_u).epsilon(1e-10));
    CHECK(gamma_adjust(s, t.gamma).p_u == doctest::Approx(t.p_u).epsilon(1e-10));
    CHECK(beta_adjust(s, *t.beta).p_u == doctest::Approx(t.p_u).epsilon(1e-10));
    const auto b = monotonicity_bounds(s);
    CHECK(b.p_u().first <= t.p_u);
    CHECK(t.p_u <= b.p_u().second);
  }

  TEST_CASE("constant rule in the count gives no indirect effect") {
    auto w = linear_world(0.0, 0.0);
    const auto t = true_trial_effects(w, {"psi", 0.5}, {"phi", 0.3});
    CHECK(std::abs(t.mixed.indirect) < 1e-15);
    CHECK(std::abs(t.bernoulli.indirect) < 1e-15);
  }

  TEST_CASE("total decomposes into direct and indirect") {
    for (double inter : {0.0, 0.01}) {
      const auto t = true_trial_effects(linear_world(0.02, inter), {"psi", 0.5}, {"phi", 0.3});
      for (const auto& e : {t.mixed, t.bernoulli}) {
        CHECK(e.total == doctest::Approx(e.direct_psi + e.indirect).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("direct effect ignores coverage only without an interaction") {
    const auto a = true_trial_effects(linear_world(0.02, 0.0), {"psi", 0.5}, {"phi", 0.3});
    CHECK(a.mixed.direct_psi == doctest::Approx(a.mixed.direct_phi).epsilon(1e-12));
    const auto b = true_trial_effects(linear_world(0.02, 0.01), {"psi", 0.5}, {"phi", 0.3});
    CHECK(std::abs(b.mixed.direct_psi - b.mixed.direct_phi) > 1e-4);
  }

  TEST_CASE("mixed and Bernoulli overall effects agree in additive worlds") {
    TrialWorld w = linear_world(0.02, 0.0);
    w.group_sizes = {10, 20, 30, 40};
    const auto t = true_trial_effects(w, {"psi", 0.5}, {"phi", 0.3});
    CHECK(std::abs(t.mixed.overall - t.bernoulli.overall) < 1e-12);
    // the indirect effect differs: mixed allocation conditions on own treatment
    CHECK(std::abs(t.mixed.indirect - t.bernoulli.indirect) > 1e-6);
  }

  TEST_CASE("zero-outcome trial world gives zero estimates") {
    TrialWorld w;
    w.group_sizes.assign(10, 20);
    w.rule = {0.0, 0.0, 0.0, 0.0};
    const auto t = simulate_trial(w, {"psi", 0.5}, {"phi", 0.3}, 5, Allocation::Mixed, 4);
    for (const auto& e : all_effects(t, "phi", "psi")) CHECK(e.point == 0.0);
  }

  TEST_CASE("trial simulation is deterministic and respects the design") {
    TrialWorld w;
    w.group_sizes.assign(12, 40);
    w.rule = {0.1, -0.05, 0.004, 0.0};
    const auto a = simulate_trial(w, {"psi", 0.5}, {"phi", 0.25}, 5, Allocation::Mixed, 11);
    const auto b = simulate_trial(w, {"psi", 0.5}, {"phi", 0.25}, 5, Allocation::Mixed, 11);
    std::ostringstream sa, sb;
    write_group_summary(sa, a);
    write_group_summary(sb, b);
    CHECK(sa.str() == sb.str());
    CHECK(a.groups_with("psi").size() == 5);
    for (const auto& g : a.groups_with("phi")) CHECK(g.n_treated == 10);
    CHECK_THROWS_AS(simulate_trial(w, {"psi", 0.5}, {"psi", 0.3}, 5, Allocation::Mixed, 1), ValidationError);
    w.scale = OutcomeScale::Real;
    CHECK_THROWS_AS(simulate_trial(w, {"psi", 0.5}, {"phi", 0.3}, 5, Allocation::Mixed, 1), ValidationError);
  }

  TEST_CASE("simulated trial estimators center on the truth") {
    TrialWorld w;
    w.group_sizes.assign(16, 50);
    w.rule = {0.15, -0.08, 0.002, 0.0005};
    const AllocationStrategy psi{"psi", 0.6}, phi{"phi", 0.2};
    const auto truth = true_trial_effects(w, psi, phi).mixed;
    std::vector<double> ind, tot;
    for (std::uint64_t r = 0; r < 300; ++r) {
      const auto t = simulate_trial(w, psi, phi, 8, Allocation::Mixed, 100 + r);
      ind.push_back(indirect_effect(t, "phi", "psi").point);
      tot.push_back(total_effect(t, "phi", "psi").point);
    }
    const auto mi = testing::moments(ind), mt = testing::moments(tot);
    CHECK(std::abs(mi.mean - truth.indirect) < 3 * mi.se);
    CHECK(std::abs(mt.mean - truth.total) < 3 * mt.se);
  }

  TEST_CASE("mixed allocation needs both arms in every group") {
    TrialWorld w;
    w.group_sizes = {2, 10};
    CHECK_THROWS_AS(true_trial_effects(w, {"psi", 0.9}, {"phi", 0.3}), ValidationError);
    w.group_sizes = {1, 10};
    CHECK_THROWS_AS(validate(w), ValidationError);
  }

  TEST_CASE("unconfounded clusters have zero bias and delta") {
    auto w = testing::w4_world();
    w.kappa = 0.0;
    CHECK(std::abs(true_bias(w, {1, 2}, {0, 0})) < 1e-12);
    const auto d = true_delta_family(w);
    CHECK(d.is_zero());
    auto cl = testing::w3_world();
    CHECK(true_bias(cl, {1, 1}, {0, 1}) == 0.0);
  }

  TEST_CASE("normal conditional means by quadrature") {
    const auto w = testing::w4_world();
    CHECK(conditional_u_mean(w, 1, 0.0) == doctest::Approx(0.8).epsilon(1e-10));
    CHECK(std::abs(conditional_u_mean(w, 0, 1.0)) < 1e-10);
    const auto cl = testing::w3_world();
    CHECK(conditional_u_mean(cl, 0, 2.0) == doctest::Approx(1.2).epsilon(1e-10));
    CHECK(true_delta_d(w, 1.0, 2.0, 1.0, 0.5) == doctest::Approx(0.8).epsilon(1e-10));
    CHECK(true_delta_s(w, 3.0, 1.0, 0.5) == doctest::Approx(1.2).epsilon(1e-10));
  }

  TEST_CASE("binary confounder world: general formula equals the simple one and the truth") {
    ClusterWorld w;
    w.law = ConfounderLaw::ShiftBinary;
    w.a0 = -0.2;
    w.a1 = 0.9;
    w.u_prob0 = 0.3;
    w.u_prob1 = 0.7;
    w.lambda_u = 1.3;
    w.lambda_v = -0.6;
    for (const auto& others : {std::vector<double>{0, 1, 1}, std::vector<double>{0, 0, 0}}) {
      for (double l : {0.0, 1.0}) {
        const auto spec = world_bias_spec(w, l, others);
        for (const auto& [a, b] : {std::pair<ExposurePair, ExposurePair>{{1, 2}, {0, 0}},
                                   std::pair<ExposurePair, ExposurePair>{{0, 3}, {0, 1}},
                                   std::pair<ExposurePair, ExposurePair>{{1, 1}, {0, 1}}}) {
          const double general = bias_general(spec, a, b);
          const auto [du, dv] = confounder_mean_differences(spec, a, b);
          CHECK(std::abs(general - bias_simple({w.lambda_u, w.lambda_v, du, dv})) < 1e-12);
          CHECK(std::abs(general - true_bias(w, a, b)) < 1e-12);
        }
      }
    }
    CHECK_THROWS_AS(world_bias_spec(testing::w4_world(), 0.0, {0, 0, 0}), ValidationError);
  }

  TEST_CASE("cluster simulation ledger and determinism") {
    const auto w = testing::w4_world();
    const auto a = simulate_clusters(w, 50, 3);
    const auto b = simulate_clusters(w, 50, 3);
    std::ostringstream sa, sb, la;
    write_clusters(sa, a.data);
    write_clusters(sb, b.data);
    CHECK(sa.str() == sb.str());
    write_ledger(la, a.ledger);
    CHECK(a.ledger.size() == 200);
    CHECK(a.data[0].cluster_id == "c1");
    CHECK(a.data[0].members[1].individual_id == "c1_2");
    // V is the mean of the other members' U
    const double sum = a.ledger[0].u + a.ledger[1].u + a.ledger[2].u + a.ledger[3].u;
    CHECK(a.ledger[0].v == doctest::Approx((sum - a.ledger[0].u) / 3));
  }

  TEST_CASE("W4 gap between observed and causal contrasts matches delta_d") {
    // Large-sample regression gap: the zero-delta fit minus the truth.
    const auto w = testing::w4_world();
    const auto sim = simulate_clusters(w, 40000, 77);
    const auto model = testing::w4_model();
    const auto fit = fit_gee(sim.data, model, fit_propensity(sim.data, model));
    CHECK(std::abs(fit.params.psi_d[0] - w.psi_d0 - true_delta_d(w, 1, 0, 0, 0)) < 0.04);
    CHECK(std::abs(fit.params.psi_s[0] - w.psi_s - true_delta_s(w, 1, 0, 0)) < 0.02);
  }
}
