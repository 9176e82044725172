#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "interfere/errors.hpp"
#include "interfere/estimands.hpp"
#include "oracle_values.hpp"

using namespace interfere;

namespace {

TrialTable random_table(std::mt19937_64& gen, bool equal_coverage) {
  std::uniform_int_distribution<int> groups(2, 6);
  std::uniform_int_distribution<std::int64_t> size(20, 400);
  std::uniform_real_distribution<double> risk(0.0, 0.4);
  std::vector<GroupSummary> out;
  int id = 0;
  for (const char* label : {"a", "b"}) {
    const int c = groups(gen);
    const std::int64_t fixed_nt = size(gen);
    const std::int64_t fixed_nc = size(gen);
    for (int k = 0; k < c; ++k) {
      GroupSummary g;
      g.group_id = std::to_string(++id);
      g.assignment = label;
      const std::int64_t scale = equal_coverage ? 1 + k : 1;
      g.n_treated = equal_coverage ? fixed_nt * scale : size(gen);
      g.n_control = equal_coverage ? fixed_nc * scale : size(gen);
      g.cases_treated = std::binomial_distribution<std::int64_t>(g.n_treated, risk(gen))(gen);
      g.cases_control = std::binomial_distribution<std::int64_t>(g.n_control, risk(gen))(gen);
      out.push_back(g);
    }
  }
  return TrialTable(out);
}

}  // namespace

TEST_SUITE("estimands") {
  TEST_CASE("cholera direct effects per 1000") {
    const auto t = testing::cholera();
    const auto d30 = direct_effect(t, "30").scaled(1000.0);
    const auto d50 = direct_effect(t, "50").scaled(1000.0);
    CHECK(std::abs(d30.point - 3.64) <= 0.01);
    CHECK(std::abs(d50.point - 1.30) <= 0.01);
    CHECK(d30.point == doctest::Approx(oracle::kCholeraDirect30).epsilon(1e-12));
    CHECK(d50.point == doctest::Approx(oracle::kCholeraDirect50).epsilon(1e-12));
    CHECK_FALSE(d30.variance.has_value());
    CHECK(d30.label() == "direct@30");
  }

  TEST_CASE("cholera indirect, total and overall with variances") {
    const auto t = testing::cholera();
    const auto ind = indirect_effect(t, "30", "50").scaled(1000.0);
    const auto tot = total_effect(t, "30", "50").scaled(1000.0);
    const auto ovr = overall_effect(t, "30", "50").scaled(1000.0);
    CHECK(std::abs(ind.point - 2.81) <= 0.01);
    CHECK(std::abs(tot.point - 4.11) <= 0.01);
    CHECK(std::abs(ovr.point - 2.37) <= 0.01);
    REQUIRE(ind.variance);
    REQUIRE(tot.variance);
    REQUIRE(ovr.variance);
    CHECK(std::abs(*ind.variance - 3.079) <= 0.005);
    CHECK(std::abs(*tot.variance - 0.672) <= 0.005);
    CHECK(std::abs(*ovr.variance - 1.430) <= 0.005);
    CHECK(ind.point == doctest::Approx(oracle::kCholeraIndirect).epsilon(1e-12));
    CHECK(*ind.variance == doctest::Approx(oracle::kCholeraIndirectVar).epsilon(1e-12));
    CHECK(tot.point == doctest::Approx(oracle::kCholeraTotal).epsilon(1e-12));
    CHECK(*tot.variance == doctest::Approx(oracle::kCholeraTotalVar).epsilon(1e-12));
    CHECK(ovr.point == doctest::Approx(oracle::kCholeraOverall).epsilon(1e-12));
    CHECK(*ovr.variance == doctest::Approx(oracle::kCholeraOverallVar).epsilon(1e-12));
    CHECK(ind.label() == "indirect(30,50)");
  }

  TEST_CASE("cholera decomposition") {
    const auto r = decomposition_report(testing::cholera(), "30", "50");
    CHECK(std::abs(r.total_residual) < 1e-12);
    CHECK(r.overall_residual * 1000.0 == doctest::Approx(oracle::kCholeraOverallResidual).epsilon(1e-6));
    CHECK(std::abs(r.overall_residual * 1000.0) < 0.01);
    CHECK_FALSE(r.equal_coverage);
    CHECK(r.mean_coverage_psi == doctest::Approx(0.5));
    CHECK(r.mean_coverage_phi == doctest::Approx(0.3).epsilon(1e-3));
  }

  TEST_CASE("identical arms give zero direct effect") {
    TrialTable t({{"1", "a", 100, 7, 100, 7}, {"2", "b", 50, 3, 50, 9}});
    CHECK(direct_effect(t, "a").point == 0.0);
  }

  TEST_CASE("equal labels give exact zeros") {
    const auto t = testing::cholera();
    CHECK(indirect_effect(t, "30", "30").point == 0.0);
    CHECK(overall_effect(t, "50", "50").point == 0.0);
  }

  TEST_CASE("total is zero with equal labels and equal arm rates") {
    TrialTable t({{"1", "a", 100, 10, 200, 20}, {"2", "a", 40, 2, 80, 4}});
    CHECK(std::abs(total_effect(t, "a", "a").point) < 1e-15);
  }

  TEST_CASE("missing labels and single groups") {
    const auto t = testing::cholera();
    CHECK_THROWS_AS(direct_effect(t, "70"), EstimationError);
    CHECK_THROWS_AS(indirect_effect(t, "30", "70"), EstimationError);
    TrialTable one({{"1", "a", 10, 1, 10, 2}, {"2", "b", 10, 1, 10, 3}, {"3", "b", 10, 0, 10, 4}});
    const auto e = indirect_effect(one, "a", "b");
    CHECK_FALSE(e.variance.has_value());
    CHECK(e.variance_warning);
  }

  TEST_CASE("all rates equal gives zero residuals") {
    TrialTable t({{"1", "a", 100, 10, 100, 10}, {"2", "a", 50, 5, 150, 15}, {"3", "b", 200, 20, 100, 10}});
    const auto r = decomposition_report(t, "a", "b");
    CHECK(std::abs(r.total_residual) < 1e-15);
    CHECK(std::abs(r.overall_residual) < 1e-15);
  }

  TEST_CASE("residual identities on random tables") {
    std::mt19937_64 gen(17);
    for (int rep = 0; rep < 200; ++rep) {
      const auto t = random_table(gen, false);
      CHECK(std::abs(decomposition_report(t, "a", "b").total_residual) < 1e-12);
      const auto eq = random_table(gen, true);
      const auto r = decomposition_report(eq, "a", "b");
      CHECK(r.equal_coverage);
      CHECK(std::abs(r.overall_residual) < 1e-12);
    }
  }

  TEST_CASE("antisymmetry, reordering and count scaling") {
    std::mt19937_64 gen(29);
    for (int rep = 0; rep < 50; ++rep) {
      const auto t = random_table(gen, false);
      CHECK(indirect_effect(t, "a", "b").point == doctest::Approx(-indirect_effect(t, "b", "a").point).epsilon(1e-14));
      CHECK(overall_effect(t, "a", "b").point == doctest::Approx(-overall_effect(t, "b", "a").point).epsilon(1e-14));

      std::vector<GroupSummary> g(t.groups().begin(), t.groups().end());
      std::shuffle(g.begin(), g.end(), gen);
      g[0].n_treated *= 3;
      g[0].cases_treated *= 3;
      g[0].n_control *= 3;
      g[0].cases_control *= 3;
      const TrialTable u(g);
      for (auto f : {total_effect, indirect_effect, overall_effect}) {
        CHECK(f(u, "a", "b").point == doctest::Approx(f(t, "a", "b").point).epsilon(1e-12));
      }
      CHECK(direct_effect(u, "a").point == doctest::Approx(direct_effect(t, "a").point).epsilon(1e-12));
    }
  }

  TEST_CASE("scaling, negation and intervals") {
    const auto e = indirect_effect(testing::cholera(), "30", "50");
    const auto n = e.negated();
    CHECK(n.point == -e.point);
    CHECK(n.convention == SignConvention::TreatedMinusControl);
    const auto w = with_wald_interval(e.scaled(1000.0));
    REQUIRE(w.ci);
    CHECK(w.ci->first < w.point);
    CHECK((w.ci->first + w.ci->second) / 2 == doctest::Approx(w.point));
    CHECK(w.ci->second - w.point == doctest::Approx(1.959963984540054 * std::sqrt(*w.variance)));
  }

  TEST_CASE("report lists every contrast") {
    std::ostringstream out;
    auto effects = all_effects(testing::cholera(), "30", "50");
    CHECK(effects.size() == 5);
    write_effects_report(out, effects, "proportion");
    const auto s = out.str();
    for (const char* label : {"direct@30", "direct@50", "indirect(30,50)", "total(30,50)", "overall(30,50)"})
      CHECK(s.find(label) != std::string::npos);
  }
}
