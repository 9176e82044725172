#include <doctest.h>

#include <sstream>

#include "interfere/errors.hpp"
#include "interfere/world_config.hpp"

using namespace interfere;

namespace {

ConfigFile cfg_of(const std::string& text) {
  std::istringstream in(text);
  return read_config(in);
}

std::string lookup(const std::vector<std::pair<std::string, std::string>>& kv, const std::string& key) {
  for (const auto& [k, v] : kv)
    if (k == key) return v;
  return "<missing>";
}

}  // namespace

TEST_SUITE("world-config") {
  TEST_CASE("household section") {
    const auto w = household_world_from(cfg_of(
        "[config]\nversion = 1\n"
        "[household]\ndoomed = 0.3\nprotected = 0.2\nq_doomed_v = 0.25\nq_doomed_u = 0.4\n"
        "q_protected_u = 0.1 ; trailing comment\nq2 = 0.2\n"));
    CHECK(w.doomed == 0.3);
    CHECK(w.protected_ == 0.2);
    CHECK(w.immune == doctest::Approx(0.5));
    CHECK(w.q_protected_u == 0.1);
    CHECK(lookup(describe(w), "household.doomed") == "0.29999999999999999");
  }

  TEST_CASE("unknown keys, sections and versions are rejected") {
    CHECK_THROWS_AS(household_world_from(cfg_of("[household]\ndoomed = 0.3\ndoomd = 0.1\n")), ValidationError);
    CHECK_THROWS_AS(cfg_of("[houshold]\ndoomed = 0.3\n"), ValidationError);
    CHECK_THROWS_AS(cfg_of("[config]\nversion = 2\n"), ValidationError);
    CHECK_THROWS_AS(household_world_from(cfg_of("[trial]\nsizes = 2,3\n")), ValidationError);
    CHECK_THROWS_AS(household_world_from(cfg_of("[household]\ndoomed = lots\n")), ValidationError);
  }

  TEST_CASE("malformed files report the line") {
    try {
      cfg_of("[household]\ndoomed = 0.3\nnot a key value line\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }

  TEST_CASE("command sections and top-level keys are left to the command line") {
    const auto cfg = cfg_of("seed = 4\n[gee]\nbootstrap = 10\n[simulate.trial]\nn = 3\n[cluster]\nsize = 5\n");
    CHECK(cfg.sections.size() == 1);
    CHECK(cluster_world_from(cfg).cluster_size == 5);
  }

  TEST_CASE("trial section") {
    const auto t = trial_setup_from(cfg_of(
        "[trial]\ngroups = 4\nsize = 30\nbase = 0.1\nown = -0.05\nspill = 0.002\n"
        "psi = high:0.6\nphi = low:0.2\ngroups_psi = 1\nallocation = bernoulli\nworld_seed = 9\n"));
    CHECK(t.world.group_sizes == std::vector<std::int64_t>{30, 30, 30, 30});
    CHECK(t.world.rule.spill == 0.002);
    CHECK(t.psi.label == "high");
    CHECK(t.phi.coverage == 0.2);
    CHECK(t.groups_psi == 1);
    CHECK(t.allocation == Allocation::Bernoulli);
    CHECK(t.world.world_seed == 9);
    const auto s = trial_setup_from(cfg_of("[trial]\nsizes = 10,20\noutcome = real\n"));
    CHECK(s.world.group_sizes == std::vector<std::int64_t>{10, 20});
    CHECK(s.world.scale == OutcomeScale::Real);
    CHECK_THROWS_AS(trial_setup_from(cfg_of("[trial]\nsizes = 10\ngroups = 2\n")), ValidationError);
    CHECK_THROWS_AS(trial_setup_from(cfg_of("[trial]\nsizes = 10,20\npsi = 0.5\n")), ValidationError);
    CHECK_THROWS_AS(trial_setup_from(cfg_of("[trial]\nsizes = 10,20.5\n")), ValidationError);
  }

  TEST_CASE("cluster section") {
    const auto w = cluster_world_from(cfg_of(
        "[cluster]\nsize = 4\nlaw = shift-binary\nu_prob0 = 0.3\nu_prob1 = 0.7\nlambda_u = 2\n"));
    CHECK(w.law == ConfounderLaw::ShiftBinary);
    CHECK(w.u_prob1 == 0.7);
    CHECK(w.lambda_u == 2.0);
    CHECK(lookup(describe(w), "cluster.law") == "shift-binary");
    CHECK_THROWS_AS(cluster_world_from(cfg_of("[cluster]\nlaw = gaussian\n")), ValidationError);
    CHECK_THROWS_AS(cluster_world_from(cfg_of("[cluster]\nsize = 1\n")), ValidationError);
  }

  TEST_CASE("model section") {
    const auto m = selection_model_from(cfg_of(
        "[model]\ngamma_d = 1\nq = 1,l\npropensity = 1,l\ndelta_d = d1\nlambda_d = 0.8\n"
        "delta_s = s2\nlambda_s = 0.1,0.2\ns_covariate = 2\n"),
        2);
    CHECK(m.gamma_d.size() == 1);
    CHECK(m.q.size() == 3);
    CHECK(m.delta.d_kind == DeltaFamily::DKind::Linear);
    CHECK(m.delta.lambda_d == std::vector<double>{0.8});
    CHECK(m.delta.s_kind == DeltaFamily::SKind::Interaction);
    CHECK(m.delta.s_covariate == 1);
    const auto defaults = selection_model_from(ConfigFile{}, 1);
    CHECK(defaults.q.size() == 3);
    CHECK(defaults.delta.is_zero());
    CHECK_THROWS_AS(selection_model_from(cfg_of("[model]\ndelta_d = d2\nlambda_d = 1\n"), 1), ValidationError);
    CHECK_THROWS_AS(selection_model_from(cfg_of("[model]\nq_link = log\n"), 1), ValidationError);
  }

  TEST_CASE("gamma grids expand with lambda_d outermost") {
    const auto model = SelectionModel::defaults(1);
    const auto grid = parse_gamma_grid("lambda_d=-1,0,1;lambda_s=0,0.5", model);
    REQUIRE(grid.size() == 6);
    CHECK(grid[0].lambda_d == std::vector<double>{-1.0});
    CHECK(grid[1].lambda_s == std::vector<double>{0.5});
    CHECK(grid[2].lambda_d == std::vector<double>{0.0});
    CHECK(grid[2].is_zero());
    const auto d_only = parse_gamma_grid("lambda_d=0,2", model);
    CHECK(d_only[1].s_kind == DeltaFamily::SKind::Zero);
    CHECK_THROWS_AS(parse_gamma_grid("lambda_d2=1", model), ValidationError);
    CHECK_THROWS_AS(parse_gamma_grid("lambda_x=1", model), ValidationError);
    CHECK_THROWS_AS(parse_gamma_grid("lambda_d=1;lambda_d=2", model), ValidationError);
    CHECK_THROWS_AS(parse_gamma_grid("", model), ValidationError);
  }

  TEST_CASE("number lists") {
    CHECK(parse_number_list("1, 2.5,-3", "x") == std::vector<double>{1.0, 2.5, -3.0});
    CHECK_THROWS_AS(parse_number_list("1,,2", "x"), ValidationError);
  }
}
