#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "interfere/errors.hpp"
#include "interfere/oracle_sim.hpp"
#include "interfere/trial_data.hpp"

using namespace interfere;

TEST_SUITE("trial-data") {
  TEST_CASE("cholera table parses into two labels") {
    const auto t = testing::cholera();
    CHECK(t.groups().size() == 5);
    REQUIRE(t.labels() == std::vector<std::string>{"50", "30"});
    CHECK(t.groups_with("50").size() == 2);
    CHECK(t.groups_with("30").size() == 3);
    CHECK(t.groups()[0].n_treated == 12541);
    CHECK(t.groups()[0].cases_control == 18);
  }

  TEST_CASE("header only is rejected with 'no groups'") {
    std::istringstream in("group_id,assignment,n_treated,cases_treated,n_control,cases_control\n");
    CHECK_THROWS_WITH_AS(parse_group_summary(in), "no groups", ValidationError);
  }

  TEST_CASE("cases above the arm size name the field") {
    std::istringstream in(
        "group_id,assignment,n_treated,cases_treated,n_control,cases_control\n"
        "a,50,10,11,10,0\n");
    try {
      parse_group_summary(in);
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("cases_treated") != std::string::npos);
    }
  }

  TEST_CASE("malformed rows report their line") {
    std::istringstream in(
        "group_id,assignment,n_treated,cases_treated,n_control,cases_control\n"
        "a,50,10,1,10,0\n"
        "b,50,ten,1,10,0\n");
    try {
      parse_group_summary(in);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
    std::istringstream short_row(
        "group_id,assignment,n_treated,cases_treated,n_control,cases_control\n"
        "a,50,10,1\n");
    CHECK_THROWS_AS(parse_group_summary(short_row), ParseError);
  }

  TEST_CASE("columns may come in any order and tab separated") {
    std::istringstream in(
        "cases_control\tn_control\tgroup_id\tassignment\tcases_treated\tn_treated\n"
        "18\t12541\t1\t50\t16\t12541\n");
    const auto t = parse_group_summary(in, DelimitedFormat::tsv());
    CHECK(t.groups()[0].cases_treated == 16);
    CHECK(t.groups()[0].n_control == 12541);
  }

  TEST_CASE("duplicate group ids are rejected") {
    std::vector<GroupSummary> g{{"1", "a", 1, 0, 1, 0}, {"1", "b", 1, 0, 1, 0}};
    CHECK_THROWS_AS(TrialTable{g}, ValidationError);
  }

  TEST_CASE("group summaries round-trip") {
    const auto t = testing::cholera();
    std::ostringstream out;
    write_group_summary(out, t);
    std::istringstream in(out.str());
    const auto back = parse_group_summary(in);
    REQUIRE(back.groups().size() == t.groups().size());
    for (std::size_t i = 0; i < t.groups().size(); ++i) {
      const auto& a = t.groups()[i];
      const auto& b = back.groups()[i];
      CHECK(a.group_id == b.group_id);
      CHECK(a.assignment == b.assignment);
      CHECK(a.n_treated == b.n_treated);
      CHECK(a.cases_treated == b.cases_treated);
      CHECK(a.n_control == b.n_control);
      CHECK(a.cases_control == b.cases_control);
    }
    CHECK(out.str() == testing::kCholeraCsv);
  }

  TEST_CASE("household summaries by direct counting") {
    std::vector<HouseholdRecord> r{{"1", 1, 1, 1}, {"2", 1, 1, 0}, {"3", 0, 1, 1}, {"4", 0, 1, 1}};
    const auto s = summarize_households(r);
    CHECK(s.p1 == doctest::Approx(0.5));
    CHECK(s.p0 == doctest::Approx(1.0));
    CHECK(s.attack1 == doctest::Approx(1.0));
    CHECK(s.attack0 == doctest::Approx(1.0));
    CHECK(s.n_records == 4);

    std::reverse(r.begin(), r.end());
    const auto s2 = summarize_households(r);
    CHECK(s2.p1 == s.p1);
    CHECK(s2.p0 == s.p0);
  }

  TEST_CASE("households without infected index cases") {
    std::vector<HouseholdRecord> r{{"1", 1, 0, 1}, {"2", 0, 0, 0}};
    CHECK_THROWS_WITH_AS(summarize_households(r), "no infected index cases", EstimationError);
    std::vector<HouseholdRecord> one_arm{{"1", 1, 1, 1}};
    CHECK_THROWS_AS(summarize_households(one_arm), EstimationError);
  }

  TEST_CASE("household summaries are invariant to record order") {
    HouseholdWorld w{0.3, 0.2, 0.5, 0.25, 0.4, 0.1, 0.2};
    auto r = simulate_households(w, 2000, 3);
    const auto a = summarize_households(r);
    std::mt19937 gen(5);
    std::shuffle(r.begin(), r.end(), gen);
    const auto b = summarize_households(r);
    CHECK(a.p1 == b.p1);
    CHECK(a.p0 == b.p0);
    CHECK(a.attack1 == b.attack1);
    CHECK(a.attack0 == b.attack0);
  }

  TEST_CASE("simulated households match the analytic mixture") {
    HouseholdWorld w{0.3, 0.2, 0.5, 0.25, 0.4, 0.1, 0.2};
    const auto t = true_household_quantities(w);
    const auto r = simulate_households(w, 10000, 11);
    const auto s = summarize_households(r);
    const double se1 = std::sqrt(t.p1 * (1 - t.p1) / static_cast<double>(s.n_index1));
    const double se0 = std::sqrt(t.p0 * (1 - t.p0) / static_cast<double>(s.n_index0));
    CHECK(std::abs(s.p1 - t.p1) < 3 * se1);
    CHECK(std::abs(s.p0 - t.p0) < 3 * se0);
  }

  TEST_CASE("households round-trip") {
    std::vector<HouseholdRecord> r{{"a", 1, 0, 1}, {"b", 0, 1, 0}};
    std::ostringstream out;
    write_households(out, r);
    std::istringstream in(out.str());
    const auto back = parse_households(in);
    REQUIRE(back.size() == 2);
    CHECK(back[1].household_id == "b");
    CHECK(back[1].y1 == 1);
    std::istringstream bad("household_id,z1,y1,y2\nx,2,0,0\n");
    CHECK_THROWS_AS(parse_households(bad), ParseError);
  }

  TEST_CASE("exposure summaries of the others") {
    const auto g_of = [](std::vector<int> z, ExposureSummary kind) {
      ClusterData c{"c", {}};
      for (std::size_t j = 0; j < z.size(); ++j) c.members.push_back({std::to_string(j), z[j], 0.0, {0.0}});
      std::vector<double> out;
      for (const auto& f : cluster_features(c, kind, ExposureSummary::MeanOfOthers)) out.push_back(f.g[0]);
      return out;
    };
    CHECK(g_of({1, 0, 1}, ExposureSummary::CountOfOthers) == std::vector<double>{1, 2, 1});
    CHECK(g_of({0, 0}, ExposureSummary::MeanOfOthers) == std::vector<double>{0, 0});
    const auto m = g_of({1, 1, 0, 0}, ExposureSummary::MeanOfOthers);
    CHECK(m[0] == doctest::Approx(1.0 / 3));
    CHECK(m[1] == doctest::Approx(1.0 / 3));
    CHECK(m[2] == doctest::Approx(2.0 / 3));
    CHECK(m[3] == doctest::Approx(2.0 / 3));
  }

  TEST_CASE("mean and count ignore the order of the others; identity does not") {
    std::vector<std::vector<double>> l{{1.0}, {2.0}, {5.0}};
    std::vector<std::vector<double>> swapped{{1.0}, {5.0}, {2.0}};
    for (auto kind : {ExposureSummary::MeanOfOthers, ExposureSummary::CountOfOthers}) {
      CHECK(summarize_others(kind, l, 0) == summarize_others(kind, swapped, 0));
    }
    CHECK(summarize_others(ExposureSummary::IdentityVector, l, 0) !=
          summarize_others(ExposureSummary::IdentityVector, swapped, 0));
    CHECK(summarize_others(ExposureSummary::IdentityVector, l, 1) == std::vector<double>{1.0, 5.0});
  }

  TEST_CASE("clusters round-trip and validate") {
    std::istringstream in(
        "cluster_id,individual_id,z,y,l_1,l_2\n"
        "a,1,1,0.5,1,0.25\n"
        "b,1,0,1.5,0,2\n"
        "a,2,0,-2,0,1\n"
        "b,2,1,3,1,1\n");
    const auto c = parse_clusters(in);
    REQUIRE(c.size() == 2);
    CHECK(c[0].cluster_id == "a");
    CHECK(c[0].size() == 2);
    CHECK(c[0].members[1].y == -2.0);
    CHECK(c[0].members[0].l == std::vector<double>{1.0, 0.25});
    validate_clusters(c);
    std::ostringstream out;
    write_clusters(out, c);
    std::istringstream again(out.str());
    const auto back = parse_clusters(again);
    CHECK(back[1].members[0].y == c[1].members[0].y);
    CHECK(back[0].members[0].l == c[0].members[0].l);

    std::vector<ClusterData> lone{{"x", {{"1", 1, 0.0, {}}}}};
    CHECK_THROWS_AS(validate_clusters(lone), ValidationError);
  }
}
