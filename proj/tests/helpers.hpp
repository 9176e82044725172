#pragma once

#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <random>

#include "interfere/confound_bias.hpp"
#include "interfere/oracle_sim.hpp"
#include "interfere/selection_gee.hpp"
#include "interfere/trial_data.hpp"

namespace testing {

inline const char* kCholeraCsv =
    "group_id,assignment,n_treated,cases_treated,n_control,cases_control\n"
    "1,50,12541,16,12541,18\n"
    "2,50,11513,26,11513,54\n"
    "3,30,10772,17,25134,119\n"
    "4,30,8883,22,20727,122\n"
    "5,30,5627,15,13130,92\n";

inline interfere::TrialTable cholera() {
  std::istringstream in(kCholeraCsv);
  return interfere::parse_group_summary(in);
}

inline std::string source_path(const std::string& rel) { return std::string(INTERFERE_SOURCE_DIR) + "/" + rel; }

struct Moments {
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean
};

inline Moments moments(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / (n - 1.0) / n)};
}

struct AdditiveSpec {
  interfere::BiasSpecGeneral spec;
  interfere::BiasSpecSimple simple;  // lambda, tau and the implied (dU, dV)
  interfere::ExposurePair zg;
  interfere::ExposurePair zg_prime;
};

// Finite support with outcome mean c(z,g) + lambda u + tau v and arbitrary
// normalized distributions.
inline AdditiveSpec random_additive_spec(std::mt19937_64& gen) {
  using namespace interfere;
  std::uniform_int_distribution<int> size(2, 8);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto n = static_cast<std::size_t>(size(gen));
  const auto draw = [&] {
    std::vector<double> p(n);
    double total = 0.0;
    for (auto& x : p) total += (x = unit(gen) + 1e-3);
    for (auto& x : p) x /= total;
    return p;
  };
  AdditiveSpec a;
  a.zg = {1.0, std::floor(unit(gen) * 4)};
  a.zg_prime = {0.0, std::floor(unit(gen) * 4)};
  for (std::size_t k = 0; k < n; ++k) a.spec.support.push_back({coef(gen), coef(gen)});
  const double lambda = coef(gen), tau = coef(gen), c1 = coef(gen), c0 = coef(gen);
  const auto zg = a.zg;
  a.spec.outcome_mean = [=](const ExposurePair& e, const ConfounderPoint& pt) {
    return (e == zg ? c1 : c0) + lambda * pt.u + tau * pt.v;
  };
  const auto p_at = draw(), p_prime = draw();
  a.spec.dist_at = [=](const ExposurePair& e) { return e == zg ? p_at : p_prime; };
  a.spec.dist_marg = draw();
  a.spec.reference = std::uniform_int_distribution<std::size_t>(0, n - 1)(gen);
  const auto [du, dv] = confounder_mean_differences(a.spec, a.zg, a.zg_prime);
  a.simple = {lambda, tau, du, dv};
  return a;
}

// Confounded clusters of four with a binary covariate: U shifts with own
// treatment, so the true delta functions are linear in z and g.
inline interfere::ClusterWorld w4_world() {
  interfere::ClusterWorld w;
  w.cluster_size = 4;
  w.law = interfere::ConfounderLaw::ShiftNormal;
  w.l_prob = 0.5;
  w.a0 = -0.5;
  w.a1 = 1.0;
  w.kappa = 0.8;
  w.beta0 = 1.0;
  w.beta_l = 0.5;
  w.beta_h = 0.3;
  w.psi_d0 = 1.0;
  w.psi_d1 = 0.25;
  w.psi_s = 0.4;
  w.lambda_u = 1.0;
  w.lambda_v = 1.5;
  w.sigma = 1.0;
  return w;
}

inline interfere::SelectionModel w4_model() {
  auto m = interfere::SelectionModel::defaults(1);
  m.propensity.terms = interfere::parse_form("1,l", 1);
  return m;
}

// Treatment logistic in a covariate that is itself correlated with U.
inline interfere::ClusterWorld w3_world() {
  interfere::ClusterWorld w;
  w.law = interfere::ConfounderLaw::CovariateLinked;
  w.rho = 0.6;
  w.a0 = -0.3;
  w.a1 = 0.8;
  w.lambda_u = 1.0;
  return w;
}

}  // namespace testing
