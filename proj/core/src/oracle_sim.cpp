#include "interfere/oracle_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>

#include "interfere/errors.hpp"
#include "interfere/rng.hpp"

namespace interfere {

namespace {

// Stream tags keep the draw families of one entity apart.
constexpr std::uint64_t kHouseholdStream = 1;
constexpr std::uint64_t kPotentialOutcomeStream = 2;
constexpr std::uint64_t kFirstStageStream = 3;
constexpr std::uint64_t kSecondStageStream = 4;
constexpr std::uint64_t kClusterStream = 5;

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(std::string(what) + " must lie in [0, 1]");
}

/// Binomial(n, p) probabilities computed in log space.
std::vector<double> binomial_pmf(std::int64_t n, double p) {
  std::vector<double> pmf(static_cast<std::size_t>(n + 1), 0.0);
  if (p <= 0.0) {
    pmf.front() = 1.0;
    return pmf;
  }
  if (p >= 1.0) {
    pmf.back() = 1.0;
    return pmf;
  }
  const double lp = std::log(p), lq = std::log1p(-p);
  const double lfn = std::lgamma(static_cast<double>(n) + 1.0);
  for (std::int64_t c = 0; c <= n; ++c) {
    const double lc = lfn - std::lgamma(static_cast<double>(c) + 1.0) - std::lgamma(static_cast<double>(n - c) + 1.0);
    pmf[static_cast<std::size_t>(c)] = std::exp(lc + static_cast<double>(c) * lp + static_cast<double>(n - c) * lq);
  }
  return pmf;
}

/// Law of the number of successes among independent trials.
std::vector<double> poisson_binomial(const std::vector<double>& probs) {
  std::vector<double> pmf{1.0};
  for (double p : probs) {
    std::vector<double> next(pmf.size() + 1, 0.0);
    for (std::size_t c = 0; c < pmf.size(); ++c) {
      next[c] += pmf[c] * (1.0 - p);
      next[c + 1] += pmf[c] * p;
    }
    pmf = std::move(next);
  }
  return pmf;
}

std::int64_t mixed_count(std::int64_t n, double coverage, const std::string& label) {
  const auto k = static_cast<std::int64_t>(std::llround(coverage * static_cast<double>(n)));
  if (k < 1 || k > n - 1) {
    throw ValidationError("strategy '" + label + "' treats " + std::to_string(k) + " of " + std::to_string(n) +
                          " in some group; mixed allocation needs both arms nonempty");
  }
  return k;
}

struct StrategyMeans {
  double treated = 0.0;  // mean over groups of the group-average Ybar(1)
  double control = 0.0;
  double overall = 0.0;
};

StrategyMeans strategy_means(const TrialWorld& world, const AllocationStrategy& s, Allocation allocation) {
  StrategyMeans m;
  const auto n_groups = world.group_sizes.size();
  for (std::size_t i = 0; i < n_groups; ++i) {
    const auto n = world.group_sizes[i];
    double y1 = 0.0, y0 = 0.0, share = 0.0;
    if (allocation == Allocation::Mixed) {
      const auto k = mixed_count(n, s.coverage, s.label);
      for (std::int64_t j = 0; j < n; ++j) {
        y1 += world.potential_outcome(i, j, 1, k - 1);
        y0 += world.potential_outcome(i, j, 0, k);
      }
      share = static_cast<double>(k) / static_cast<double>(n);
    } else {
      const auto pmf = binomial_pmf(n - 1, s.coverage);
      for (std::int64_t j = 0; j < n; ++j) {
        for (std::int64_t c = 0; c < n; ++c) {
          const double w = pmf[static_cast<std::size_t>(c)];
          if (w == 0.0) continue;
          y1 += w * world.potential_outcome(i, j, 1, c);
          y0 += w * world.potential_outcome(i, j, 0, c);
        }
      }
      share = s.coverage;
    }
    y1 /= static_cast<double>(n);
    y0 /= static_cast<double>(n);
    m.treated += y1;
    m.control += y0;
    m.overall += share * y1 + (1.0 - share) * y0;
  }
  const auto N = static_cast<double>(n_groups);
  m.treated /= N;
  m.control /= N;
  m.overall /= N;
  return m;
}

TrialEffects effects_from(const StrategyMeans& psi, const StrategyMeans& phi) {
  TrialEffects e;
  e.direct_psi = psi.control - psi.treated;
  e.direct_phi = phi.control - phi.treated;
  e.indirect = phi.control - psi.control;
  e.total = phi.control - psi.treated;
  e.overall = phi.overall - psi.overall;
  return e;
}

double mean_of_others(std::size_t n, double total, double self) {
  return (total - self) / static_cast<double>(n - 1);
}

}  // namespace

// ---------------------------------------------------------------------------
// Households

void validate(const HouseholdWorld& w) {
  check_probability(w.doomed, "doomed mass");
  check_probability(w.protected_, "protected mass");
  check_probability(w.immune, "immune mass");
  if (std::abs(w.doomed + w.protected_ + w.immune - 1.0) > 1e-12) {
    throw ValidationError("stratum probabilities must sum to 1");
  }
  check_probability(w.q_doomed_v, "q_doomed_v");
  check_probability(w.q_doomed_u, "q_doomed_u");
  check_probability(w.q_protected_u, "q_protected_u");
  check_probability(w.q2, "q2");
  if (!(w.doomed > 0.0)) {
    throw ValidationError("doomed stratum is empty: no household has an infected vaccinated index case");
  }
}

bool satisfies_assumption2(const HouseholdWorld& w) { return w.q_protected_u <= w.q_doomed_u; }

HouseholdTruth true_household_quantities(const HouseholdWorld& w) {
  validate(w);
  HouseholdTruth t;
  t.attack1 = w.doomed;
  t.attack0 = w.doomed + w.protected_;
  t.pi_d = w.doomed / t.attack0;
  t.pi_p = 1.0 - t.pi_d;
  t.p_v = w.q_doomed_v;
  t.p_u = w.q_doomed_u;
  t.p1 = w.q_doomed_v;
  t.p0 = t.pi_d * w.q_doomed_u + t.pi_p * w.q_protected_u;
  t.theta = t.p_u - t.p0;
  t.gamma = w.q_protected_u;
  const auto interior = [](double p) { return p > 0.0 && p < 1.0; };
  if (interior(w.q_doomed_u) && interior(w.q_protected_u)) t.beta = logit(w.q_doomed_u) - logit(w.q_protected_u);
  return t;
}

std::vector<HouseholdRecord> simulate_households(const HouseholdWorld& w, std::size_t n, std::uint64_t seed) {
  validate(w);
  if (n == 0) throw ValidationError("number of households must be positive");
  std::vector<HouseholdRecord> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    KeyedRng rng(seed, i, kHouseholdStream);
    auto& r = out[i];
    r.household_id = "h" + std::to_string(i + 1);
    r.z1 = rng.bernoulli(0.5) ? 1 : 0;
    const double s = rng.uniform();
    const bool doomed = s < w.doomed;
    const bool prot = !doomed && s < w.doomed + w.protected_;
    r.y1 = (doomed || (prot && r.z1 == 0)) ? 1 : 0;
    double q = w.q2;
    if (r.y1 == 1) q = r.z1 == 1 ? w.q_doomed_v : (doomed ? w.q_doomed_u : w.q_protected_u);
    r.y2 = rng.bernoulli(q) ? 1 : 0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trials

std::string to_string(Allocation a) { return a == Allocation::Mixed ? "mixed" : "bernoulli"; }

Allocation parse_allocation(const std::string& name) {
  if (name == "mixed") return Allocation::Mixed;
  if (name == "bernoulli") return Allocation::Bernoulli;
  throw ValidationError("unknown allocation '" + name + "' (expected mixed or bernoulli)");
}

double TrialWorld::potential_outcome(std::size_t group, std::int64_t member, int z, std::int64_t k_others) const {
  KeyedRng rng(world_seed, group, kPotentialOutcomeStream + 16 * static_cast<std::uint64_t>(member));
  const double risk = rule(z, k_others);
  if (scale == OutcomeScale::Binary) return rng.uniform() < std::clamp(risk, 0.0, 1.0) ? 1.0 : 0.0;
  return heterogeneity * rng.normal() + risk;
}

void validate(const TrialWorld& w) {
  if (w.group_sizes.empty()) throw ValidationError("trial world has no groups");
  for (auto n : w.group_sizes) {
    if (n < 2 || n > 10000) throw ValidationError("group sizes must lie in [2, 10000]");
  }
  if (!(w.heterogeneity >= 0.0)) throw ValidationError("heterogeneity must be nonnegative");
}

TrialTruth true_trial_effects(const TrialWorld& world, const AllocationStrategy& psi, const AllocationStrategy& phi) {
  validate(world);
  for (const auto* s : {&psi, &phi}) check_probability(s->coverage, "coverage");
  TrialTruth t;
  t.mixed = effects_from(strategy_means(world, psi, Allocation::Mixed), strategy_means(world, phi, Allocation::Mixed));
  t.bernoulli = effects_from(strategy_means(world, psi, Allocation::Bernoulli),
                             strategy_means(world, phi, Allocation::Bernoulli));
  return t;
}

TrialTable simulate_trial(const TrialWorld& world, const AllocationStrategy& psi, const AllocationStrategy& phi,
                          std::size_t groups_psi, Allocation allocation, std::uint64_t seed) {
  validate(world);
  if (world.scale != OutcomeScale::Binary) throw ValidationError("trial simulation needs a binary outcome world");
  if (psi.label == phi.label) throw ValidationError("the two strategies need distinct labels");
  const auto N = world.group_sizes.size();
  if (groups_psi < 1 || groups_psi >= N) {
    throw ValidationError("each strategy needs at least one of the " + std::to_string(N) + " groups");
  }

  // Stage one: a uniformly random subset of groups receives psi.
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), std::size_t{0});
  KeyedRng first(seed, 0, kFirstStageStream);
  for (std::size_t i = N - 1; i > 0; --i) std::swap(order[i], order[first.below(i + 1)]);
  std::vector<const AllocationStrategy*> assigned(N, &phi);
  for (std::size_t r = 0; r < groups_psi; ++r) assigned[order[r]] = &psi;

  std::vector<GroupSummary> rows;
  rows.reserve(N);
  for (std::size_t i = 0; i < N; ++i) {
    const auto n = world.group_sizes[i];
    const auto& s = *assigned[i];
    KeyedRng rng(seed, i + 1, kSecondStageStream);
    std::vector<int> z(static_cast<std::size_t>(n), 0);
    if (allocation == Allocation::Mixed) {
      const auto k = mixed_count(n, s.coverage, s.label);
      std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
      std::iota(idx.begin(), idx.end(), std::int64_t{0});
      for (std::int64_t r = 0; r < k; ++r) {
        const auto pick = r + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n - r)));
        std::swap(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(pick)]);
        z[static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])] = 1;
      }
    } else {
      for (auto& zj : z) zj = rng.bernoulli(s.coverage) ? 1 : 0;
    }
    const std::int64_t treated = std::accumulate(z.begin(), z.end(), std::int64_t{0});
    GroupSummary g;
    g.group_id = "g" + std::to_string(i + 1);
    g.assignment = s.label;
    for (std::int64_t j = 0; j < n; ++j) {
      const int zj = z[static_cast<std::size_t>(j)];
      const bool y = world.potential_outcome(i, j, zj, treated - zj) > 0.5;
      if (zj) {
        ++g.n_treated;
        g.cases_treated += y;
      } else {
        ++g.n_control;
        g.cases_control += y;
      }
    }
    rows.push_back(std::move(g));
  }
  return TrialTable(std::move(rows));
}

// ---------------------------------------------------------------------------
// Clusters

std::string to_string(ConfounderLaw law) {
  switch (law) {
    case ConfounderLaw::ShiftNormal: return "shift-normal";
    case ConfounderLaw::ShiftBinary: return "shift-binary";
    case ConfounderLaw::CovariateLinked: return "covariate-linked";
  }
  return "?";
}

ConfounderLaw parse_confounder_law(const std::string& name) {
  if (name == "shift-normal") return ConfounderLaw::ShiftNormal;
  if (name == "shift-binary") return ConfounderLaw::ShiftBinary;
  if (name == "covariate-linked") return ConfounderLaw::CovariateLinked;
  throw ValidationError("unknown confounder law '" + name + "'");
}

void validate(const ClusterWorld& w) {
  if (w.cluster_size < 2) throw ValidationError("cluster size must be at least 2");
  check_probability(w.l_prob, "l_prob");
  check_probability(w.u_prob0, "u_prob0");
  check_probability(w.u_prob1, "u_prob1");
  if (!(std::abs(w.rho) < 1.0)) throw ValidationError("rho must lie in (-1, 1)");
  if (!(w.sigma >= 0.0)) throw ValidationError("sigma must be nonnegative");
  for (double v : {w.a0, w.a1, w.kappa, w.beta0, w.beta_l, w.beta_h, w.psi_d0, w.psi_d1, w.psi_s, w.lambda_u,
                   w.lambda_v}) {
    if (!std::isfinite(v)) throw ValidationError("cluster world coefficients must be finite");
  }
}

SimulatedClusters simulate_clusters(const ClusterWorld& w, std::size_t n_clusters, std::uint64_t seed) {
  validate(w);
  if (n_clusters == 0) throw ValidationError("number of clusters must be positive");
  const std::size_t n = w.cluster_size;
  SimulatedClusters out;
  out.data.reserve(n_clusters);
  out.ledger.reserve(n_clusters * n);
  std::vector<double> l(n), u(n), e(n);
  std::vector<int> z(n);
  for (std::size_t c = 0; c < n_clusters; ++c) {
    KeyedRng rng(seed, c, kClusterStream);
    for (std::size_t j = 0; j < n; ++j) {
      switch (w.law) {
        case ConfounderLaw::ShiftNormal:
          l[j] = rng.bernoulli(w.l_prob) ? 1.0 : 0.0;
          z[j] = rng.bernoulli(expit(w.a0 + w.a1 * l[j]));
          u[j] = w.kappa * z[j] + rng.normal();
          break;
        case ConfounderLaw::ShiftBinary:
          l[j] = rng.bernoulli(w.l_prob) ? 1.0 : 0.0;
          z[j] = rng.bernoulli(expit(w.a0 + w.a1 * l[j]));
          u[j] = rng.bernoulli(z[j] ? w.u_prob1 : w.u_prob0) ? 1.0 : 0.0;
          break;
        case ConfounderLaw::CovariateLinked:
          u[j] = rng.normal();
          l[j] = w.rho * u[j] + std::sqrt(1.0 - w.rho * w.rho) * rng.normal();
          z[j] = rng.bernoulli(expit(w.a0 + w.a1 * l[j]));
          break;
      }
      e[j] = rng.normal();
    }
    const double sum_l = std::accumulate(l.begin(), l.end(), 0.0);
    const double sum_u = std::accumulate(u.begin(), u.end(), 0.0);
    const int sum_z = std::accumulate(z.begin(), z.end(), 0);

    ClusterData cd;
    cd.cluster_id = "c" + std::to_string(c + 1);
    for (std::size_t j = 0; j < n; ++j) {
      const double g = sum_z - z[j];
      const double h = mean_of_others(n, sum_l, l[j]);
      const double v = mean_of_others(n, sum_u, u[j]);
      ClusterMember m;
      m.individual_id = cd.cluster_id + "_" + std::to_string(j + 1);
      m.z = z[j];
      m.l = {l[j]};
      m.y = w.beta0 + w.beta_l * l[j] + w.beta_h * h + z[j] * (w.psi_d0 + w.psi_d1 * g) + w.psi_s * g +
            w.lambda_u * u[j] + w.lambda_v * v + w.sigma * e[j];
      out.ledger.push_back({cd.cluster_id, m.individual_id, u[j], v});
      cd.members.push_back(std::move(m));
    }
    out.data.push_back(std::move(cd));
  }
  return out;
}

void write_ledger(std::ostream& out, std::span<const LedgerRow> ledger, DelimitedFormat format) {
  const char d = format.delimiter;
  out << "cluster_id" << d << "individual_id" << d << "u" << d << "v" << '\n';
  for (const auto& r : ledger) {
    out << r.cluster_id << d << r.individual_id << d << format_number(r.u, 17) << d << format_number(r.v, 17) << '\n';
  }
}

double conditional_u_mean(const ClusterWorld& w, int z, double l) {
  if (w.law == ConfounderLaw::ShiftBinary) return z ? w.u_prob1 : w.u_prob0;
  // Normal conditional law of U: N(kappa z, 1) or, given L = l, N(rho l, 1 - rho^2).
  const double centre = w.law == ConfounderLaw::ShiftNormal ? w.kappa * z : w.rho * l;
  const double sd = w.law == ConfounderLaw::ShiftNormal ? 1.0 : std::sqrt(1.0 - w.rho * w.rho);
  constexpr int kPanels = 4000;
  const double lo = centre - 10.0 * sd, hi = centre + 10.0 * sd;
  const double step = (hi - lo) / kPanels;
  double num = 0.0, den = 0.0;
  for (int k = 0; k <= kPanels; ++k) {
    const double x = lo + step * k;
    const double weight = (k == 0 || k == kPanels) ? 0.5 : 1.0;
    const double dens = std::exp(-0.5 * ((x - centre) / sd) * ((x - centre) / sd));
    num += weight * x * dens;
    den += weight * dens;
  }
  return num / den;
}

double true_delta_d(const ClusterWorld& w, double z, double, double l, double) {
  // E[Y(0,g) | Z=z, ...] - E[Y(0,g) | Z=0, ...]; only the own confounder moves with z.
  const int zi = z != 0.0 ? 1 : 0;
  return w.lambda_u * (conditional_u_mean(w, zi, l) - conditional_u_mean(w, 0, l));
}

double true_delta_s(const ClusterWorld& w, double g, double, double) {
  if (w.law == ConfounderLaw::CovariateLinked) return 0.0;
  const double shift = conditional_u_mean(w, 1, 0.0) - conditional_u_mean(w, 0, 0.0);
  return w.lambda_v * shift * g / static_cast<double>(w.cluster_size - 1);
}

DeltaFamily true_delta_family(const ClusterWorld& w) {
  if (w.law == ConfounderLaw::CovariateLinked) return DeltaFamily::zero();
  return DeltaFamily::linear(true_delta_d(w, 1.0, 0.0, 0.0, 0.0), true_delta_s(w, 1.0, 0.0, 0.0));
}

ModelParameters true_effect_parameters(const ClusterWorld& w) {
  ModelParameters p;
  p.psi_d = Eigen::Vector2d(w.psi_d0, w.psi_d1);
  p.psi_s = Eigen::VectorXd::Constant(1, w.psi_s);
  return p;
}

double true_bias(const ClusterWorld& w, const ExposurePair& zg, const ExposurePair& zg_prime) {
  if (w.law == ConfounderLaw::CovariateLinked) return 0.0;
  const double m0 = conditional_u_mean(w, 0, 0.0), m1 = conditional_u_mean(w, 1, 0.0);
  const double m = static_cast<double>(w.cluster_size - 1);
  const auto mean_u = [&](double z) { return m0 + (m1 - m0) * z; };
  const auto mean_v = [&](double g) { return m0 + (m1 - m0) * g / m; };
  return w.lambda_u * (mean_u(zg.z) - mean_u(zg_prime.z)) + w.lambda_v * (mean_v(zg.g) - mean_v(zg_prime.g));
}

BiasSpecGeneral world_bias_spec(const ClusterWorld& w, double l, const std::vector<double>& others_l) {
  validate(w);
  if (w.law != ConfounderLaw::ShiftBinary) throw ValidationError("a finite-support spec needs a binary-U world");
  const std::size_t m = w.cluster_size - 1;
  if (others_l.size() != m) throw ValidationError("others_l must hold cluster_size - 1 covariates");
  const double h = std::accumulate(others_l.begin(), others_l.end(), 0.0) / static_cast<double>(m);

  BiasSpecGeneral spec;
  for (int u = 0; u <= 1; ++u) {
    for (std::size_t s = 0; s <= m; ++s) spec.support.push_back({double(u), double(s) / double(m)});
  }

  // P(u, v | z, g): own U from own z; the others' U sum mixes g draws at
  // u_prob1 with m - g draws at u_prob0.
  const auto law_given = [w, m](double z, double g) {
    const auto gi = static_cast<std::size_t>(std::llround(g));
    if (gi > m || std::abs(g - double(gi)) > 0 || (z != 0.0 && z != 1.0)) {
      throw ValidationError("exposure pair outside the world's support");
    }
    std::vector<double> probs(gi, w.u_prob1);
    probs.resize(m, w.u_prob0);
    const auto sum_law = poisson_binomial(probs);
    const double pu1 = z == 1.0 ? w.u_prob1 : w.u_prob0;
    std::vector<double> p;
    for (int u = 0; u <= 1; ++u) {
      for (std::size_t s = 0; s <= m; ++s) p.push_back((u ? pu1 : 1.0 - pu1) * sum_law[s]);
    }
    return p;
  };
  spec.dist_at = [law_given](const ExposurePair& e) { return law_given(e.z, e.g); };

  const double pi_self = expit(w.a0 + w.a1 * l);
  std::vector<double> pi_others;
  for (double lk : others_l) pi_others.push_back(expit(w.a0 + w.a1 * lk));
  const auto g_law = poisson_binomial(pi_others);
  spec.dist_marg.assign(spec.support.size(), 0.0);
  for (int z = 0; z <= 1; ++z) {
    const double pz = z ? pi_self : 1.0 - pi_self;
    for (std::size_t g = 0; g <= m; ++g) {
      const auto p = law_given(z, double(g));
      for (std::size_t k = 0; k < p.size(); ++k) spec.dist_marg[k] += pz * g_law[g] * p[k];
    }
  }

  spec.outcome_mean = [w, l, h](const ExposurePair& e, const ConfounderPoint& pt) {
    return w.beta0 + w.beta_l * l + w.beta_h * h + e.z * (w.psi_d0 + w.psi_d1 * e.g) + w.psi_s * e.g +
           w.lambda_u * pt.u + w.lambda_v * pt.v;
  };
  return spec;
}

}  // namespace interfere
