#include "interfere/infectiousness.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <ostream>

#include "interfere/errors.hpp"

namespace interfere {

namespace {

struct Fractions {
  double doomed;
  double prot;
};

Fractions fractions(const InfectStudy& s) {
  const double d = s.doomed_fraction();
  if (!(d > 0.0)) throw EstimationError("doomed fraction is zero: no infections in the treated arm");
  if (d > 1.0) {
    throw ValidationError("attack1 exceeds attack0; the data contradict monotonicity");
  }
  return {d, 1.0 - d};
}

double logit(double p) { return std::log(p / (1.0 - p)); }

std::optional<std::pair<double, double>> minmax_opt(std::optional<double> a, std::optional<double> b) {
  if (!a || !b) return std::nullopt;
  return std::pair{std::min(*a, *b), std::max(*a, *b)};
}

}  // namespace

std::optional<double> InfectEffect::risk_ratio() const {
  if (p_u <= 0.0) return std::nullopt;
  return p_v / p_u;
}

std::optional<double> InfectEffect::odds_ratio() const {
  if (p_u <= 0.0 || p_v >= 1.0) return std::nullopt;
  return p_v * (1.0 - p_u) / (p_u * (1.0 - p_v));
}

std::optional<double> InfectEffect::efficacy() const {
  if (p_u <= 0.0) return std::nullopt;
  return 1.0 - p_v / p_u;
}

std::string to_string(SensitivityKind kind) {
  switch (kind) {
    case SensitivityKind::Theta: return "theta";
    case SensitivityKind::Gamma: return "gamma";
    case SensitivityKind::Beta: return "beta";
  }
  return "?";
}

SensitivityKind parse_sensitivity_kind(const std::string& name) {
  if (name == "theta") return SensitivityKind::Theta;
  if (name == "gamma") return SensitivityKind::Gamma;
  if (name == "beta") return SensitivityKind::Beta;
  throw ValidationError("unknown sensitivity parameterization '" + name + "'");
}

InfectEffect crude_effect(const InfectStudy& study) { return {study.p1, study.p0}; }

std::optional<std::pair<double, double>> crude_rd_interval(const InfectStudy& study, double level) {
  if (study.n_index1 == 0 || study.n_index0 == 0) return std::nullopt;
  const boost::math::normal_distribution<double> n01;
  const double z = boost::math::quantile(n01, 0.5 + level / 2.0);
  const double var = study.p1 * (1.0 - study.p1) / static_cast<double>(study.n_index1) +
                     study.p0 * (1.0 - study.p0) / static_cast<double>(study.n_index0);
  const double rd = study.p1 - study.p0;
  const double half = z * std::sqrt(var);
  return std::pair{rd - half, rd + half};
}

std::pair<double, double> theta_range(const InfectStudy& study) { return {-study.p0, 1.0 - study.p0}; }

std::pair<double, double> gamma_range(const InfectStudy& study) {
  const auto f = fractions(study);
  if (f.prot <= 0.0) return {study.p0, study.p0};
  const double lo = std::max(0.0, (study.p0 - f.doomed) / f.prot);
  const double hi = std::min(1.0, study.p0 / f.prot);
  return {lo, hi};
}

InfectEffect theta_adjust(const InfectStudy& study, double theta) {
  const auto [lo, hi] = theta_range(study);
  if (!(theta >= lo && theta <= hi)) throw RangeError("theta leaves p0 + theta outside [0, 1]", lo, hi);
  return {study.p1, study.p0 + theta};
}

std::optional<std::pair<double, double>> theta_adjusted_interval(const InfectStudy& study, double theta,
                                                                 double level) {
  auto ci = crude_rd_interval(study, level);
  if (ci) {
    ci->first -= theta;
    ci->second -= theta;
  }
  return ci;
}

InfectEffect gamma_adjust(const InfectStudy& study, double gamma) {
  const auto f = fractions(study);
  if (f.prot <= 0.0) return {study.p1, study.p0};
  const auto [lo, hi] = gamma_range(study);
  // endpoints are ratios, so allow rounding slack; p_u is clamped below
  const double slack = 8.0 * std::numeric_limits<double>::epsilon();
  if (!(gamma >= lo - slack && gamma <= hi + slack)) {
    throw RangeError("gamma outside the range admitted by the data", lo, hi);
  }
  const double p_u = std::clamp((study.p0 - gamma * f.prot) / f.doomed, 0.0, 1.0);
  return {study.p1, p_u};
}

BetaSolution solve_beta(double p0, double protected_fraction, double beta) {
  if (!std::isfinite(beta)) throw ValidationError("beta must be finite");
  const double V = protected_fraction;
  if (!(V >= 0.0 && V < 1.0)) throw ValidationError("protected fraction must lie in [0, 1)");
  const double B = std::exp(beta);

  BetaSolution sol;
  const double a = (B - 1.0) * (1.0 - V);
  const double b = -(p0 * (B - 1.0) + (1.0 - V) * B + V);
  const double c = p0 * B;

  if (beta == 0.0 || V == 0.0) {
    // Equal odds, or no protected stratum: the equation is linear with root p0.
    sol.p_u = p0;
    sol.roots = {p0};
  } else {
    // Numerically stable pair of roots; f(0) = p0 B >= 0 and f(1) = p0 - 1 <= 0,
    // so exactly one root lies in [0, 1].
    const double disc = std::max(0.0, b * b - 4.0 * a * c);
    const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
    std::vector<double> roots;
    if (q != 0.0) roots.push_back(c / q);
    roots.push_back(q / a);
    std::sort(roots.begin(), roots.end());
    sol.roots = roots;

    constexpr double kSlack = 1e-12;
    std::vector<double> inside;
    for (double r : roots) {
      if (r >= -kSlack && r <= 1.0 + kSlack) inside.push_back(std::clamp(r, 0.0, 1.0));
    }
    if (inside.empty()) {
      throw EstimationError("beta quadratic has no root in [0, 1]; inputs violate an internal invariant");
    }
    sol.roots_in_unit_interval_both = inside.size() > 1;
    // With both roots admissible (touching boundary cases) take the one
    // continuous with the beta = 0 solution p_u = p0.
    sol.p_u = *std::min_element(inside.begin(), inside.end(),
                                [&](double x, double y) { return std::abs(x - p0) < std::abs(y - p0); });
  }

  // Back-substitute through both defining identities.
  const double denom = B - sol.p_u * (B - 1.0);
  sol.gamma = denom > 0.0 ? sol.p_u / denom : 0.0;
  const double id1 = sol.gamma * B / (1.0 + sol.gamma * (B - 1.0)) - sol.p_u;
  const double id2 = sol.gamma * V + sol.p_u * (1.0 - V) - p0;
  sol.residual = (V == 0.0) ? std::abs(id1) : std::max(std::abs(id1), std::abs(id2));
  return sol;
}

InfectEffect beta_adjust(const InfectStudy& study, double beta) {
  const auto f = fractions(study);
  const auto sol = solve_beta(study.p0, f.prot, beta);
  if (sol.residual > 1e-8) {
    throw EstimationError("beta solution failed back-substitution (residual " + std::to_string(sol.residual) + ")");
  }
  return {study.p1, sol.p_u};
}

std::pair<double, double> MonotonicityBounds::p_u() const {
  return {std::min(at_gamma_min.effect.p_u, at_gamma_max.effect.p_u),
          std::max(at_gamma_min.effect.p_u, at_gamma_max.effect.p_u)};
}

std::pair<double, double> MonotonicityBounds::risk_difference() const {
  const double a = at_gamma_min.effect.risk_difference();
  const double b = at_gamma_max.effect.risk_difference();
  return {std::min(a, b), std::max(a, b)};
}

std::optional<std::pair<double, double>> MonotonicityBounds::risk_ratio() const {
  return minmax_opt(at_gamma_min.effect.risk_ratio(), at_gamma_max.effect.risk_ratio());
}

std::optional<std::pair<double, double>> MonotonicityBounds::odds_ratio() const {
  return minmax_opt(at_gamma_min.effect.odds_ratio(), at_gamma_max.effect.odds_ratio());
}

std::optional<std::pair<double, double>> MonotonicityBounds::efficacy() const {
  return minmax_opt(at_gamma_min.effect.efficacy(), at_gamma_max.effect.efficacy());
}

MonotonicityBounds monotonicity_bounds(const InfectStudy& study) {
  const auto [lo, hi] = gamma_range(study);
  return {{lo, gamma_adjust(study, lo)}, {hi, gamma_adjust(study, hi)}};
}

double theta_from_p_u(const InfectStudy& study, double p_u) { return p_u - study.p0; }

double gamma_from_p_u(const InfectStudy& study, double p_u) {
  const auto f = fractions(study);
  if (f.prot <= 0.0) throw EstimationError("gamma is not identified without a protected stratum");
  return (study.p0 - p_u * f.doomed) / f.prot;
}

double beta_from_p_u(const InfectStudy& study, double p_u) {
  const double gamma = gamma_from_p_u(study, p_u);
  if (!(p_u > 0.0 && p_u < 1.0 && gamma > 0.0 && gamma < 1.0)) {
    throw RangeError("beta is finite only for p_u and gamma strictly inside (0, 1)", 0.0, 1.0);
  }
  return logit(p_u) - logit(gamma);
}

std::vector<SweepRow> sweep(const InfectStudy& study, const SensitivitySpec& spec) {
  std::vector<SweepRow> rows;
  rows.reserve(spec.grid.size());
  for (double v : spec.grid) {
    SweepRow row;
    row.kind = spec.kind;
    row.param = v;
    try {
      switch (spec.kind) {
        case SensitivityKind::Theta:
          row.effect = theta_adjust(study, v);
          row.rd_interval = theta_adjusted_interval(study, v);
          break;
        case SensitivityKind::Gamma: row.effect = gamma_adjust(study, v); break;
        case SensitivityKind::Beta: row.effect = beta_adjust(study, v); break;
      }
      row.in_range = true;
    } catch (const RangeError&) {
      row.in_range = false;
    }
    rows.push_back(row);
  }
  return rows;
}

void write_sweep_report(std::ostream& out, const std::vector<SweepRow>& rows, int precision) {
  ReportWriter w(out, {"kind", "param", "p_v", "p_u", "rd", "rr", "or_", "efficacy", "in_range"}, precision);
  w.header();
  for (const auto& r : rows) {
    if (!r.in_range) {
      w.row({to_string(r.kind), w.num(r.param), "NA", "NA", "NA", "NA", "NA", "NA", "0"});
      continue;
    }
    const auto& e = r.effect;
    w.row({to_string(r.kind), w.num(r.param), w.num(e.p_v), w.num(e.p_u), w.num(e.risk_difference()),
           w.num(e.risk_ratio()), w.num(e.odds_ratio()), w.num(e.efficacy()), "1"});
  }
}

}  // namespace interfere
