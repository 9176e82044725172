#include "interfere/estimands.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "interfere/errors.hpp"

namespace interfere {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum class Arm { Treated, Control, Overall };

double arm_rate(const GroupRates& r, Arm arm) {
  switch (arm) {
    case Arm::Treated: return r.rate_treated;
    case Arm::Control: return r.rate_control;
    case Arm::Overall: return r.rate_overall;
  }
  return kNaN;
}

const char* arm_name(Arm arm) {
  switch (arm) {
    case Arm::Treated: return "treated";
    case Arm::Control: return "control";
    case Arm::Overall: return "overall";
  }
  return "?";
}

/// Per-group rates of one arm for all groups carrying `label`.
std::vector<double> arm_rates(const TrialTable& trial, const std::string& label, Arm arm) {
  if (!trial.has_label(label)) throw EstimationError("allocation label '" + label + "' is absent");
  std::vector<double> out;
  for (const auto& g : trial.groups()) {
    if (g.assignment != label) continue;
    const double r = arm_rate(group_rates(g), arm);
    if (std::isnan(r)) {
      throw EstimationError("group '" + g.group_id + "' has an empty " + arm_name(arm) + " arm");
    }
    out.push_back(r);
  }
  return out;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample variance with denominator n-1; empty when n < 2.
std::optional<double> sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) return std::nullopt;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

/// Between-group two-arm contrast: mean(a) - mean(b), variance s_a^2/C_a + s_b^2/C_b.
EffectEstimate two_arm_contrast(Contrast kind, const TrialTable& trial, const std::string& phi,
                                Arm arm_phi, const std::string& psi, Arm arm_psi) {
  const auto a = arm_rates(trial, phi, arm_phi);
  const auto b = arm_rates(trial, psi, arm_psi);
  EffectEstimate e;
  e.contrast = kind;
  e.phi = phi;
  e.psi = psi;
  if (phi == psi && arm_phi == arm_psi) {
    e.point = 0.0;
  } else {
    e.point = mean(a) - mean(b);
  }
  const auto va = sample_variance(a);
  const auto vb = sample_variance(b);
  if (va && vb) {
    e.variance = *va / static_cast<double>(a.size()) + *vb / static_cast<double>(b.size());
  } else {
    e.variance_warning = true;
  }
  return e;
}

}  // namespace

std::string to_string(Contrast c) {
  switch (c) {
    case Contrast::Direct: return "direct";
    case Contrast::Indirect: return "indirect";
    case Contrast::Total: return "total";
    case Contrast::Overall: return "overall";
  }
  return "?";
}

std::string to_string(SignConvention c) {
  return c == SignConvention::Reduction ? "control-minus-treated" : "treated-minus-control";
}

std::string EffectEstimate::label() const {
  if (contrast == Contrast::Direct) return "direct@" + psi;
  return to_string(contrast) + "(" + phi + "," + psi + ")";
}

EffectEstimate EffectEstimate::scaled(double factor) const {
  EffectEstimate e = *this;
  e.point *= factor;
  if (e.variance) *e.variance *= factor * factor;
  if (e.ci) {
    auto [lo, hi] = *e.ci;
    lo *= factor;
    hi *= factor;
    if (lo > hi) std::swap(lo, hi);
    e.ci = std::pair{lo, hi};
  }
  return e;
}

EffectEstimate EffectEstimate::negated() const {
  EffectEstimate e = scaled(-1.0);
  e.convention = convention == SignConvention::Reduction ? SignConvention::TreatedMinusControl
                                                          : SignConvention::Reduction;
  return e;
}

GroupRates group_rates(const GroupSummary& g) {
  GroupRates r;
  r.group_id = g.group_id;
  r.assignment = g.assignment;
  r.rate_treated = g.n_treated > 0 ? static_cast<double>(g.cases_treated) / static_cast<double>(g.n_treated) : kNaN;
  r.rate_control = g.n_control > 0 ? static_cast<double>(g.cases_control) / static_cast<double>(g.n_control) : kNaN;
  r.rate_overall = static_cast<double>(g.cases_treated + g.cases_control) / static_cast<double>(g.size());
  r.coverage = static_cast<double>(g.n_treated) / static_cast<double>(g.size());
  return r;
}

std::vector<GroupRates> group_rates(const TrialTable& trial) {
  std::vector<GroupRates> out;
  for (const auto& g : trial.groups()) out.push_back(group_rates(g));
  return out;
}

EffectEstimate direct_effect(const TrialTable& trial, const std::string& label) {
  if (!trial.has_label(label)) throw EstimationError("allocation label '" + label + "' is absent");
  std::vector<double> diffs;
  for (const auto& g : trial.groups()) {
    if (g.assignment != label) continue;
    const auto r = group_rates(g);
    if (std::isnan(r.rate_treated) || std::isnan(r.rate_control)) {
      throw EstimationError("group '" + g.group_id + "' needs both arms for a direct effect");
    }
    diffs.push_back(r.rate_control - r.rate_treated);
  }
  EffectEstimate e;
  e.contrast = Contrast::Direct;
  e.psi = label;
  e.point = mean(diffs);
  return e;
}

EffectEstimate indirect_effect(const TrialTable& trial, const std::string& phi, const std::string& psi) {
  return two_arm_contrast(Contrast::Indirect, trial, phi, Arm::Control, psi, Arm::Control);
}

EffectEstimate total_effect(const TrialTable& trial, const std::string& phi, const std::string& psi) {
  return two_arm_contrast(Contrast::Total, trial, phi, Arm::Control, psi, Arm::Treated);
}

EffectEstimate overall_effect(const TrialTable& trial, const std::string& phi, const std::string& psi) {
  return two_arm_contrast(Contrast::Overall, trial, phi, Arm::Overall, psi, Arm::Overall);
}

EffectEstimate with_wald_interval(EffectEstimate e, double level) {
  if (!e.variance) return e;
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must lie in (0, 1)");
  const boost::math::normal_distribution<double> n01;
  const double z = boost::math::quantile(n01, 0.5 + level / 2.0);
  const double half = z * std::sqrt(*e.variance);
  e.ci = std::pair{e.point - half, e.point + half};
  e.ci_level = level;
  return e;
}

DecompositionReport decomposition_report(const TrialTable& trial, const std::string& phi,
                                         const std::string& psi) {
  const double direct_phi = direct_effect(trial, phi).point;
  const double direct_psi = direct_effect(trial, psi).point;
  const double indirect = indirect_effect(trial, phi, psi).point;
  const double total = total_effect(trial, phi, psi).point;
  const double overall = overall_effect(trial, phi, psi).point;

  const auto coverages = [&](const std::string& label) {
    std::vector<double> c;
    for (const auto& g : trial.groups_with(label)) c.push_back(group_rates(g).coverage);
    return c;
  };
  const auto cphi = coverages(phi);
  const auto cpsi = coverages(psi);
  const auto all_equal = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };

  DecompositionReport r;
  r.mean_coverage_phi = mean(cphi);
  r.mean_coverage_psi = mean(cpsi);
  r.equal_coverage = all_equal(cphi) && all_equal(cpsi);
  r.total_residual = total - (direct_psi + indirect);
  r.overall_residual =
      overall - (indirect + direct_psi * r.mean_coverage_psi - direct_phi * r.mean_coverage_phi);
  return r;
}

std::vector<EffectEstimate> all_effects(const TrialTable& trial, const std::string& phi,
                                        const std::string& psi) {
  return {direct_effect(trial, phi), direct_effect(trial, psi), indirect_effect(trial, phi, psi),
          total_effect(trial, phi, psi), overall_effect(trial, phi, psi)};
}

void write_effects_report(std::ostream& out, const std::vector<EffectEstimate>& effects,
                          const std::string& units, int precision) {
  ReportWriter w(out, {"contrast", "point", "variance", "ci_low", "ci_high", "convention", "units"},
                 precision);
  w.header();
  for (const auto& e : effects) {
    std::optional<double> lo, hi;
    if (e.ci) {
      lo = e.ci->first;
      hi = e.ci->second;
    }
    w.row({e.label(), w.num(e.point), w.num(e.variance), w.num(lo), w.num(hi), to_string(e.convention),
           units});
  }
}

}  // namespace interfere
