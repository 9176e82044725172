#pragma once

// Population average direct, indirect, total and overall effects estimated
// from group-level summaries of a two-stage randomized trial.
//
// Every estimate uses the reduction convention: control minus treated, so a
// protective intervention yields a positive number ("fewer cases"). Negate
// to get treated-minus-control.

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "interfere/trial_data.hpp"

namespace interfere {

enum class Contrast { Direct, Indirect, Total, Overall };
enum class SignConvention { Reduction, TreatedMinusControl };

std::string to_string(Contrast c);
std::string to_string(SignConvention c);

struct EffectEstimate {
  Contrast contrast = Contrast::Direct;
  std::string phi;  // empty for direct effects
  std::string psi;
  double point = 0.0;
  std::optional<double> variance;
  std::optional<std::pair<double, double>> ci;
  double ci_level = 0.95;
  SignConvention convention = SignConvention::Reduction;
  // Set when a variance was requested but is undefined (a label with one group).
  bool variance_warning = false;

  /// "direct@50", "indirect(30,50)", ...
  std::string label() const;
  /// Copy with point, variance and interval multiplied by `factor` (`factor`^2 for the variance).
  EffectEstimate scaled(double factor) const;
  /// Copy in the treated-minus-control convention.
  EffectEstimate negated() const;
};

/// Empirical group average potential outcomes.
struct GroupRates {
  std::string group_id;
  std::string assignment;
  double rate_treated = 0.0;  // NaN when the treated arm is empty
  double rate_control = 0.0;  // NaN when the control arm is empty
  double rate_overall = 0.0;
  double coverage = 0.0;  // n_treated / (n_treated + n_control)
};

GroupRates group_rates(const GroupSummary& g);
std::vector<GroupRates> group_rates(const TrialTable& trial);

/// Mean over groups labelled `label` of (rate_control - rate_treated). No variance.
EffectEstimate direct_effect(const TrialTable& trial, const std::string& label);

/// Mean control rate under phi minus mean control rate under psi.
EffectEstimate indirect_effect(const TrialTable& trial, const std::string& phi, const std::string& psi);

/// Mean control rate under phi minus mean treated rate under psi.
EffectEstimate total_effect(const TrialTable& trial, const std::string& phi, const std::string& psi);

/// Mean overall rate under phi minus mean overall rate under psi.
EffectEstimate overall_effect(const TrialTable& trial, const std::string& phi, const std::string& psi);

/// Normal-approximation interval point +/- z * sqrt(variance); no-op without a variance.
EffectEstimate with_wald_interval(EffectEstimate e, double level = 0.95);

struct DecompositionReport {
  // total - (direct(psi) + indirect)
  double total_residual = 0.0;
  // overall - (indirect + direct(psi) * coverage(psi) - direct(phi) * coverage(phi))
  double overall_residual = 0.0;
  double mean_coverage_phi = 0.0;
  double mean_coverage_psi = 0.0;
  // True when every group under each label has the same coverage, which
  // makes overall_residual vanish algebraically.
  bool equal_coverage = false;
};

DecompositionReport decomposition_report(const TrialTable& trial, const std::string& phi,
                                         const std::string& psi);

/// Direct under both labels plus indirect, total and overall in one pass.
std::vector<EffectEstimate> all_effects(const TrialTable& trial, const std::string& phi,
                                        const std::string& psi);

/// TSV with columns contrast, point, variance, ci_low, ci_high, convention, units.
void write_effects_report(std::ostream& out, const std::vector<EffectEstimate>& effects,
                          const std::string& units, int precision = 6);

}  // namespace interfere
