#pragma once

// Infectiousness effects in households of two: the crude contrast among
// infected index cases, and the principal-stratum contrast within the doomed
// stratum under monotonicity (vaccination never causes an index infection).
//
// Under monotonicity p_v equals the observed p1, so every adjustment below
// only changes p_u, the untreated transmission probability in the doomed
// stratum. Three parameterizations pin p_u down:
//   theta  additive shift:            p_u = p0 + theta
//   gamma  protected-stratum risk:    p0 = gamma * pi_P + p_u * pi_D
//   beta   doomed-vs-protected log OR: odds(p_u) = exp(beta) * odds(gamma)
// pi_D = attack1 / attack0 is the doomed share of infected controls and
// pi_P = 1 - pi_D the protected share.

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "interfere/trial_data.hpp"

namespace interfere {

/// Principal-stratum contrast expressed on the four effect scales.
struct InfectEffect {
  double p_v = 0.0;
  double p_u = 0.0;

  double risk_difference() const { return p_v - p_u; }
  /// Empty when p_u == 0.
  std::optional<double> risk_ratio() const;
  /// Empty when p_u == 0 or p_v == 1.
  std::optional<double> odds_ratio() const;
  /// 1 - p_v / p_u; empty when p_u == 0.
  std::optional<double> efficacy() const;
};

enum class SensitivityKind { Theta, Gamma, Beta };

std::string to_string(SensitivityKind kind);
SensitivityKind parse_sensitivity_kind(const std::string& name);

struct SensitivitySpec {
  SensitivityKind kind = SensitivityKind::Theta;
  std::vector<double> grid;
};

/// p_v = p1, p_u = p0.
InfectEffect crude_effect(const InfectStudy& study);

/// Wald interval for p1 - p0 from the index-case counts. Empty when the
/// study carries no counts.
std::optional<std::pair<double, double>> crude_rd_interval(const InfectStudy& study, double level = 0.95);

/// Closed interval of theta keeping p0 + theta inside [0, 1].
std::pair<double, double> theta_range(const InfectStudy& study);
/// Admissible gamma interval; collapses to [p0, p0] when pi_P == 0.
std::pair<double, double> gamma_range(const InfectStudy& study);

/// Throws RangeError when p0 + theta leaves [0, 1].
InfectEffect theta_adjust(const InfectStudy& study, double theta);
/// The crude interval shifted by -theta.
std::optional<std::pair<double, double>> theta_adjusted_interval(const InfectStudy& study, double theta,
                                                                 double level = 0.95);

/// Throws RangeError when gamma is outside gamma_range(study). When
/// pi_P == 0 gamma is ignored and p_u = p0.
InfectEffect gamma_adjust(const InfectStudy& study, double gamma);

/// p_u as the root in [0, 1] of
///   (B-1)(1-V) p^2 - [p0 (B-1) + (1-V) B + V] p + p0 B = 0,   B = exp(beta), V = pi_P,
/// obtained by eliminating gamma between odds(p_u) = B odds(gamma) and
/// p0 = gamma V + p_u (1-V).
InfectEffect beta_adjust(const InfectStudy& study, double beta);

/// Solver details for beta_adjust, including the back-substitution residual
/// through both defining identities.
struct BetaSolution {
  double p_u = 0.0;
  double gamma = 0.0;
  double residual = 0.0;  // max |identity error|
  std::vector<double> roots;
  bool roots_in_unit_interval_both = false;
};
BetaSolution solve_beta(double p0, double protected_fraction, double beta);

struct BoundEnd {
  double gamma = 0.0;
  InfectEffect effect;
};

/// Effects at the two gamma endpoints. `at_gamma_min` carries the largest p_u
/// (smallest risk difference), `at_gamma_max` the smallest p_u.
struct MonotonicityBounds {
  BoundEnd at_gamma_min;
  BoundEnd at_gamma_max;

  std::pair<double, double> p_u() const;
  std::pair<double, double> risk_difference() const;
  std::optional<std::pair<double, double>> risk_ratio() const;
  std::optional<std::pair<double, double>> odds_ratio() const;
  std::optional<std::pair<double, double>> efficacy() const;
};

MonotonicityBounds monotonicity_bounds(const InfectStudy& study);

// Converters between parameterizations, each through the implied p_u.
double theta_from_p_u(const InfectStudy& study, double p_u);
/// Requires pi_P > 0.
double gamma_from_p_u(const InfectStudy& study, double p_u);
/// Requires pi_P > 0 and the implied gamma, p_u strictly inside (0, 1).
double beta_from_p_u(const InfectStudy& study, double p_u);

struct SweepRow {
  SensitivityKind kind = SensitivityKind::Theta;
  double param = 0.0;
  bool in_range = false;
  InfectEffect effect;  // meaningful only when in_range
  std::optional<std::pair<double, double>> rd_interval;  // theta only
};

/// Evaluates the adjuster at every grid value, in grid order. Out-of-range
/// values produce rows with in_range = false instead of an exception.
std::vector<SweepRow> sweep(const InfectStudy& study, const SensitivitySpec& spec);

/// TSV with columns kind, param, p_v, p_u, rd, rr, or_, efficacy, in_range.
void write_sweep_report(std::ostream& out, const std::vector<SweepRow>& rows, int precision = 6);

}  // namespace interfere
