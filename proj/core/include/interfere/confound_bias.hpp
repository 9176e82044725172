#pragma once

// Bias of an observed exposure contrast E[Y|z,g,l,h] - E[Y|z',g',l,h]
// relative to the causal contrast, when an individual confounder U and a
// summary V of the other members' confounders are unmeasured. All
// quantities are conditional on one covariate stratum (l, h).

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace interfere {

/// An exposure level: own treatment z and summary g of the others' treatments.
struct ExposurePair {
  double z = 0.0;
  double g = 0.0;

  friend bool operator==(const ExposurePair&, const ExposurePair&) = default;
};

struct ConfounderPoint {
  double u = 0.0;
  double v = 0.0;
};

/// Finite-support specification for the general bias formula.
struct BiasSpecGeneral {
  std::vector<ConfounderPoint> support;
  /// E(Y | z, g, l, h, u, v) within the stratum, up to an additive constant
  /// per exposure pair. Only differences against the reference enter.
  std::function<double(const ExposurePair&, const ConfounderPoint&)> outcome_mean;
  /// P(u, v | z, g, l, h) over `support`.
  std::function<std::vector<double>(const ExposurePair&)> dist_at;
  /// P(u, v | l, h) over `support`.
  std::vector<double> dist_marg;
  /// Index into `support` of the reference point (u*, v*).
  std::size_t reference = 0;

  /// E(Y|z,g,...,u,v) - E(Y|z,g,...,u*,v*); zero at the reference by construction.
  double shift(const ExposurePair& zg, std::size_t k) const;
};

/// Additive-effect specification: B = lambda * dU + tau * dV.
struct BiasSpecSimple {
  double lambda = 0.0;  // outcome shift per unit of U
  double tau = 0.0;     // outcome shift per unit of V
  double du = 0.0;      // E[U|z,g,l,h] - E[U|z',g',l,h]
  double dv = 0.0;      // E[V|z,g,l,h] - E[V|z',g',l,h]
};

/// Checks support size, normalization (1e-12) and reference index. Throws ValidationError.
void validate(const BiasSpecGeneral& spec, const ExposurePair& zg, const ExposurePair& zg_prime);

/// Two-term sum over the support comparing (z,g) with (z',g').
double bias_general(const BiasSpecGeneral& spec, const ExposurePair& zg, const ExposurePair& zg_prime);

double bias_simple(const BiasSpecSimple& spec);

/// True when the shift function differs between the two exposure pairs at
/// some support point (beyond `tol`). Such specifications cannot reproduce a
/// zero causal effect exactly, so callers should warn.
bool shift_differs_across_pairs(const BiasSpecGeneral& spec, const ExposurePair& zg,
                                const ExposurePair& zg_prime, double tol = 1e-12);

/// Mean differences (dU, dV) between the two exposure pairs implied by a general spec;
/// useful to express a general spec as its simple counterpart.
std::pair<double, double> confounder_mean_differences(const BiasSpecGeneral& spec, const ExposurePair& zg,
                                                      const ExposurePair& zg_prime);

struct CorrectedEstimate {
  double observed = 0.0;
  double bias = 0.0;
  double corrected = 0.0;
  std::optional<std::pair<double, double>> ci_observed;
  std::optional<std::pair<double, double>> ci_corrected;
};

/// corrected = observed - bias. The interval is shifted only for the simple
/// formula (`simple` = true); asking to shift an interval under a general
/// spec throws ValidationError, because B then depends on unknown stratum
/// distributions.
CorrectedEstimate correct(double observed, std::optional<std::pair<double, double>> ci, double bias,
                          bool simple = true);

struct BiasGrid {
  std::vector<double> lambda{0.0};
  std::vector<double> tau{0.0};
  std::vector<double> du{0.0};
  std::vector<double> dv{0.0};
};

struct BiasSweepRow {
  BiasSpecSimple spec;
  CorrectedEstimate estimate;
};

/// Cartesian product in (lambda, tau, du, dv) order, lambda outermost.
std::vector<BiasSweepRow> sweep_bias(const BiasGrid& grid, double observed,
                                     std::optional<std::pair<double, double>> ci);

/// TSV with columns lambda, tau, du, dv, bias, corrected, ci_low, ci_high.
void write_bias_report(std::ostream& out, const std::vector<BiasSweepRow>& rows, int precision = 6);

/// Tabulated general spec, as read from a spec file: one row per support
/// point with the outcome mean at both exposure pairs and the three
/// distributions.
struct GeneralSpecTable {
  ExposurePair zg;
  ExposurePair zg_prime;
  std::vector<ConfounderPoint> support;
  std::vector<double> mean_at;        // E(Y|z,g,u,v)
  std::vector<double> mean_at_prime;  // E(Y|z',g',u,v)
  std::vector<double> p_at;
  std::vector<double> p_at_prime;
  std::vector<double> p_marg;
  std::size_t reference = 0;

  BiasSpecGeneral to_spec() const;
};

/// Delimited table with a '# zg = z,g' and '# zg_prime = z,g' preamble and
/// columns u, v, mean_at, mean_at_prime, p_at, p_at_prime, p_marg[, reference].
GeneralSpecTable parse_general_spec(std::istream& in, char delimiter = ',');

}  // namespace interfere
