#pragma once

// Effects of treatment on the treated under interference, with unmeasured
// confounding encoded by selection-bias functions delta_d (own exposure) and
// delta_s (others' exposure). For fixed deltas the conditional mean
//
//   E[Y|z,g,l,h] = gamma_d(z,g,l,h) + delta_d(z,g,l,h) - sum_z' delta_d(z',g,l,h) f(z'|g,l,h)
//                + gamma_s(g,l,h)   + delta_s(g,l,h)   - sum_z* delta_s(g(z*),l,h) f(z*|l,h)
//                + q(l,h)
//
// is fitted by a two-step procedure: maximum partial likelihood for the
// treatment model f(Z_i|L_i; alpha), then an independence-working-correlation
// estimating equation for (psi_d, psi_s, eta). Reference levels are z0 = 0
// and g0 = 0.

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "interfere/trial_data.hpp"

namespace interfere {

// ---------------------------------------------------------------------------
// Working-model forms

/// One regressor inside a form: a constant, g, or one coordinate of l or h.
struct FormTerm {
  enum class Kind { One, G, L, H };
  Kind kind = Kind::One;
  std::size_t index = 0;  // coordinate for L and H

  std::string name() const;
  double eval(double g, std::span<const double> l, std::span<const double> h) const;
};

/// Linear combination of terms, scaled by a multiplier that makes the form
/// vanish at the reference level: z for gamma_d, g for gamma_s, 1 for q.
struct LinearForm {
  std::vector<FormTerm> terms;

  std::size_t size() const noexcept { return terms.size(); }
};

/// Parses "1,g,l1,h" style lists; "l" and "h" expand to every coordinate.
LinearForm parse_form(const std::string& text, std::size_t covariate_dim);

enum class QLink { Identity, Exp };

/// Per-individual logistic treatment model given own and others' covariates.
struct PropensityForm {
  LinearForm terms;  // evaluated with g = 0; G terms are rejected
};

// ---------------------------------------------------------------------------
// Selection-bias functions

struct DeltaFamily {
  enum class DKind { Zero, Linear, Interaction };  // 0, lambda z, z (l1 + l2 g)
  enum class SKind { Zero, Linear, Interaction };  // 0, lambda g, g (l1 + l2 l[k])

  DKind d_kind = DKind::Zero;
  std::vector<double> lambda_d;
  SKind s_kind = SKind::Zero;
  std::vector<double> lambda_s;
  std::size_t s_covariate = 0;  // l coordinate used by the s interaction family

  static DeltaFamily zero() { return {}; }
  static DeltaFamily linear(double ld, double ls);

  double delta_d(double z, double g, std::span<const double> l, std::span<const double> h) const;
  double delta_s(double g, std::span<const double> l, std::span<const double> h) const;
  bool is_zero() const;

  std::string lambda_d_text() const;
  std::string lambda_s_text() const;
};

/// Checks that the lambda vectors match their kinds.
void validate(const DeltaFamily& delta);

// ---------------------------------------------------------------------------

struct SelectionModel {
  LinearForm gamma_d;  // multiplied by z
  LinearForm gamma_s;  // multiplied by g
  LinearForm q;
  QLink q_link = QLink::Identity;
  PropensityForm propensity;
  DeltaFamily delta;
  ExposureSummary g_summary = ExposureSummary::CountOfOthers;
  ExposureSummary h_summary = ExposureSummary::MeanOfOthers;

  /// gamma_d = z (psi0 + psi1 g); gamma_s = psi g; q = eta . (1, l, h);
  /// propensity on (1, l, h).
  static SelectionModel defaults(std::size_t covariate_dim);
};

struct ModelParameters {
  Eigen::VectorXd psi_d;
  Eigen::VectorXd psi_s;
  Eigen::VectorXd eta;

  Eigen::VectorXd stacked() const;
  static ModelParameters unstack(const SelectionModel& model, const Eigen::VectorXd& theta);
};

/// One individual's regressors plus the treatment probabilities needed by the
/// two centering sums.
struct UnitContext {
  double z = 0.0;
  double g = 0.0;
  std::vector<double> l;
  std::vector<double> h;
  double pi_self = 0.0;             // f(Z=1 | g, l, h)
  std::vector<double> pi_others;    // independent treatment probabilities of the others
};

enum class CenteringMethod { Auto, Enumerate, Collapse };

/// Largest cluster (self plus others) for which the others' treatment
/// vectors are enumerated.
inline constexpr std::size_t kMaxEnumeratedCluster = 20;

/// E over the others' treatment vectors of delta_s(g(z*), l, h).
/// Enumerate walks {0,1}^(n-1); Collapse uses the exact distribution of the
/// treated count, valid for count and mean summaries. Auto collapses when
/// possible. Throws CapacityError for enumeration beyond the cap.
double delta_s_centering(const SelectionModel& model, const UnitContext& unit,
                         CenteringMethod method = CenteringMethod::Auto);

/// Offset carrying every delta-dependent term of the conditional mean.
double selection_offset(const SelectionModel& model, const UnitContext& unit,
                        CenteringMethod method = CenteringMethod::Auto);

double gamma_d_value(const SelectionModel& model, const ModelParameters& p, const UnitContext& u);
double gamma_s_value(const SelectionModel& model, const ModelParameters& p, const UnitContext& u);
double q_value(const SelectionModel& model, const ModelParameters& p, const UnitContext& u);

double reparameterized_mean(const SelectionModel& model, const ModelParameters& params,
                            const UnitContext& unit, CenteringMethod method = CenteringMethod::Auto);

// ---------------------------------------------------------------------------
// Fitting

struct PropensityFit {
  Eigen::VectorXd alpha;
  int iterations = 0;
  double gradient_norm = 0.0;
  double log_likelihood = 0.0;
};

struct FitOptions {
  int max_iterations = 100;
  double propensity_tolerance = 1e-10;  // score norm divided by the number of units
  double gee_tolerance = 1e-10;        // step norm
  bool force_newton = false;           // iterate even when the mean is linear
};

/// Maximizes the partial log-likelihood of the treatment model by Newton-Raphson.
/// Throws FitError on rank deficiency (naming columns) or separation.
PropensityFit fit_propensity(std::span<const ClusterData> clusters, const SelectionModel& model,
                             const FitOptions& options = {});

/// Observed against expected treated counts per cluster.
struct PropensityCheck {
  std::vector<double> observed;
  std::vector<double> expected;
  double pearson = 0.0;  // sum (O - E)^2 / Var, Var from the independent model
};
PropensityCheck propensity_goodness_of_fit(std::span<const ClusterData> clusters, const SelectionModel& model,
                                           const Eigen::VectorXd& alpha);

struct FitResult {
  ModelParameters params;
  Eigen::VectorXd alpha;
  int iterations = 0;
  double residual_norm = 0.0;  // norm of the estimating function at the solution
  bool converged = false;
  bool sandwich_free = true;   // standard errors, when present, come from the cluster bootstrap
  std::optional<Eigen::VectorXd> standard_errors;
  int bootstrap_failures = 0;
};

/// Per-individual contexts for the whole data set under `alpha`.
std::vector<UnitContext> build_units(std::span<const ClusterData> clusters, const SelectionModel& model,
                                     const Eigen::VectorXd& alpha);

/// Solves the estimating equation for fixed delta and fitted alpha.
/// Linear mean: one least-squares solve with the delta terms as offset.
/// Exp-link q: damped Gauss-Newton, converged at step norm < gee_tolerance.
FitResult fit_gee(std::span<const ClusterData> clusters, const SelectionModel& model,
                  const PropensityFit& propensity, const FitOptions& options = {});

struct BootstrapOptions {
  int replicates = 0;  // 0 disables
  std::uint64_t seed = 1;
};

/// Nonparametric cluster bootstrap of the two-step estimator.
Eigen::VectorXd bootstrap_standard_errors(std::span<const ClusterData> clusters, const SelectionModel& model,
                                          const BootstrapOptions& bootstrap, const FitOptions& options,
                                          int* failures = nullptr);

struct SensitivityRow {
  DeltaFamily delta;
  std::optional<FitResult> fit;
  std::string error;
};

/// Repeats the fit for each delta pair in `gamma_set`, reusing one
/// propensity fit. Throws ValidationError unless the zero pair is present;
/// per-row fit failures are recorded and the sweep continues.
std::vector<SensitivityRow> sensitivity_sweep(std::span<const ClusterData> clusters,
                                              const SelectionModel& model_template,
                                              const std::vector<DeltaFamily>& gamma_set,
                                              const BootstrapOptions& bootstrap = {},
                                              const FitOptions& options = {});

std::vector<std::string> parameter_names(const SelectionModel& model);

/// TSV with columns lambda_d, lambda_s, psi_d..., psi_s..., eta..., se..., converged.
void write_gee_report(std::ostream& out, const SelectionModel& model, const std::vector<SensitivityRow>& rows,
                      int precision = 6);

}  // namespace interfere
