#include "interfere/selection_gee.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "interfere/errors.hpp"
#include "interfere/rng.hpp"
#include "interfere/tsv.hpp"

namespace interfere {

namespace {

double expit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double form_sum(const LinearForm& form, const Eigen::VectorXd& coef, double g, std::span<const double> l,
                std::span<const double> h) {
  double acc = 0.0;
  for (std::size_t k = 0; k < form.terms.size(); ++k) {
    acc += coef[static_cast<Eigen::Index>(k)] * form.terms[k].eval(g, l, h);
  }
  return acc;
}

std::string join_numbers(const std::vector<double>& v, int precision) {
  if (v.empty()) return "0";
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    out += format_number(v[i], precision);
  }
  return out;
}

double scalar_g(ExposureSummary kind, std::size_t treated_others, std::size_t n_others) {
  switch (kind) {
    case ExposureSummary::CountOfOthers: return static_cast<double>(treated_others);
    case ExposureSummary::MeanOfOthers:
      return n_others ? static_cast<double>(treated_others) / static_cast<double>(n_others) : 0.0;
    case ExposureSummary::IdentityVector: break;
  }
  throw ValidationError("the selection model needs a scalar summary g (count or mean of others)");
}

/// Exact law of the number of successes among independent Bernoulli trials.
std::vector<double> count_distribution(std::span<const double> probs) {
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

Eigen::RowVectorXd propensity_row(const SelectionModel& model, std::span<const double> l,
                                  std::span<const double> h) {
  const auto& terms = model.propensity.terms.terms;
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(terms.size()));
  for (std::size_t k = 0; k < terms.size(); ++k) row[static_cast<Eigen::Index>(k)] = terms[k].eval(0.0, l, h);
  return row;
}

struct PropensityDesign {
  Eigen::MatrixXd x;
  Eigen::VectorXd z;
};

PropensityDesign propensity_design(std::span<const ClusterData> clusters, const SelectionModel& model) {
  for (const auto& t : model.propensity.terms.terms) {
    if (t.kind == FormTerm::Kind::G) throw ValidationError("the treatment model cannot depend on g");
  }
  std::size_t n = 0;
  for (const auto& c : clusters) n += c.size();
  const auto p = static_cast<Eigen::Index>(model.propensity.terms.size());
  PropensityDesign d{Eigen::MatrixXd(static_cast<Eigen::Index>(n), p), Eigen::VectorXd(static_cast<Eigen::Index>(n))};
  Eigen::Index row = 0;
  for (const auto& c : clusters) {
    std::vector<std::vector<double>> ls;
    for (const auto& m : c.members) ls.push_back(m.l);
    for (std::size_t j = 0; j < c.size(); ++j) {
      const auto h = summarize_others(model.h_summary, ls, j);
      d.x.row(row) = propensity_row(model, c.members[j].l, h);
      d.z[row] = c.members[j].z;
      ++row;
    }
  }
  return d;
}

/// Throws FitError naming the columns that are linear combinations of others.
void require_full_rank(const Eigen::MatrixXd& x, const std::vector<std::string>& names, const char* what) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() == x.cols()) return;
  std::string cols;
  const auto perm = qr.colsPermutation().indices();
  for (Eigen::Index k = qr.rank(); k < x.cols(); ++k) {
    if (!cols.empty()) cols += ", ";
    const auto idx = static_cast<std::size_t>(perm[k]);
    cols += idx < names.size() ? names[idx] : std::to_string(idx);
  }
  throw FitError(std::string(what) + " design is rank deficient; dependent columns: " + cols);
}

struct GeeDesign {
  Eigen::MatrixXd linear;    // z*gamma_d terms, g*gamma_s terms, and q terms for the identity link
  Eigen::MatrixXd q_exp;     // q terms when q uses the exp link
  Eigen::VectorXd response;  // y - offset
};

GeeDesign gee_design(std::span<const ClusterData> clusters, const SelectionModel& model,
                     const std::vector<UnitContext>& units) {
  const auto n = static_cast<Eigen::Index>(units.size());
  const auto nd = static_cast<Eigen::Index>(model.gamma_d.size());
  const auto ns = static_cast<Eigen::Index>(model.gamma_s.size());
  const auto nq = static_cast<Eigen::Index>(model.q.size());
  const bool exp_link = model.q_link == QLink::Exp;

  GeeDesign d;
  d.linear.resize(n, nd + ns + (exp_link ? 0 : nq));
  if (exp_link) d.q_exp.resize(n, nq);
  d.response.resize(n);

  Eigen::Index row = 0;
  for (const auto& c : clusters) {
    for (const auto& m : c.members) {
      const auto& u = units[static_cast<std::size_t>(row)];
      for (Eigen::Index k = 0; k < nd; ++k) {
        d.linear(row, k) = u.z * model.gamma_d.terms[static_cast<std::size_t>(k)].eval(u.g, u.l, u.h);
      }
      for (Eigen::Index k = 0; k < ns; ++k) {
        d.linear(row, nd + k) = u.g * model.gamma_s.terms[static_cast<std::size_t>(k)].eval(u.g, u.l, u.h);
      }
      for (Eigen::Index k = 0; k < nq; ++k) {
        const double v = model.q.terms[static_cast<std::size_t>(k)].eval(u.g, u.l, u.h);
        if (exp_link) {
          d.q_exp(row, k) = v;
        } else {
          d.linear(row, nd + ns + k) = v;
        }
      }
      d.response[row] = m.y - selection_offset(model, u);
      ++row;
    }
  }
  return d;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string FormTerm::name() const {
  switch (kind) {
    case Kind::One: return "1";
    case Kind::G: return "g";
    case Kind::L: return "l" + std::to_string(index + 1);
    case Kind::H: return "h" + std::to_string(index + 1);
  }
  return "?";
}

double FormTerm::eval(double g, std::span<const double> l, std::span<const double> h) const {
  switch (kind) {
    case Kind::One: return 1.0;
    case Kind::G: return g;
    case Kind::L: return l[index];
    case Kind::H: return h[index];
  }
  return 0.0;
}

LinearForm parse_form(const std::string& text, std::size_t covariate_dim) {
  LinearForm form;
  for (const auto& tok : split_fields(text, ',')) {
    if (tok.empty() || tok == "none") continue;
    if (tok == "1") {
      form.terms.push_back({FormTerm::Kind::One, 0});
    } else if (tok == "g") {
      form.terms.push_back({FormTerm::Kind::G, 0});
    } else if (tok == "l" || tok == "h") {
      const auto kind = tok == "l" ? FormTerm::Kind::L : FormTerm::Kind::H;
      for (std::size_t k = 0; k < covariate_dim; ++k) form.terms.push_back({kind, k});
    } else if ((tok[0] == 'l' || tok[0] == 'h') && tok.size() > 1) {
      const auto idx = parse_integer(std::string_view(tok).substr(1));
      if (!idx || *idx < 1 || static_cast<std::size_t>(*idx) > covariate_dim) {
        throw ValidationError("form term '" + tok + "' names a covariate outside l_1..l_" +
                              std::to_string(covariate_dim));
      }
      form.terms.push_back({tok[0] == 'l' ? FormTerm::Kind::L : FormTerm::Kind::H,
                            static_cast<std::size_t>(*idx - 1)});
    } else {
      throw ValidationError("unknown form term '" + tok + "'");
    }
  }
  return form;
}

DeltaFamily DeltaFamily::linear(double ld, double ls) {
  DeltaFamily d;
  d.d_kind = DKind::Linear;
  d.lambda_d = {ld};
  d.s_kind = SKind::Linear;
  d.lambda_s = {ls};
  return d;
}

double DeltaFamily::delta_d(double z, double g, std::span<const double>, std::span<const double>) const {
  switch (d_kind) {
    case DKind::Zero: return 0.0;
    case DKind::Linear: return lambda_d[0] * z;
    case DKind::Interaction: return z * (lambda_d[0] + lambda_d[1] * g);
  }
  return 0.0;
}

double DeltaFamily::delta_s(double g, std::span<const double> l, std::span<const double>) const {
  switch (s_kind) {
    case SKind::Zero: return 0.0;
    case SKind::Linear: return lambda_s[0] * g;
    case SKind::Interaction: return g * (lambda_s[0] + lambda_s[1] * l[s_covariate]);
  }
  return 0.0;
}

bool DeltaFamily::is_zero() const {
  const auto all_zero = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
  };
  return (d_kind == DKind::Zero || all_zero(lambda_d)) && (s_kind == SKind::Zero || all_zero(lambda_s));
}

std::string DeltaFamily::lambda_d_text() const {
  return d_kind == DKind::Zero ? "0" : join_numbers(lambda_d, 6);
}

std::string DeltaFamily::lambda_s_text() const {
  return s_kind == SKind::Zero ? "0" : join_numbers(lambda_s, 6);
}

void validate(const DeltaFamily& delta) {
  const auto need = [](std::size_t have, std::size_t want, const char* which) {
    if (have != want) {
      throw ValidationError(std::string(which) + " family needs " + std::to_string(want) + " parameter(s)");
    }
  };
  switch (delta.d_kind) {
    case DeltaFamily::DKind::Zero: break;
    case DeltaFamily::DKind::Linear: need(delta.lambda_d.size(), 1, "delta_d linear"); break;
    case DeltaFamily::DKind::Interaction: need(delta.lambda_d.size(), 2, "delta_d interaction"); break;
  }
  switch (delta.s_kind) {
    case DeltaFamily::SKind::Zero: break;
    case DeltaFamily::SKind::Linear: need(delta.lambda_s.size(), 1, "delta_s linear"); break;
    case DeltaFamily::SKind::Interaction: need(delta.lambda_s.size(), 2, "delta_s interaction"); break;
  }
}

SelectionModel SelectionModel::defaults(std::size_t covariate_dim) {
  SelectionModel m;
  m.gamma_d = parse_form("1,g", covariate_dim);
  m.gamma_s = parse_form("1", covariate_dim);
  m.q = parse_form("1,l,h", covariate_dim);
  m.propensity.terms = parse_form("1,l,h", covariate_dim);
  return m;
}

Eigen::VectorXd ModelParameters::stacked() const {
  Eigen::VectorXd v(psi_d.size() + psi_s.size() + eta.size());
  v << psi_d, psi_s, eta;
  return v;
}

ModelParameters ModelParameters::unstack(const SelectionModel& model, const Eigen::VectorXd& theta) {
  const auto nd = static_cast<Eigen::Index>(model.gamma_d.size());
  const auto ns = static_cast<Eigen::Index>(model.gamma_s.size());
  const auto nq = static_cast<Eigen::Index>(model.q.size());
  if (theta.size() != nd + ns + nq) throw ValidationError("parameter vector has the wrong length");
  return {theta.segment(0, nd), theta.segment(nd, ns), theta.segment(nd + ns, nq)};
}

// ---------------------------------------------------------------------------

double delta_s_centering(const SelectionModel& model, const UnitContext& unit, CenteringMethod method) {
  const auto& delta = model.delta;
  if (delta.s_kind == DeltaFamily::SKind::Zero) return 0.0;
  const std::size_t m = unit.pi_others.size();
  const bool collapsible = model.g_summary == ExposureSummary::CountOfOthers ||
                           model.g_summary == ExposureSummary::MeanOfOthers;

  if (method == CenteringMethod::Collapse || (method == CenteringMethod::Auto && collapsible)) {
    if (!collapsible) throw CapacityError("count collapse needs a count or mean summary for g");
    const auto pmf = count_distribution(unit.pi_others);
    double acc = 0.0;
    for (std::size_t c = 0; c < pmf.size(); ++c) {
      acc += pmf[c] * delta.delta_s(scalar_g(model.g_summary, c, m), unit.l, unit.h);
    }
    return acc;
  }

  if (m + 1 > kMaxEnumeratedCluster) {
    throw CapacityError("cluster of size " + std::to_string(m + 1) + " exceeds the enumeration cap of " +
                        std::to_string(kMaxEnumeratedCluster));
  }
  double acc = 0.0;
  const std::uint64_t combos = std::uint64_t{1} << m;
  for (std::uint64_t mask = 0; mask < combos; ++mask) {
    double prob = 1.0;
    std::size_t treated = 0;
    for (std::size_t k = 0; k < m; ++k) {
      const bool on = (mask >> k) & 1U;
      prob *= on ? unit.pi_others[k] : 1.0 - unit.pi_others[k];
      treated += on;
    }
    acc += prob * delta.delta_s(scalar_g(model.g_summary, treated, m), unit.l, unit.h);
  }
  return acc;
}

double selection_offset(const SelectionModel& model, const UnitContext& u, CenteringMethod method) {
  const auto& d = model.delta;
  const double own = d.delta_d(u.z, u.g, u.l, u.h) -
                     (d.delta_d(1.0, u.g, u.l, u.h) * u.pi_self + d.delta_d(0.0, u.g, u.l, u.h) * (1.0 - u.pi_self));
  const double others = d.delta_s(u.g, u.l, u.h) - delta_s_centering(model, u, method);
  return own + others;
}

double gamma_d_value(const SelectionModel& model, const ModelParameters& p, const UnitContext& u) {
  return u.z * form_sum(model.gamma_d, p.psi_d, u.g, u.l, u.h);
}

double gamma_s_value(const SelectionModel& model, const ModelParameters& p, const UnitContext& u) {
  return u.g * form_sum(model.gamma_s, p.psi_s, u.g, u.l, u.h);
}

double q_value(const SelectionModel& model, const ModelParameters& p, const UnitContext& u) {
  const double lin = form_sum(model.q, p.eta, u.g, u.l, u.h);
  return model.q_link == QLink::Exp ? std::exp(lin) : lin;
}

double reparameterized_mean(const SelectionModel& model, const ModelParameters& params, const UnitContext& unit,
                            CenteringMethod method) {
  return gamma_d_value(model, params, unit) + gamma_s_value(model, params, unit) + q_value(model, params, unit) +
         selection_offset(model, unit, method);
}

// ---------------------------------------------------------------------------

PropensityFit fit_propensity(std::span<const ClusterData> clusters, const SelectionModel& model,
                             const FitOptions& options) {
  const auto d = propensity_design(clusters, model);
  std::vector<std::string> names;
  for (const auto& t : model.propensity.terms.terms) names.push_back(t.name());
  if (d.x.cols() == 0) throw ValidationError("the treatment model has no terms");
  require_full_rank(d.x, names, "treatment model");

  const auto loglik = [&](const Eigen::VectorXd& a) {
    const Eigen::VectorXd eta = d.x * a;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      // log(1 + e^eta) computed without overflow
      const double softplus = eta[i] > 0 ? eta[i] + std::log1p(std::exp(-eta[i])) : std::log1p(std::exp(eta[i]));
      ll += d.z[i] * eta[i] - softplus;
    }
    return ll;
  };

  PropensityFit fit;
  fit.alpha = Eigen::VectorXd::Zero(d.x.cols());
  double ll = loglik(fit.alpha);
  for (int it = 0; it <= options.max_iterations; ++it) {
    const Eigen::VectorXd mu = (d.x * fit.alpha).unaryExpr([](double v) { return expit(v); });
    const Eigen::VectorXd grad = d.x.transpose() * (d.z - mu);
    // per-observation score, so the tolerance does not scale with n
    fit.gradient_norm = grad.norm() / static_cast<double>(d.z.size());
    fit.iterations = it;
    if (fit.gradient_norm < options.propensity_tolerance) {
      fit.log_likelihood = ll;
      return fit;
    }
    const Eigen::VectorXd w = mu.array() * (1.0 - mu.array());
    const Eigen::MatrixXd info = d.x.transpose() * w.asDiagonal() * d.x;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw FitError("treatment model information matrix is singular; check for separation");
    }
    Eigen::VectorXd step = ldlt.solve(grad);
    double scale = 1.0;
    double next_ll = loglik(fit.alpha + step);
    // near the optimum ll changes less than its summation error; accept those steps
    const double noise = 1e-12 * (1.0 + std::abs(ll));
    for (int halvings = 0; next_ll < ll - noise && halvings < 40; ++halvings) {
      scale *= 0.5;
      next_ll = loglik(fit.alpha + scale * step);
    }
    fit.alpha += scale * step;
    ll = next_ll;
    if (fit.alpha.cwiseAbs().maxCoeff() > 30.0) {
      throw FitError("treatment model diverges (|alpha| > 30); the data appear separated");
    }
  }
  throw FitError("treatment model did not converge in " + std::to_string(options.max_iterations) +
                 " iterations (gradient norm " + format_number(fit.gradient_norm) + ")");
}

PropensityCheck propensity_goodness_of_fit(std::span<const ClusterData> clusters, const SelectionModel& model,
                                           const Eigen::VectorXd& alpha) {
  PropensityCheck chk;
  const auto units = build_units(clusters, model, alpha);
  std::size_t row = 0;
  for (const auto& c : clusters) {
    double obs = 0.0, expect = 0.0, var = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j, ++row) {
      obs += c.members[j].z;
      const double p = units[row].pi_self;
      expect += p;
      var += p * (1.0 - p);
    }
    chk.observed.push_back(obs);
    chk.expected.push_back(expect);
    if (var > 0) chk.pearson += (obs - expect) * (obs - expect) / var;
  }
  return chk;
}

std::vector<UnitContext> build_units(std::span<const ClusterData> clusters, const SelectionModel& model,
                                     const Eigen::VectorXd& alpha) {
  if (alpha.size() != static_cast<Eigen::Index>(model.propensity.terms.size())) {
    throw ValidationError("treatment model coefficients do not match its terms");
  }
  std::vector<UnitContext> units;
  for (const auto& c : clusters) {
    const std::size_t n = c.size();
    std::vector<std::vector<double>> ls;
    for (const auto& m : c.members) ls.push_back(m.l);
    std::vector<std::vector<double>> hs(n);
    std::vector<double> pis(n);
    std::size_t treated = 0;
    for (std::size_t j = 0; j < n; ++j) {
      hs[j] = summarize_others(model.h_summary, ls, j);
      pis[j] = expit(propensity_row(model, ls[j], hs[j]).dot(alpha));
      treated += static_cast<std::size_t>(c.members[j].z);
    }
    for (std::size_t j = 0; j < n; ++j) {
      UnitContext u;
      u.z = c.members[j].z;
      u.g = scalar_g(model.g_summary, treated - static_cast<std::size_t>(c.members[j].z), n - 1);
      u.l = ls[j];
      u.h = hs[j];
      u.pi_self = pis[j];
      for (std::size_t k = 0; k < n; ++k) {
        if (k != j) u.pi_others.push_back(pis[k]);
      }
      units.push_back(std::move(u));
    }
  }
  return units;
}

FitResult fit_gee(std::span<const ClusterData> clusters, const SelectionModel& model,
                  const PropensityFit& propensity, const FitOptions& options) {
  validate(model.delta);
  validate_clusters(clusters);
  const auto units = build_units(clusters, model, propensity.alpha);
  const auto d = gee_design(clusters, model, units);
  const auto names = parameter_names(model);

  FitResult result;
  result.alpha = propensity.alpha;
  const bool exp_link = model.q_link == QLink::Exp;
  const Eigen::Index n_lin = d.linear.cols();

  if (!exp_link && !options.force_newton) {
    require_full_rank(d.linear, names, "outcome model");
    const Eigen::VectorXd theta = d.linear.colPivHouseholderQr().solve(d.response);
    const Eigen::VectorXd resid = d.response - d.linear * theta;
    result.params = ModelParameters::unstack(model, theta);
    result.iterations = 1;
    result.residual_norm = (d.linear.transpose() * resid).norm();
    result.converged = true;
    return result;
  }

  // Gauss-Newton on sum_ij dmu/dtheta * (y - mu) = 0.
  const Eigen::Index n_q = exp_link ? d.q_exp.cols() : 0;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(n_lin + n_q);
  if (exp_link) {
    const double m = std::max(d.response.mean(), 1e-3);
    for (Eigen::Index k = 0; k < n_q; ++k) {
      if (model.q.terms[static_cast<std::size_t>(k)].kind == FormTerm::Kind::One) {
        theta[n_lin + k] = std::log(m);
        break;
      }
    }
  }
  const auto evaluate = [&](const Eigen::VectorXd& t, Eigen::MatrixXd* jac) {
    Eigen::VectorXd mu = d.linear * t.head(n_lin);
    if (jac) {
      jac->resize(d.response.size(), n_lin + n_q);
      jac->leftCols(n_lin) = d.linear;
    }
    if (exp_link) {
      const Eigen::VectorXd e = (d.q_exp * t.tail(n_q)).array().exp();
      mu += e;
      if (jac) jac->rightCols(n_q) = e.asDiagonal() * d.q_exp;
    }
    return Eigen::VectorXd(d.response - mu);
  };

  Eigen::MatrixXd jac;
  Eigen::VectorXd resid = evaluate(theta, &jac);
  double sse = resid.squaredNorm();
  std::vector<double> trajectory{sse};
  for (int it = 1; it <= options.max_iterations; ++it) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(jac);
    qr.setThreshold(1e-10);
    if (qr.rank() < jac.cols()) require_full_rank(jac, names, "outcome model");
    const Eigen::VectorXd step = qr.solve(resid);
    double scale = 1.0;
    Eigen::VectorXd cand = theta + step;
    Eigen::VectorXd cand_resid = evaluate(cand, nullptr);
    for (int h = 0; !(cand_resid.squaredNorm() <= sse) && h < 40; ++h) {
      scale *= 0.5;
      cand = theta + scale * step;
      cand_resid = evaluate(cand, nullptr);
    }
    theta = cand;
    resid = evaluate(theta, &jac);
    sse = resid.squaredNorm();
    trajectory.push_back(sse);
    result.iterations = it;
    if ((scale * step).norm() < options.gee_tolerance) {
      result.params = ModelParameters::unstack(model, theta);
      result.residual_norm = (jac.transpose() * resid).norm();
      result.converged = true;
      return result;
    }
  }
  std::ostringstream diag;
  diag << "estimating equation did not converge in " << options.max_iterations << " iterations; SSE trajectory:";
  const std::size_t show = std::min<std::size_t>(trajectory.size(), 8);
  for (std::size_t k = trajectory.size() - show; k < trajectory.size(); ++k) diag << ' ' << format_number(trajectory[k]);
  throw FitError(diag.str());
}

Eigen::VectorXd bootstrap_standard_errors(std::span<const ClusterData> clusters, const SelectionModel& model,
                                          const BootstrapOptions& bootstrap, const FitOptions& options,
                                          int* failures) {
  const auto p = static_cast<Eigen::Index>(model.gamma_d.size() + model.gamma_s.size() + model.q.size());
  std::vector<Eigen::VectorXd> draws;
  int failed = 0;
  const std::uint64_t n = clusters.size();
  for (int r = 0; r < bootstrap.replicates; ++r) {
    KeyedRng rng(bootstrap.seed, static_cast<std::uint64_t>(r), 0xb0075ULL);
    std::vector<ClusterData> sample;
    sample.reserve(clusters.size());
    for (std::uint64_t k = 0; k < n; ++k) {
      auto c = clusters[rng.below(n)];
      c.cluster_id += "#" + std::to_string(k);
      sample.push_back(std::move(c));
    }
    try {
      const auto prop = fit_propensity(sample, model, options);
      draws.push_back(fit_gee(sample, model, prop, options).params.stacked());
    } catch (const EstimationError&) {
      ++failed;
    }
  }
  if (failures) *failures = failed;
  if (draws.size() < 2) throw FitError("fewer than two bootstrap replicates succeeded");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
  for (const auto& v : draws) mean += v;
  mean /= static_cast<double>(draws.size());
  Eigen::VectorXd ss = Eigen::VectorXd::Zero(p);
  for (const auto& v : draws) ss += (v - mean).cwiseAbs2();
  return (ss / static_cast<double>(draws.size() - 1)).cwiseSqrt();
}

std::vector<SensitivityRow> sensitivity_sweep(std::span<const ClusterData> clusters,
                                              const SelectionModel& model_template,
                                              const std::vector<DeltaFamily>& gamma_set,
                                              const BootstrapOptions& bootstrap, const FitOptions& options) {
  if (std::none_of(gamma_set.begin(), gamma_set.end(), [](const DeltaFamily& d) { return d.is_zero(); })) {
    throw ValidationError("the sensitivity set must contain the zero (ignorability) pair");
  }
  for (const auto& d : gamma_set) validate(d);
  const auto propensity = fit_propensity(clusters, model_template, options);

  std::vector<SensitivityRow> rows;
  rows.reserve(gamma_set.size());
  for (const auto& delta : gamma_set) {
    SensitivityRow row;
    row.delta = delta;
    auto model = model_template;
    model.delta = delta;
    try {
      auto fit = fit_gee(clusters, model, propensity, options);
      if (bootstrap.replicates > 0) {
        fit.standard_errors = bootstrap_standard_errors(clusters, model, bootstrap, options, &fit.bootstrap_failures);
      }
      row.fit = std::move(fit);
    } catch (const EstimationError& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::string> parameter_names(const SelectionModel& model) {
  std::vector<std::string> names;
  for (const auto& t : model.gamma_d.terms) {
    names.push_back(t.kind == FormTerm::Kind::One ? "psi_d[z]" : "psi_d[z*" + t.name() + "]");
  }
  for (const auto& t : model.gamma_s.terms) {
    names.push_back(t.kind == FormTerm::Kind::One ? "psi_s[g]" : "psi_s[g*" + t.name() + "]");
  }
  for (const auto& t : model.q.terms) names.push_back("eta[" + t.name() + "]");
  return names;
}

void write_gee_report(std::ostream& out, const SelectionModel& model, const std::vector<SensitivityRow>& rows,
                      int precision) {
  const auto names = parameter_names(model);
  std::vector<std::string> cols{"lambda_d", "lambda_s"};
  cols.insert(cols.end(), names.begin(), names.end());
  for (const auto& n : names) cols.push_back("se_" + n);
  cols.push_back("converged");
  ReportWriter w(out, cols, precision);
  w.header();
  for (const auto& r : rows) {
    std::vector<std::string> cells{join_numbers(r.delta.d_kind == DeltaFamily::DKind::Zero ? std::vector<double>{}
                                                                                           : r.delta.lambda_d,
                                                precision),
                                   join_numbers(r.delta.s_kind == DeltaFamily::SKind::Zero ? std::vector<double>{}
                                                                                           : r.delta.lambda_s,
                                                precision)};
    if (r.fit) {
      const auto theta = r.fit->params.stacked();
      for (Eigen::Index k = 0; k < theta.size(); ++k) cells.push_back(w.num(theta[k]));
      for (Eigen::Index k = 0; k < theta.size(); ++k) {
        cells.push_back(r.fit->standard_errors ? w.num((*r.fit->standard_errors)[k]) : "NA");
      }
      cells.push_back(r.fit->converged ? "1" : "0");
    } else {
      for (std::size_t k = 0; k < 2 * names.size(); ++k) cells.push_back("NA");
      cells.push_back("0");
    }
    w.row(cells);
  }
}

}  // namespace interfere
