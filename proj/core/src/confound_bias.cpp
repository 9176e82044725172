#include "interfere/confound_bias.hpp"

#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "interfere/errors.hpp"
#include "interfere/tsv.hpp"

namespace interfere {

namespace {

void check_distribution(const std::vector<double>& p, std::size_t n, const char* what) {
  if (p.size() != n) {
    throw ValidationError(std::string(what) + " has " + std::to_string(p.size()) +
                          " entries, support has " + std::to_string(n));
  }
  double total = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) throw ValidationError(std::string(what) + " has a negative or missing probability");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ValidationError(std::string(what) + " is not normalized (sums to " + format_number(total, 15) + ")");
  }
}

double stratum_term(const BiasSpecGeneral& spec, const ExposurePair& zg) {
  const auto p = spec.dist_at(zg);
  double acc = 0.0;
  for (std::size_t k = 0; k < spec.support.size(); ++k) {
    acc += spec.shift(zg, k) * (p[k] - spec.dist_marg[k]);
  }
  return acc;
}

}  // namespace

double BiasSpecGeneral::shift(const ExposurePair& zg, std::size_t k) const {
  return outcome_mean(zg, support[k]) - outcome_mean(zg, support[reference]);
}

void validate(const BiasSpecGeneral& spec, const ExposurePair& zg, const ExposurePair& zg_prime) {
  if (spec.support.empty()) throw ValidationError("confounder support is empty");
  if (spec.reference >= spec.support.size()) throw ValidationError("reference index outside the support");
  if (!spec.outcome_mean || !spec.dist_at) throw ValidationError("general bias spec is incomplete");
  const auto n = spec.support.size();
  check_distribution(spec.dist_marg, n, "P(u,v|l,h)");
  check_distribution(spec.dist_at(zg), n, "P(u,v|z,g,l,h)");
  check_distribution(spec.dist_at(zg_prime), n, "P(u,v|z',g',l,h)");
}

double bias_general(const BiasSpecGeneral& spec, const ExposurePair& zg, const ExposurePair& zg_prime) {
  validate(spec, zg, zg_prime);
  return stratum_term(spec, zg) - stratum_term(spec, zg_prime);
}

double bias_simple(const BiasSpecSimple& spec) {
  for (double v : {spec.lambda, spec.tau, spec.du, spec.dv}) {
    if (!std::isfinite(v)) throw ValidationError("bias parameters must be finite");
  }
  return spec.lambda * spec.du + spec.tau * spec.dv;
}

bool shift_differs_across_pairs(const BiasSpecGeneral& spec, const ExposurePair& zg,
                                const ExposurePair& zg_prime, double tol) {
  for (std::size_t k = 0; k < spec.support.size(); ++k) {
    if (std::abs(spec.shift(zg, k) - spec.shift(zg_prime, k)) > tol) return true;
  }
  return false;
}

std::pair<double, double> confounder_mean_differences(const BiasSpecGeneral& spec, const ExposurePair& zg,
                                                      const ExposurePair& zg_prime) {
  validate(spec, zg, zg_prime);
  const auto p = spec.dist_at(zg);
  const auto q = spec.dist_at(zg_prime);
  double du = 0.0, dv = 0.0;
  for (std::size_t k = 0; k < spec.support.size(); ++k) {
    du += spec.support[k].u * (p[k] - q[k]);
    dv += spec.support[k].v * (p[k] - q[k]);
  }
  return {du, dv};
}

CorrectedEstimate correct(double observed, std::optional<std::pair<double, double>> ci, double bias,
                          bool simple) {
  if (ci && !simple) {
    throw ValidationError(
        "cannot shift a confidence interval under a general bias specification; "
        "the bias depends on unknown stratum distributions");
  }
  CorrectedEstimate c;
  c.observed = observed;
  c.bias = bias;
  c.corrected = observed - bias;
  c.ci_observed = ci;
  if (ci) c.ci_corrected = std::pair{ci->first - bias, ci->second - bias};
  return c;
}

std::vector<BiasSweepRow> sweep_bias(const BiasGrid& grid, double observed,
                                     std::optional<std::pair<double, double>> ci) {
  for (const auto* axis : {&grid.lambda, &grid.tau, &grid.du, &grid.dv}) {
    if (axis->empty()) throw ValidationError("bias grid axes must be nonempty");
  }
  std::vector<BiasSweepRow> rows;
  for (double lambda : grid.lambda) {
    for (double tau : grid.tau) {
      for (double du : grid.du) {
        for (double dv : grid.dv) {
          BiasSpecSimple s{lambda, tau, du, dv};
          rows.push_back({s, correct(observed, ci, bias_simple(s), true)});
        }
      }
    }
  }
  return rows;
}

void write_bias_report(std::ostream& out, const std::vector<BiasSweepRow>& rows, int precision) {
  ReportWriter w(out, {"lambda", "tau", "du", "dv", "bias", "corrected", "ci_low", "ci_high"}, precision);
  w.header();
  for (const auto& r : rows) {
    std::optional<double> lo, hi;
    if (r.estimate.ci_corrected) {
      lo = r.estimate.ci_corrected->first;
      hi = r.estimate.ci_corrected->second;
    }
    w.row({w.num(r.spec.lambda), w.num(r.spec.tau), w.num(r.spec.du), w.num(r.spec.dv), w.num(r.estimate.bias),
           w.num(r.estimate.corrected), w.num(lo), w.num(hi)});
  }
}

BiasSpecGeneral GeneralSpecTable::to_spec() const {
  BiasSpecGeneral s;
  s.support = support;
  s.reference = reference;
  s.dist_marg = p_marg;
  // Captured by value so the spec outlives the table.
  s.outcome_mean = [zg = zg, mean_at = mean_at, mean_at_prime = mean_at_prime, support = support](
                       const ExposurePair& e, const ConfounderPoint& pt) {
    std::size_t k = 0;
    while (k < support.size() && !(support[k].u == pt.u && support[k].v == pt.v)) ++k;
    if (k == support.size()) throw ValidationError("confounder point outside the support");
    return e == zg ? mean_at[k] : mean_at_prime[k];
  };
  s.dist_at = [zg = zg, zg_prime = zg_prime, p_at = p_at, p_at_prime = p_at_prime](const ExposurePair& e) {
    if (e == zg) return p_at;
    if (e == zg_prime) return p_at_prime;
    throw ValidationError("exposure pair not tabulated in the spec");
  };
  return s;
}

GeneralSpecTable parse_general_spec(std::istream& in, char delimiter) {
  GeneralSpecTable t;
  bool have_zg = false, have_zgp = false;
  std::vector<std::string> header;
  std::string line;
  std::size_t line_no = 0;

  const auto parse_pair = [&](const std::string& text) {
    const auto f = split_fields(text, ',');
    if (f.size() != 2) throw ParseError(line_no, "exposure pair must be 'z,g'");
    const auto z = parse_double(f[0]);
    const auto g = parse_double(f[1]);
    if (!z || !g) throw ParseError(line_no, "exposure pair must be numeric");
    return ExposurePair{*z, *g};
  };

  std::vector<double> refs;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto key = line.substr(first + 1, eq - first - 1);
      key.erase(0, key.find_first_not_of(' '));
      key.erase(key.find_last_not_of(' ') + 1);
      const auto value = line.substr(eq + 1);
      if (key == "zg") {
        t.zg = parse_pair(value);
        have_zg = true;
      } else if (key == "zg_prime") {
        t.zg_prime = parse_pair(value);
        have_zgp = true;
      }
      continue;
    }
    auto f = split_fields(line, delimiter);
    if (header.empty()) {
      header = f;
      continue;
    }
    if (f.size() != header.size()) throw ParseError(line_no, "field count differs from header");
    const auto col = [&](const char* name) -> std::optional<double> {
      for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) {
          const auto v = parse_double(f[i]);
          if (!v) throw ParseError(line_no, std::string("column ") + name + " is not numeric");
          return v;
        }
      }
      return std::nullopt;
    };
    const auto need = [&](const char* name) {
      const auto v = col(name);
      if (!v) throw ParseError(line_no, std::string("missing column ") + name);
      return *v;
    };
    t.support.push_back({need("u"), need("v")});
    t.mean_at.push_back(need("mean_at"));
    t.mean_at_prime.push_back(need("mean_at_prime"));
    t.p_at.push_back(need("p_at"));
    t.p_at_prime.push_back(need("p_at_prime"));
    t.p_marg.push_back(need("p_marg"));
    refs.push_back(col("reference").value_or(0.0));
  }
  if (!have_zg || !have_zgp) throw ValidationError("general spec needs '# zg = z,g' and '# zg_prime = z,g' lines");
  if (t.support.empty()) throw ValidationError("general spec has no support points");
  if (t.zg == t.zg_prime) throw ValidationError("the two exposure pairs must differ");
  for (std::size_t k = 0; k < refs.size(); ++k) {
    if (refs[k] != 0.0) t.reference = k;
  }
  return t;
}

}  // namespace interfere
