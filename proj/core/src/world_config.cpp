#include "interfere/world_config.hpp"

#include <cctype>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <map>
#include <set>

#include "interfere/errors.hpp"
#include "interfere/tsv.hpp"

namespace interfere {

namespace {

namespace pt = boost::property_tree;

/// Typed reader over one section that remembers which keys were used.
class SectionReader {
 public:
  SectionReader(const ConfigFile& cfg, const std::string& name) : name_(name), section_(cfg.section(name)) {
    if (!section_) throw ValidationError("configuration has no [" + name + "] section");
  }

  const std::string* raw(const std::string& key) {
    used_.insert(key);
    return section_->find(key);
  }

  double number(const std::string& key, double fallback) {
    const auto* v = raw(key);
    if (!v) return fallback;
    const auto d = parse_double(*v);
    if (!d) throw ValidationError("[" + name_ + "] " + key + " = '" + *v + "' is not a number");
    return *d;
  }

  long long integer(const std::string& key, long long fallback) {
    const auto* v = raw(key);
    if (!v) return fallback;
    const auto d = parse_integer(*v);
    if (!d) throw ValidationError("[" + name_ + "] " + key + " = '" + *v + "' is not an integer");
    return *d;
  }

  std::string text(const std::string& key, const std::string& fallback) {
    const auto* v = raw(key);
    return v ? *v : fallback;
  }

  /// Every key present must have been read.
  void finish() const {
    for (const auto& [k, v] : section_->entries) {
      if (!used_.count(k)) throw ValidationError("unknown key '" + k + "' in [" + name_ + "]");
    }
  }

 private:
  std::string name_;
  const ConfigSection* section_;
  std::set<std::string> used_;
};

std::string num(double v) { return format_number(v, 17); }

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + num(v[i]);
  return out;
}

std::string form_text(const LinearForm& f) {
  std::string out;
  for (std::size_t i = 0; i < f.terms.size(); ++i) out += (i ? "," : "") + f.terms[i].name();
  return out.empty() ? "none" : out;
}

AllocationStrategy parse_strategy(const std::string& text, const std::string& key) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ValidationError("[trial] " + key + " must look like label:coverage");
  AllocationStrategy s;
  s.label = text.substr(0, colon);
  const auto c = parse_double(text.substr(colon + 1));
  if (s.label.empty() || !c) throw ValidationError("[trial] " + key + " must look like label:coverage");
  s.coverage = *c;
  return s;
}

}  // namespace

const std::string* ConfigSection::find(const std::string& key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) return &v;
  }
  return nullptr;
}

const ConfigSection* ConfigFile::section(const std::string& name) const {
  for (const auto& s : sections) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

namespace {

// Drops a trailing " ; ..." or " # ..." comment and unwraps double quotes.
std::string clean_value(const std::string& raw) {
  std::string v = raw;
  if (!v.empty() && v.front() == '"') {
    const auto close = v.find('"', 1);
    return close == std::string::npos ? v : v.substr(1, close - 1);
  }
  for (std::size_t i = 1; i < v.size(); ++i) {
    if ((v[i] == ';' || v[i] == '#') && std::isspace(static_cast<unsigned char>(v[i - 1]))) {
      v.erase(i);
      break;
    }
  }
  while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.pop_back();
  return v;
}

}  // namespace

ConfigFile read_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.line(), e.message());
  }
  static const std::set<std::string> known{"config", "household", "trial", "cluster", "model"};
  // Command-line defaults live beside the worlds; the command-line parser owns them.
  static const std::set<std::string> command_sections{
      "effects", "infectiousness", "confound-bias", "gee", "simulate",
      "simulate.households", "simulate.trial", "simulate.clusters"};
  ConfigFile cfg;
  for (const auto& [name, body] : tree) {
    if (body.empty() || command_sections.count(name)) continue;
    if (!known.count(name)) throw ValidationError("unknown section [" + name + "]");
    ConfigSection s{name, {}};
    for (const auto& [k, v] : body) s.entries.emplace_back(k, clean_value(v.data()));
    cfg.sections.push_back(std::move(s));
  }
  if (const auto* meta = cfg.section("config")) {
    for (const auto& [k, v] : meta->entries) {
      if (k != "version") throw ValidationError("unknown key '" + k + "' in [config]");
      if (parse_integer(v) != kConfigVersion) {
        throw ValidationError("configuration version " + v + " is not supported (expected " +
                              std::to_string(kConfigVersion) + ")");
      }
    }
  }
  return cfg;
}

ConfigFile load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open configuration file '" + path + "'");
  return read_config(in);
}

HouseholdWorld household_world_from(const ConfigFile& cfg) {
  SectionReader r(cfg, "household");
  HouseholdWorld w;
  w.doomed = r.number("doomed", w.doomed);
  w.protected_ = r.number("protected", w.protected_);
  w.immune = r.number("immune", 1.0 - w.doomed - w.protected_);
  w.q_doomed_v = r.number("q_doomed_v", w.q_doomed_v);
  w.q_doomed_u = r.number("q_doomed_u", w.q_doomed_u);
  w.q_protected_u = r.number("q_protected_u", w.q_protected_u);
  w.q2 = r.number("q2", w.q2);
  r.finish();
  validate(w);
  return w;
}

TrialSetup trial_setup_from(const ConfigFile& cfg) {
  SectionReader r(cfg, "trial");
  TrialSetup t;
  if (const auto* sizes = r.raw("sizes")) {
    for (double v : parse_number_list(*sizes, "[trial] sizes")) {
      if (v != std::floor(v)) throw ValidationError("[trial] sizes must be integers");
      t.world.group_sizes.push_back(static_cast<std::int64_t>(v));
    }
    if (r.raw("groups") || r.raw("size")) throw ValidationError("[trial] give either sizes or groups + size");
  } else {
    const auto groups = r.integer("groups", 0);
    const auto size = r.integer("size", 0);
    if (groups < 1) throw ValidationError("[trial] needs sizes or groups + size");
    t.world.group_sizes.assign(static_cast<std::size_t>(groups), size);
  }
  t.world.rule.base = r.number("base", 0.0);
  t.world.rule.own = r.number("own", 0.0);
  t.world.rule.spill = r.number("spill", 0.0);
  t.world.rule.inter = r.number("inter", 0.0);
  const auto outcome = r.text("outcome", "binary");
  if (outcome == "binary") {
    t.world.scale = OutcomeScale::Binary;
  } else if (outcome == "real") {
    t.world.scale = OutcomeScale::Real;
  } else {
    throw ValidationError("[trial] outcome must be binary or real");
  }
  t.world.heterogeneity = r.number("heterogeneity", 0.0);
  const auto ws = r.integer("world_seed", 1);
  if (ws < 0) throw ValidationError("[trial] world_seed must be nonnegative");
  t.world.world_seed = static_cast<std::uint64_t>(ws);
  if (const auto* v = r.raw("psi")) t.psi = parse_strategy(*v, "psi");
  if (const auto* v = r.raw("phi")) t.phi = parse_strategy(*v, "phi");
  const auto gp = r.integer("groups_psi", 0);
  if (gp < 0) throw ValidationError("[trial] groups_psi must be nonnegative");
  t.groups_psi = gp ? static_cast<std::size_t>(gp) : t.world.group_sizes.size() / 2;
  t.allocation = parse_allocation(r.text("allocation", "mixed"));
  r.finish();
  validate(t.world);
  return t;
}

ClusterWorld cluster_world_from(const ConfigFile& cfg) {
  SectionReader r(cfg, "cluster");
  ClusterWorld w;
  const auto size = r.integer("size", static_cast<long long>(w.cluster_size));
  if (size < 2) throw ValidationError("[cluster] size must be at least 2");
  w.cluster_size = static_cast<std::size_t>(size);
  w.law = parse_confounder_law(r.text("law", to_string(w.law)));
  w.l_prob = r.number("l_prob", w.l_prob);
  w.a0 = r.number("a0", w.a0);
  w.a1 = r.number("a1", w.a1);
  w.kappa = r.number("kappa", w.kappa);
  w.u_prob0 = r.number("u_prob0", w.u_prob0);
  w.u_prob1 = r.number("u_prob1", w.u_prob1);
  w.rho = r.number("rho", w.rho);
  w.beta0 = r.number("beta0", w.beta0);
  w.beta_l = r.number("beta_l", w.beta_l);
  w.beta_h = r.number("beta_h", w.beta_h);
  w.psi_d0 = r.number("psi_d0", w.psi_d0);
  w.psi_d1 = r.number("psi_d1", w.psi_d1);
  w.psi_s = r.number("psi_s", w.psi_s);
  w.lambda_u = r.number("lambda_u", w.lambda_u);
  w.lambda_v = r.number("lambda_v", w.lambda_v);
  w.sigma = r.number("sigma", w.sigma);
  r.finish();
  validate(w);
  return w;
}

SelectionModel selection_model_from(const ConfigFile& cfg, std::size_t dim) {
  auto m = SelectionModel::defaults(dim);
  if (!cfg.section("model")) return m;
  SectionReader r(cfg, "model");
  if (const auto* v = r.raw("gamma_d")) m.gamma_d = parse_form(*v, dim);
  if (const auto* v = r.raw("gamma_s")) m.gamma_s = parse_form(*v, dim);
  if (const auto* v = r.raw("q")) m.q = parse_form(*v, dim);
  if (const auto* v = r.raw("propensity")) m.propensity.terms = parse_form(*v, dim);
  const auto link = r.text("q_link", "identity");
  if (link == "identity") {
    m.q_link = QLink::Identity;
  } else if (link == "exp") {
    m.q_link = QLink::Exp;
  } else {
    throw ValidationError("[model] q_link must be identity or exp");
  }
  m.g_summary = parse_exposure_summary(r.text("g", "count"));
  m.h_summary = parse_exposure_summary(r.text("h", "mean"));

  const auto dd = r.text("delta_d", "none");
  if (dd == "none") {
    m.delta.d_kind = DeltaFamily::DKind::Zero;
  } else if (dd == "d1") {
    m.delta.d_kind = DeltaFamily::DKind::Linear;
  } else if (dd == "d2") {
    m.delta.d_kind = DeltaFamily::DKind::Interaction;
  } else {
    throw ValidationError("[model] delta_d must be none, d1 or d2");
  }
  const auto ds = r.text("delta_s", "none");
  if (ds == "none") {
    m.delta.s_kind = DeltaFamily::SKind::Zero;
  } else if (ds == "s1") {
    m.delta.s_kind = DeltaFamily::SKind::Linear;
  } else if (ds == "s2") {
    m.delta.s_kind = DeltaFamily::SKind::Interaction;
  } else {
    throw ValidationError("[model] delta_s must be none, s1 or s2");
  }
  const auto default_lambda = [](std::size_t n) { return std::vector<double>(n, 0.0); };
  const std::size_t nd = m.delta.d_kind == DeltaFamily::DKind::Zero ? 0
                         : m.delta.d_kind == DeltaFamily::DKind::Linear ? 1 : 2;
  const std::size_t ns = m.delta.s_kind == DeltaFamily::SKind::Zero ? 0
                         : m.delta.s_kind == DeltaFamily::SKind::Linear ? 1 : 2;
  const auto* ld = r.raw("lambda_d");
  const auto* ls = r.raw("lambda_s");
  m.delta.lambda_d = ld ? parse_number_list(*ld, "[model] lambda_d") : default_lambda(nd);
  m.delta.lambda_s = ls ? parse_number_list(*ls, "[model] lambda_s") : default_lambda(ns);
  const auto sc = r.integer("s_covariate", 1);
  if (sc < 1 || static_cast<std::size_t>(sc) > std::max<std::size_t>(dim, 1)) {
    throw ValidationError("[model] s_covariate must name one of l_1..l_" + std::to_string(dim));
  }
  m.delta.s_covariate = static_cast<std::size_t>(sc - 1);
  r.finish();
  validate(m.delta);
  return m;
}

std::vector<double> parse_number_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& f : split_fields(text, ',')) {
    const auto v = parse_double(f);
    if (!v) throw ValidationError(what + ": '" + f + "' is not a number");
    out.push_back(*v);
  }
  if (out.empty()) throw ValidationError(what + " is empty");
  return out;
}

std::vector<DeltaFamily> parse_gamma_grid(const std::string& text, const SelectionModel& model) {
  std::map<std::string, std::vector<double>> axes;
  for (const auto& part : split_fields(text, ';')) {
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw ValidationError("gamma grid entries look like lambda_d=v1,v2");
    auto key = part.substr(0, eq);
    key.erase(key.find_last_not_of(' ') + 1);
    static const std::set<std::string> known{"lambda_d", "lambda_d2", "lambda_s", "lambda_s2"};
    if (!known.count(key)) throw ValidationError("unknown gamma grid axis '" + key + "'");
    if (axes.count(key)) throw ValidationError("gamma grid axis '" + key + "' repeated");
    axes[key] = parse_number_list(part.substr(eq + 1), "gamma grid " + key);
  }
  if (axes.empty()) throw ValidationError("gamma grid is empty");

  auto d_kind = model.delta.d_kind;
  auto s_kind = model.delta.s_kind;
  if (d_kind == DeltaFamily::DKind::Zero && axes.count("lambda_d")) d_kind = DeltaFamily::DKind::Linear;
  if (s_kind == DeltaFamily::SKind::Zero && axes.count("lambda_s")) s_kind = DeltaFamily::SKind::Linear;
  if (axes.count("lambda_d2") && d_kind != DeltaFamily::DKind::Interaction) {
    throw ValidationError("lambda_d2 needs delta_d = d2");
  }
  if (axes.count("lambda_s2") && s_kind != DeltaFamily::SKind::Interaction) {
    throw ValidationError("lambda_s2 needs delta_s = s2");
  }
  const auto axis = [&](const char* key) {
    const auto it = axes.find(key);
    return it == axes.end() ? std::vector<double>{0.0} : it->second;
  };
  std::vector<DeltaFamily> out;
  for (double d1 : axis("lambda_d")) {
    for (double d2 : axis("lambda_d2")) {
      for (double s1 : axis("lambda_s")) {
        for (double s2 : axis("lambda_s2")) {
          DeltaFamily f;
          f.d_kind = d_kind;
          f.s_kind = s_kind;
          f.s_covariate = model.delta.s_covariate;
          if (d_kind == DeltaFamily::DKind::Linear) f.lambda_d = {d1};
          if (d_kind == DeltaFamily::DKind::Interaction) f.lambda_d = {d1, d2};
          if (s_kind == DeltaFamily::SKind::Linear) f.lambda_s = {s1};
          if (s_kind == DeltaFamily::SKind::Interaction) f.lambda_s = {s1, s2};
          out.push_back(std::move(f));
        }
      }
    }
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> describe(const HouseholdWorld& w) {
  return {{"household.doomed", num(w.doomed)},
          {"household.protected", num(w.protected_)},
          {"household.immune", num(w.immune)},
          {"household.q_doomed_v", num(w.q_doomed_v)},
          {"household.q_doomed_u", num(w.q_doomed_u)},
          {"household.q_protected_u", num(w.q_protected_u)},
          {"household.q2", num(w.q2)}};
}

std::vector<std::pair<std::string, std::string>> describe(const TrialSetup& t) {
  std::vector<double> sizes(t.world.group_sizes.begin(), t.world.group_sizes.end());
  return {{"trial.sizes", join(sizes)},
          {"trial.base", num(t.world.rule.base)},
          {"trial.own", num(t.world.rule.own)},
          {"trial.spill", num(t.world.rule.spill)},
          {"trial.inter", num(t.world.rule.inter)},
          {"trial.outcome", t.world.scale == OutcomeScale::Binary ? "binary" : "real"},
          {"trial.heterogeneity", num(t.world.heterogeneity)},
          {"trial.world_seed", std::to_string(t.world.world_seed)},
          {"trial.psi", t.psi.label + ":" + num(t.psi.coverage)},
          {"trial.phi", t.phi.label + ":" + num(t.phi.coverage)},
          {"trial.groups_psi", std::to_string(t.groups_psi)},
          {"trial.allocation", to_string(t.allocation)}};
}

std::vector<std::pair<std::string, std::string>> describe(const ClusterWorld& w) {
  return {{"cluster.size", std::to_string(w.cluster_size)},
          {"cluster.law", to_string(w.law)},
          {"cluster.l_prob", num(w.l_prob)},
          {"cluster.a0", num(w.a0)},
          {"cluster.a1", num(w.a1)},
          {"cluster.kappa", num(w.kappa)},
          {"cluster.u_prob0", num(w.u_prob0)},
          {"cluster.u_prob1", num(w.u_prob1)},
          {"cluster.rho", num(w.rho)},
          {"cluster.beta0", num(w.beta0)},
          {"cluster.beta_l", num(w.beta_l)},
          {"cluster.beta_h", num(w.beta_h)},
          {"cluster.psi_d0", num(w.psi_d0)},
          {"cluster.psi_d1", num(w.psi_d1)},
          {"cluster.psi_s", num(w.psi_s)},
          {"cluster.lambda_u", num(w.lambda_u)},
          {"cluster.lambda_v", num(w.lambda_v)},
          {"cluster.sigma", num(w.sigma)}};
}

std::vector<std::pair<std::string, std::string>> describe(const SelectionModel& m) {
  const char* dk[] = {"none", "d1", "d2"};
  const char* sk[] = {"none", "s1", "s2"};
  return {{"model.gamma_d", form_text(m.gamma_d)},
          {"model.gamma_s", form_text(m.gamma_s)},
          {"model.q", form_text(m.q)},
          {"model.q_link", m.q_link == QLink::Identity ? "identity" : "exp"},
          {"model.propensity", form_text(m.propensity.terms)},
          {"model.g", to_string(m.g_summary)},
          {"model.h", to_string(m.h_summary)},
          {"model.delta_d", dk[static_cast<int>(m.delta.d_kind)]},
          {"model.delta_s", sk[static_cast<int>(m.delta.s_kind)]},
          {"model.s_covariate", std::to_string(m.delta.s_covariate + 1)}};
}

}  // namespace interfere
