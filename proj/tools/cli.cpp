#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>

#include "interfere/confound_bias.hpp"
#include "interfere/errors.hpp"
#include "interfere/estimands.hpp"
#include "interfere/infectiousness.hpp"
#include "interfere/oracle_sim.hpp"
#include "interfere/selection_gee.hpp"
#include "interfere/trial_data.hpp"
#include "interfere/tsv.hpp"
#include "interfere/world_config.hpp"

namespace interfere::cli {

namespace {

struct Globals {
  std::string out_path;
  int precision = 6;
  std::uint64_t seed = 1;
};

struct EffectsArgs {
  std::string data, phi, psi, delimiter = "auto";
  bool per_1000 = false;
  double level = 0.95;
};

struct InfectArgs {
  std::string data, summary, theta, gamma, beta, delimiter = "auto";
  double level = 0.95;
};

struct BiasArgs {
  double observed = 0.0;
  std::string ci, lambda = "0", tau = "0", du = "0", dv = "0", spec, delimiter = "auto";
};

struct GeeArgs {
  std::string data, model, gamma_grid, delimiter = "auto";
  int bootstrap = 500;
};

struct SimulateArgs {
  std::string world, ledger_out;
  std::size_t n = 0;
};

/// Comma for .csv and anything else, tab for .tsv, unless forced.
DelimitedFormat format_for(const std::string& path, const std::string& choice) {
  if (choice == "comma") return DelimitedFormat::csv();
  if (choice == "tab") return DelimitedFormat::tsv();
  if (choice != "auto") throw ValidationError("--delimiter must be auto, comma or tab");
  const bool tsv = path.size() >= 4 && path.compare(path.size() - 4, 4, ".tsv") == 0;
  return tsv ? DelimitedFormat::tsv() : DelimitedFormat::csv();
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return in;
}

void comment(std::ostream& os, const std::string& key, const std::string& value) {
  os << "# " << key << ": " << value << '\n';
}

void comments(std::ostream& os, const std::vector<std::pair<std::string, std::string>>& kv) {
  for (const auto& [k, v] : kv) comment(os, k, v);
}

std::string option_value(const CLI::Option* opt) {
  if (opt->count() == 0) return opt->get_default_str();
  std::string out;
  for (const auto& r : opt->results()) out += (out.empty() ? "" : ",") + r;
  return out;
}

/// Every option of the chain of parsed (sub)commands, defaults included.
void provenance(std::ostream& os, const std::vector<const CLI::App*>& chain) {
  comment(os, "interfere", INTERFERE_VERSION);
  std::string command;
  for (std::size_t i = 1; i < chain.size(); ++i) command += (i > 1 ? " " : "") + chain[i]->get_name();
  comment(os, "command", command);
  for (const auto* app : chain) {
    for (const auto* opt : app->get_options()) {
      const auto name = opt->get_single_name();
      if (name == "help" || name.empty()) continue;
      comment(os, "option." + name, option_value(opt));
    }
  }
}

std::optional<std::pair<double, double>> parse_interval(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const auto v = parse_number_list(text, "--ci");
  if (v.size() != 2 || !(v[0] <= v[1])) throw ValidationError("--ci must be 'low,high' with low <= high");
  return std::pair{v[0], v[1]};
}

std::string fmt(double v, int p) { return format_number(v, p); }

std::string fmt_pair(const std::optional<std::pair<double, double>>& v, int p) {
  return v ? fmt(v->first, p) + "," + fmt(v->second, p) : "NA";
}

// ---------------------------------------------------------------------------

void run_effects(const EffectsArgs& a, const Globals& g, std::ostream& os) {
  auto in = open_input(a.data);
  const auto table = parse_group_summary(in, format_for(a.data, a.delimiter));
  if (!(a.level > 0.0 && a.level < 1.0)) throw ValidationError("--level must lie in (0, 1)");
  auto effects = all_effects(table, a.phi, a.psi);
  for (auto& e : effects) {
    e = with_wald_interval(e, a.level);
    if (a.per_1000) e = e.scaled(1000.0);
  }
  const auto dec = decomposition_report(table, a.phi, a.psi);
  const double unit = a.per_1000 ? 1000.0 : 1.0;
  comment(os, "groups", std::to_string(table.groups().size()));
  comment(os, "residual_total", fmt(dec.total_residual * unit, g.precision));
  comment(os, "residual_overall", fmt(dec.overall_residual * unit, g.precision));
  comment(os, "mean_coverage_phi", fmt(dec.mean_coverage_phi, g.precision));
  comment(os, "mean_coverage_psi", fmt(dec.mean_coverage_psi, g.precision));
  comment(os, "equal_coverage", dec.equal_coverage ? "yes" : "no");
  for (const auto& e : effects) {
    if (e.variance_warning) comment(os, "warning", e.label() + ": variance undefined with fewer than two groups");
  }
  write_effects_report(os, effects, a.per_1000 ? "per-1000" : "proportion", g.precision);
}

void run_infectiousness(const InfectArgs& a, const Globals& g, std::ostream& os) {
  if (a.data.empty() == a.summary.empty()) throw ValidationError("give exactly one of --data and --summary");
  InfectStudy study;
  if (!a.data.empty()) {
    auto in = open_input(a.data);
    const auto records = parse_households(in, format_for(a.data, a.delimiter));
    study = summarize_households(records);
  } else {
    const auto v = parse_number_list(a.summary, "--summary");
    if (v.size() != 4) throw ValidationError("--summary must be p1,p0,attack1,attack0");
    study = make_infect_study(v[0], v[1], v[2], v[3]);
  }
  const int p = g.precision;
  const auto crude = crude_effect(study);
  comment(os, "households", std::to_string(study.n_records));
  comment(os, "p1", fmt(study.p1, p));
  comment(os, "p0", fmt(study.p0, p));
  comment(os, "attack1", fmt(study.attack1, p));
  comment(os, "attack0", fmt(study.attack0, p));
  comment(os, "crude_rd", fmt(crude.risk_difference(), p));
  comment(os, "crude_rd_ci", fmt_pair(crude_rd_interval(study, a.level), p));
  comment(os, "pi_d", fmt(study.doomed_fraction(), p));
  comment(os, "pi_p", fmt(study.protected_fraction(), p));
  const auto tr = theta_range(study);
  comment(os, "theta_range", fmt(tr.first, p) + "," + fmt(tr.second, p));
  const auto gr = gamma_range(study);
  comment(os, "gamma_range", fmt(gr.first, p) + "," + fmt(gr.second, p));
  const auto b = monotonicity_bounds(study);
  comment(os, "bounds_p_u", fmt_pair(b.p_u(), p));
  comment(os, "bounds_rd", fmt_pair(b.risk_difference(), p));
  comment(os, "bounds_rr", fmt_pair(b.risk_ratio(), p));
  comment(os, "bounds_or", fmt_pair(b.odds_ratio(), p));
  comment(os, "bounds_efficacy", fmt_pair(b.efficacy(), p));

  std::vector<SweepRow> rows;
  const auto add = [&](const std::string& list, SensitivityKind kind) {
    if (list.empty()) return;
    SensitivitySpec spec;
    spec.kind = kind;
    spec.grid = parse_number_list(list, "--" + to_string(kind));
    const auto r = sweep(study, spec);
    rows.insert(rows.end(), r.begin(), r.end());
  };
  add(a.theta, SensitivityKind::Theta);
  add(a.gamma, SensitivityKind::Gamma);
  add(a.beta, SensitivityKind::Beta);
  if (a.theta.empty() && a.gamma.empty() && a.beta.empty()) {
    // No parameter requested: report the crude contrast as theta = 0.
    rows = sweep(study, {SensitivityKind::Theta, {0.0}});
  }
  write_sweep_report(os, rows, p);
}

void run_confound_bias(const BiasArgs& a, const Globals& g, const CLI::App& sub, std::ostream& os) {
  const auto ci = parse_interval(a.ci);
  if (!a.spec.empty()) {
    for (const char* flag : {"--lambda", "--tau", "--du", "--dv"}) {
      if (sub.count(flag)) throw ValidationError(std::string(flag) + " cannot be combined with --spec");
    }
    auto in = open_input(a.spec);
    const auto table = parse_general_spec(in, format_for(a.spec, a.delimiter).delimiter);
    const auto spec = table.to_spec();
    const double bias = bias_general(spec, table.zg, table.zg_prime);
    const auto corrected = correct(a.observed, ci, bias, false);
    const auto [du, dv] = confounder_mean_differences(spec, table.zg, table.zg_prime);
    comment(os, "form", "general");
    comment(os, "zg", fmt(table.zg.z, 17) + "," + fmt(table.zg.g, 17));
    comment(os, "zg_prime", fmt(table.zg_prime.z, 17) + "," + fmt(table.zg_prime.g, 17));
    if (shift_differs_across_pairs(spec, table.zg, table.zg_prime)) {
      comment(os, "warning", "confounder shifts differ between the exposure pairs; "
                             "a zero causal effect is not exactly representable");
    }
    ReportWriter w(os, {"lambda", "tau", "du", "dv", "bias", "corrected", "ci_low", "ci_high"}, g.precision);
    w.header();
    w.row({"NA", "NA", w.num(du), w.num(dv), w.num(bias), w.num(corrected.corrected), "NA", "NA"});
    return;
  }
  BiasGrid grid;
  grid.lambda = parse_number_list(a.lambda, "--lambda");
  grid.tau = parse_number_list(a.tau, "--tau");
  grid.du = parse_number_list(a.du, "--du");
  grid.dv = parse_number_list(a.dv, "--dv");
  comment(os, "form", "simple");
  write_bias_report(os, sweep_bias(grid, a.observed, ci), g.precision);
}

void run_gee(const GeeArgs& a, const Globals& g, const std::string& config_path, std::ostream& os) {
  auto in = open_input(a.data);
  const auto clusters = parse_clusters(in, format_for(a.data, a.delimiter));
  validate_clusters(clusters);
  const std::size_t dim = clusters.front().members.front().l.size();
  const auto model_path = !a.model.empty() ? a.model : config_path;
  const auto model = model_path.empty() ? SelectionModel::defaults(dim)
                                        : selection_model_from(load_config(model_path), dim);
  if (a.bootstrap < 0) throw ValidationError("--bootstrap must be nonnegative");

  std::vector<DeltaFamily> gamma;
  if (!a.gamma_grid.empty()) {
    gamma = parse_gamma_grid(a.gamma_grid, model);
  } else {
    gamma.push_back(DeltaFamily::zero());
    if (!model.delta.is_zero()) gamma.push_back(model.delta);
  }

  comments(os, describe(model));
  comment(os, "clusters", std::to_string(clusters.size()));
  const FitOptions options;
  const auto prop = fit_propensity(clusters, model, options);
  const auto names = model.propensity.terms.terms;
  for (std::size_t k = 0; k < names.size(); ++k) {
    comment(os, "alpha[" + names[k].name() + "]", fmt(prop.alpha[static_cast<Eigen::Index>(k)], g.precision));
  }
  comment(os, "propensity_iterations", std::to_string(prop.iterations));
  comment(os, "propensity_gradient_norm", fmt(prop.gradient_norm, 3));
  comment(os, "propensity_pearson", fmt(propensity_goodness_of_fit(clusters, model, prop.alpha).pearson, g.precision));
  comment(os, "standard_errors", a.bootstrap > 0 ? "cluster bootstrap, " + std::to_string(a.bootstrap) + " replicates"
                                                 : "none");

  const auto rows = sensitivity_sweep(clusters, model, gamma, {a.bootstrap, g.seed}, options);
  bool any_ok = false;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].fit) {
      any_ok = true;
      if (rows[k].fit->bootstrap_failures > 0) {
        comment(os, "row " + std::to_string(k + 1) + " bootstrap_failures",
                std::to_string(rows[k].fit->bootstrap_failures));
      }
    } else {
      comment(os, "row " + std::to_string(k + 1) + " error", rows[k].error);
    }
  }
  write_gee_report(os, model, rows, g.precision);
  if (!any_ok) throw EstimationError("every fit in the sensitivity sweep failed; first error: " + rows.front().error);
}

void run_simulate(const std::string& which, const SimulateArgs& a, const Globals& g,
                  const std::string& config_path, std::ostream& os) {
  const auto path = !a.world.empty() ? a.world : config_path;
  if (path.empty()) throw ValidationError("simulate needs --world (or --config)");
  const auto cfg = load_config(path);
  const int p = g.precision;

  if (which == "households") {
    if (a.n == 0) throw ValidationError("--n must be positive");
    const auto w = household_world_from(cfg);
    const auto t = true_household_quantities(w);
    comments(os, describe(w));
    comment(os, "true.p_v", fmt(t.p_v, 17));
    comment(os, "true.p_u", fmt(t.p_u, 17));
    comment(os, "true.p0", fmt(t.p0, 17));
    comment(os, "true.pi_d", fmt(t.pi_d, 17));
    comment(os, "true.theta", fmt(t.theta, 17));
    comment(os, "true.gamma", fmt(t.gamma, 17));
    comment(os, "true.beta", t.beta ? fmt(*t.beta, 17) : "NA");
    write_households(os, simulate_households(w, a.n, g.seed));
  } else if (which == "trial") {
    const auto setup = trial_setup_from(cfg);
    comments(os, describe(setup));
    const auto truth = true_trial_effects(setup.world, setup.psi, setup.phi);
    const auto& e = setup.allocation == Allocation::Mixed ? truth.mixed : truth.bernoulli;
    comment(os, "true.direct_psi", fmt(e.direct_psi, p));
    comment(os, "true.direct_phi", fmt(e.direct_phi, p));
    comment(os, "true.indirect", fmt(e.indirect, p));
    comment(os, "true.total", fmt(e.total, p));
    comment(os, "true.overall", fmt(e.overall, p));
    write_group_summary(os, simulate_trial(setup.world, setup.psi, setup.phi, setup.groups_psi, setup.allocation,
                                           g.seed));
  } else {
    if (a.n == 0) throw ValidationError("--n must be positive");
    const auto w = cluster_world_from(cfg);
    comments(os, describe(w));
    const auto delta = true_delta_family(w);
    comment(os, "true.psi_d0", fmt(w.psi_d0, 17));
    comment(os, "true.psi_d1", fmt(w.psi_d1, 17));
    comment(os, "true.psi_s", fmt(w.psi_s, 17));
    comment(os, "true.lambda_d", delta.lambda_d_text());
    comment(os, "true.lambda_s", delta.lambda_s_text());
    const auto sim = simulate_clusters(w, a.n, g.seed);
    write_clusters(os, sim.data);
    if (!a.ledger_out.empty()) {
      std::ofstream ledger(a.ledger_out);
      if (!ledger) throw ValidationError("cannot write '" + a.ledger_out + "'");
      write_ledger(ledger, sim.ledger);
    }
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Causal effects under interference: estimands, sensitivity analyses and oracle worlds", "interfere"};
  app.option_defaults()->always_capture_default();
  app.fallthrough();
  app.require_subcommand(1);
  {
    // comma lists such as "lambda = 1,2" stay one value for our own list parser
    auto ini = std::make_shared<CLI::ConfigINI>();
    ini->arrayBounds('[', ']')->arrayDelimiter('|');
    app.config_formatter(ini);
  }

  Globals g;
  app.add_option("--out", g.out_path, "Write the report to this file instead of stdout");
  app.add_option("--precision", g.precision, "Significant digits in reports")->check(CLI::Range(1, 17));
  app.add_option("--seed", g.seed, "Seed for simulation and bootstrap draws");
  auto* config_opt = app.set_config("--config", "", "INI file with worlds, model forms and option defaults");

  EffectsArgs ea;
  auto* effects = app.add_subcommand("effects", "Direct, indirect, total and overall effects of a two-stage trial");
  effects->add_option("--data", ea.data, "Group summary file")->required();
  effects->add_option("--phi", ea.phi, "Allocation label phi")->required();
  effects->add_option("--psi", ea.psi, "Allocation label psi")->required();
  effects->add_flag("--per-1000", ea.per_1000, "Report effects per 1000");
  effects->add_option("--level", ea.level, "Confidence level");
  effects->add_option("--delimiter", ea.delimiter, "auto, comma or tab");

  InfectArgs ia;
  auto* infect = app.add_subcommand("infectiousness", "Infectiousness effect: crude contrast, bounds and sweeps");
  infect->add_option("--data", ia.data, "Household file (household_id, z1, y1, y2)");
  infect->add_option("--summary", ia.summary, "p1,p0,attack1,attack0 instead of --data");
  infect->add_option("--theta", ia.theta, "Comma list of theta values");
  infect->add_option("--gamma", ia.gamma, "Comma list of gamma values");
  infect->add_option("--beta", ia.beta, "Comma list of beta values");
  infect->add_option("--level", ia.level, "Confidence level for the crude interval");
  infect->add_option("--delimiter", ia.delimiter, "auto, comma or tab");

  BiasArgs ba;
  auto* bias = app.add_subcommand("confound-bias", "Bias-corrected contrasts under unmeasured confounding");
  bias->add_option("--observed", ba.observed, "Observed contrast")->required();
  bias->add_option("--ci", ba.ci, "Observed interval as low,high");
  bias->add_option("--lambda", ba.lambda, "Comma list: outcome shift per unit of U");
  bias->add_option("--tau", ba.tau, "Comma list: outcome shift per unit of V");
  bias->add_option("--du", ba.du, "Comma list: mean difference of U");
  bias->add_option("--dv", ba.dv, "Comma list: mean difference of V");
  bias->add_option("--spec", ba.spec, "Tabulated general specification");
  bias->add_option("--delimiter", ba.delimiter, "auto, comma or tab");

  GeeArgs ga;
  auto* gee = app.add_subcommand("gee", "Selection-function sensitivity analysis for clustered data");
  gee->add_option("--data", ga.data, "Cluster file (cluster_id, individual_id, z, y, l_1..l_k)")->required();
  gee->add_option("--model", ga.model, "INI file with a [model] section");
  gee->add_option("--gamma-grid", ga.gamma_grid, "e.g. lambda_d=-1,0,1;lambda_s=0,0.5");
  gee->add_option("--bootstrap", ga.bootstrap, "Cluster bootstrap replicates (0 disables)");
  gee->add_option("--delimiter", ga.delimiter, "auto, comma or tab");

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "Draw data from an oracle world");
  simulate->require_subcommand(1);
  std::vector<CLI::App*> sim_subs;
  for (const char* name : {"households", "trial", "clusters"}) {
    auto* s = simulate->add_subcommand(name, std::string("Simulate ") + name);
    s->add_option("--world", sa.world, "INI file describing the world");
    s->add_option("--n", sa.n, "Number of households or clusters (ignored by trial)");
    s->add_option("--ledger-out", sa.ledger_out, "File for the hidden confounder ledger (clusters)");
    sim_subs.push_back(s);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ExtrasError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  } catch (const CLI::RequiredError& e) {
    const bool missing_command = std::string(e.what()).find("subcommand") != std::string::npos;
    err << "error: " << e.what() << '\n';
    if (missing_command) err << '\n' << app.help();
    return missing_command ? kUsage : kValidation;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  }

  const std::string config_path = config_opt->count() ? config_opt->as<std::string>() : "";
  std::ostringstream body;
  try {
    std::vector<const CLI::App*> chain{&app};
    if (effects->parsed()) {
      chain.push_back(effects);
      provenance(body, chain);
      run_effects(ea, g, body);
    } else if (infect->parsed()) {
      chain.push_back(infect);
      provenance(body, chain);
      run_infectiousness(ia, g, body);
    } else if (bias->parsed()) {
      chain.push_back(bias);
      provenance(body, chain);
      run_confound_bias(ba, g, *bias, body);
    } else if (gee->parsed()) {
      chain.push_back(gee);
      provenance(body, chain);
      run_gee(ga, g, config_path, body);
    } else {
      chain.push_back(simulate);
      const auto it = std::find_if(sim_subs.begin(), sim_subs.end(), [](const CLI::App* s) { return s->parsed(); });
      chain.push_back(*it);
      provenance(body, chain);
      run_simulate((*it)->get_name(), sa, g, config_path, body);
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const EstimationError& e) {
    err << "error: " << e.what() << '\n';
    return kEstimation;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }

  if (g.out_path.empty()) {
    out << body.str();
  } else {
    std::ofstream file(g.out_path, std::ios::binary);
    if (!file || !(file << body.str())) {
      err << "error: cannot write '" << g.out_path << "'\n";
      return kValidation;
    }
  }
  return kSuccess;
}

}  // namespace interfere::cli
