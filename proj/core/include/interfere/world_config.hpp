#pragma once

// Structured configuration files: INI sections of key = value pairs.
//
//   [config]     version = 1 (optional; other versions are rejected)
//   [household]  HouseholdWorld
//   [trial]      TrialWorld plus the two strategies and the stage-one split
//   [cluster]    ClusterWorld
//   [model]      SelectionModel forms and the delta family
//
// Comments start with ';'. Unknown sections or keys are errors, so typos
// never silently fall back to defaults. Top-level keys and sections named
// after subcommands ([effects], [gee], [simulate.trial], ...) hold
// command-line defaults and are skipped here.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "interfere/oracle_sim.hpp"
#include "interfere/selection_gee.hpp"

namespace interfere {

inline constexpr int kConfigVersion = 1;

struct ConfigSection {
  std::string name;
  std::vector<std::pair<std::string, std::string>> entries;  // file order

  const std::string* find(const std::string& key) const;
};

struct ConfigFile {
  std::vector<ConfigSection> sections;

  const ConfigSection* section(const std::string& name) const;
};

/// Throws ParseError with the offending line.
ConfigFile read_config(std::istream& in);
ConfigFile load_config(const std::string& path);

HouseholdWorld household_world_from(const ConfigFile& cfg);

struct TrialSetup {
  TrialWorld world;
  AllocationStrategy psi{"psi", 0.5};
  AllocationStrategy phi{"phi", 0.3};
  std::size_t groups_psi = 0;  // 0 means half of the groups, rounded down
  Allocation allocation = Allocation::Mixed;
};

TrialSetup trial_setup_from(const ConfigFile& cfg);
ClusterWorld cluster_world_from(const ConfigFile& cfg);

/// Model forms for clusters with `covariate_dim` covariates. Missing keys
/// keep SelectionModel::defaults.
SelectionModel selection_model_from(const ConfigFile& cfg, std::size_t covariate_dim);

/// "lambda_d=-1,0,1;lambda_s=0,0.5" expands to the cartesian product over
/// the listed axes (lambda_d outermost). Interaction families also take
/// lambda_d2 and lambda_s2. Families come from `model.delta`; a family of
/// kind Zero is promoted to Linear when its axis is listed.
std::vector<DeltaFamily> parse_gamma_grid(const std::string& text, const SelectionModel& model);

/// Flat key = value renderings used for provenance comments in reports.
std::vector<std::pair<std::string, std::string>> describe(const HouseholdWorld& w);
std::vector<std::pair<std::string, std::string>> describe(const TrialSetup& t);
std::vector<std::pair<std::string, std::string>> describe(const ClusterWorld& w);
std::vector<std::pair<std::string, std::string>> describe(const SelectionModel& m);

/// Comma list of numbers; throws ValidationError naming `what`.
std::vector<double> parse_number_list(const std::string& text, const std::string& what);

}  // namespace interfere
