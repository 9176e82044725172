#pragma once

// Data model and ingestion for the three study shapes: group-summary
// two-stage trials, two-person households, and clustered observational data.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "interfere/tsv.hpp"

namespace interfere {

// ---------------------------------------------------------------------------
// Two-stage trial, one row per group

struct GroupSummary {
  std::string group_id;
  std::string assignment;  // allocation label of the first-stage strategy
  std::int64_t n_treated = 0;
  std::int64_t cases_treated = 0;
  std::int64_t n_control = 0;
  std::int64_t cases_control = 0;

  std::int64_t size() const noexcept { return n_treated + n_control; }
};

/// Validated, immutable collection of group summaries in input order.
class TrialTable {
 public:
  /// Throws ValidationError naming the offending group and field.
  explicit TrialTable(std::vector<GroupSummary> groups);

  std::span<const GroupSummary> groups() const noexcept { return groups_; }
  /// Distinct allocation labels in order of first appearance.
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  bool has_label(const std::string& label) const;
  std::vector<GroupSummary> groups_with(const std::string& label) const;

 private:
  std::vector<GroupSummary> groups_;
  std::vector<std::string> labels_;
};

/// Header must name group_id, assignment, n_treated, cases_treated, n_control,
/// cases_control (any order). Blank lines and '#' lines are skipped.
TrialTable parse_group_summary(std::istream& in, DelimitedFormat format = {});
void write_group_summary(std::ostream& out, const TrialTable& table, DelimitedFormat format = {});

// ---------------------------------------------------------------------------
// Households of two; individual 2 is never treated

struct HouseholdRecord {
  std::string household_id;
  int z1 = 0;
  int y1 = 0;
  int y2 = 0;
};

std::vector<HouseholdRecord> parse_households(std::istream& in, DelimitedFormat format = {});
void write_households(std::ostream& out, std::span<const HouseholdRecord> records,
                      DelimitedFormat format = {});

/// Empirical ingredients of the infectiousness contrasts.
struct InfectStudy {
  double p1 = 0.0;       // P(Y2=1 | Z1=1, Y1=1)
  double p0 = 0.0;       // P(Y2=1 | Z1=0, Y1=1)
  double attack1 = 0.0;  // P(Y1=1 | Z1=1)
  double attack0 = 0.0;  // P(Y1=1 | Z1=0)
  std::size_t n_records = 0;
  std::size_t n_index1 = 0;  // infected index cases, treated arm
  std::size_t n_index0 = 0;  // infected index cases, control arm

  /// Share of infected-unvaccinated index cases in the doomed stratum
  /// (attack1 / attack0 under monotonicity).
  double doomed_fraction() const;
  double protected_fraction() const { return 1.0 - doomed_fraction(); }
};

/// Builds an InfectStudy directly from summary values; checks ranges.
InfectStudy make_infect_study(double p1, double p0, double attack1, double attack0);

/// Throws EstimationError naming the empty conditioning cell.
InfectStudy summarize_households(std::span<const HouseholdRecord> records);

// ---------------------------------------------------------------------------
// Clustered individual-level data

struct ClusterMember {
  std::string individual_id;
  int z = 0;
  double y = 0.0;
  std::vector<double> l;
};

struct ClusterData {
  std::string cluster_id;
  std::vector<ClusterMember> members;

  std::size_t size() const noexcept { return members.size(); }
};

/// Columns cluster_id, individual_id, z, y, l_1..l_k. Rows of a cluster need
/// not be contiguous; clusters keep order of first appearance.
std::vector<ClusterData> parse_clusters(std::istream& in, DelimitedFormat format = {});
void write_clusters(std::ostream& out, std::span<const ClusterData> clusters,
                    DelimitedFormat format = {});

/// Checks cluster sizes >= 2, binary z, and a common covariate dimension.
void validate_clusters(std::span<const ClusterData> clusters);

/// How the other members' treatments or covariates are summarized.
/// Mean and count are invariant to permutations of the other members;
/// identity keeps them in cluster order and is not.
enum class ExposureSummary { MeanOfOthers, CountOfOthers, IdentityVector };

ExposureSummary parse_exposure_summary(const std::string& name);
std::string to_string(ExposureSummary kind);

/// Summary of the rows of `values` other than `self`, applied coordinatewise.
/// For identity the other rows are concatenated.
std::vector<double> summarize_others(ExposureSummary kind,
                                     std::span<const std::vector<double>> values,
                                     std::size_t self);

struct IndividualFeatures {
  std::string cluster_id;
  std::string individual_id;
  int z = 0;
  std::vector<double> g;  // summary of the others' treatments
  std::vector<double> l;
  std::vector<double> h;  // summary of the others' covariates
  double y = 0.0;
};

std::vector<IndividualFeatures> cluster_features(const ClusterData& data, ExposureSummary g,
                                                 ExposureSummary h);

}  // namespace interfere
