#include "interfere/trial_data.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <unordered_map>

#include "interfere/errors.hpp"

namespace interfere {

namespace {

bool skip_line(const std::string& line) {
  const auto first = line.find_first_not_of(" \t\r");
  return first == std::string::npos || line[first] == '#';
}

/// Reads the header and returns the field index for each required column.
std::vector<std::size_t> locate_columns(const std::vector<std::string>& header,
                                        const std::vector<std::string>& required,
                                        std::size_t line_no) {
  std::vector<std::size_t> idx;
  for (const auto& name : required) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError(line_no, "header is missing column '" + name + "'");
    idx.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  return idx;
}

std::int64_t field_count(const std::vector<std::string>& f, std::size_t i, const char* name,
                         std::size_t line_no) {
  const auto v = parse_integer(f[i]);
  if (!v) throw ParseError(line_no, std::string("column ") + name + ": expected an integer, got '" + f[i] + "'");
  return *v;
}

int field_binary(const std::vector<std::string>& f, std::size_t i, const char* name,
                 std::size_t line_no) {
  const auto v = parse_integer(f[i]);
  if (!v || (*v != 0 && *v != 1)) {
    throw ParseError(line_no, std::string("column ") + name + ": expected 0 or 1, got '" + f[i] + "'");
  }
  return static_cast<int>(*v);
}

double field_real(const std::vector<std::string>& f, std::size_t i, const std::string& name,
                  std::size_t line_no) {
  const auto v = parse_double(f[i]);
  if (!v) throw ParseError(line_no, "column " + name + ": expected a number, got '" + f[i] + "'");
  return *v;
}

struct LineReader {
  std::istream& in;
  char delimiter;
  std::size_t line_no = 0;

  /// Next non-comment line split into fields; false at end of stream.
  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (skip_line(line)) continue;
      fields = split_fields(line, delimiter);
      return true;
    }
    return false;
  }
};

}  // namespace

// ---------------------------------------------------------------------------

TrialTable::TrialTable(std::vector<GroupSummary> groups) : groups_(std::move(groups)) {
  if (groups_.empty()) throw ValidationError("no groups");
  std::set<std::string> ids;
  for (const auto& g : groups_) {
    const auto who = "group '" + g.group_id + "': ";
    if (g.group_id.empty()) throw ValidationError("group_id must not be empty");
    if (!ids.insert(g.group_id).second) throw ValidationError(who + "duplicate group_id");
    if (g.assignment.empty()) throw ValidationError(who + "assignment must not be empty");
    if (g.n_treated < 0) throw ValidationError(who + "n_treated is negative");
    if (g.n_control < 0) throw ValidationError(who + "n_control is negative");
    if (g.cases_treated < 0 || g.cases_treated > g.n_treated) {
      throw ValidationError(who + "cases_treated must lie in [0, n_treated]");
    }
    if (g.cases_control < 0 || g.cases_control > g.n_control) {
      throw ValidationError(who + "cases_control must lie in [0, n_control]");
    }
    if (g.size() < 1) throw ValidationError(who + "n_treated + n_control must be at least 1");
    if (std::find(labels_.begin(), labels_.end(), g.assignment) == labels_.end()) {
      labels_.push_back(g.assignment);
    }
  }
}

bool TrialTable::has_label(const std::string& label) const {
  return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

std::vector<GroupSummary> TrialTable::groups_with(const std::string& label) const {
  std::vector<GroupSummary> out;
  std::copy_if(groups_.begin(), groups_.end(), std::back_inserter(out),
               [&](const GroupSummary& g) { return g.assignment == label; });
  return out;
}

TrialTable parse_group_summary(std::istream& in, DelimitedFormat format) {
  static const std::vector<std::string> kColumns = {"group_id",  "assignment",    "n_treated",
                                                    "cases_treated", "n_control", "cases_control"};
  LineReader reader{in, format.delimiter};
  std::vector<std::string> fields;
  if (!reader.next(fields)) throw ParseError(reader.line_no + 1, "missing header row");
  const auto idx = locate_columns(fields, kColumns, reader.line_no);
  const auto width = fields.size();

  std::vector<GroupSummary> groups;
  while (reader.next(fields)) {
    const auto n = reader.line_no;
    if (fields.size() != width) {
      throw ParseError(n, "expected " + std::to_string(width) + " fields, found " +
                              std::to_string(fields.size()));
    }
    GroupSummary g;
    g.group_id = fields[idx[0]];
    g.assignment = fields[idx[1]];
    if (g.group_id.empty()) throw ParseError(n, "missing group_id");
    if (g.assignment.empty()) throw ParseError(n, "missing assignment");
    g.n_treated = field_count(fields, idx[2], "n_treated", n);
    g.cases_treated = field_count(fields, idx[3], "cases_treated", n);
    g.n_control = field_count(fields, idx[4], "n_control", n);
    g.cases_control = field_count(fields, idx[5], "cases_control", n);
    groups.push_back(std::move(g));
  }
  return TrialTable(std::move(groups));
}

void write_group_summary(std::ostream& out, const TrialTable& table, DelimitedFormat format) {
  const char d = format.delimiter;
  out << "group_id" << d << "assignment" << d << "n_treated" << d << "cases_treated" << d
      << "n_control" << d << "cases_control" << '\n';
  for (const auto& g : table.groups()) {
    out << g.group_id << d << g.assignment << d << g.n_treated << d << g.cases_treated << d
        << g.n_control << d << g.cases_control << '\n';
  }
}

// ---------------------------------------------------------------------------

std::vector<HouseholdRecord> parse_households(std::istream& in, DelimitedFormat format) {
  LineReader reader{in, format.delimiter};
  std::vector<std::string> fields;
  if (!reader.next(fields)) throw ParseError(reader.line_no + 1, "missing header row");
  const auto idx = locate_columns(fields, {"household_id", "z1", "y1", "y2"}, reader.line_no);
  const auto width = fields.size();

  std::vector<HouseholdRecord> out;
  while (reader.next(fields)) {
    const auto n = reader.line_no;
    if (fields.size() != width) {
      throw ParseError(n, "expected " + std::to_string(width) + " fields, found " +
                              std::to_string(fields.size()));
    }
    HouseholdRecord r;
    r.household_id = fields[idx[0]];
    if (r.household_id.empty()) throw ParseError(n, "missing household_id");
    r.z1 = field_binary(fields, idx[1], "z1", n);
    r.y1 = field_binary(fields, idx[2], "y1", n);
    r.y2 = field_binary(fields, idx[3], "y2", n);
    out.push_back(std::move(r));
  }
  return out;
}

void write_households(std::ostream& out, std::span<const HouseholdRecord> records,
                      DelimitedFormat format) {
  const char d = format.delimiter;
  out << "household_id" << d << "z1" << d << "y1" << d << "y2" << '\n';
  for (const auto& r : records) {
    out << r.household_id << d << r.z1 << d << r.y1 << d << r.y2 << '\n';
  }
}

double InfectStudy::doomed_fraction() const {
  if (attack0 <= 0.0) throw EstimationError("doomed fraction undefined: no infections in the control arm");
  return attack1 / attack0;
}

InfectStudy make_infect_study(double p1, double p0, double attack1, double attack0) {
  const auto check = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(std::string(name) + " must lie in [0, 1]");
  };
  check(p1, "p1");
  check(p0, "p0");
  check(attack1, "attack1");
  check(attack0, "attack0");
  InfectStudy s;
  s.p1 = p1;
  s.p0 = p0;
  s.attack1 = attack1;
  s.attack0 = attack0;
  return s;
}

InfectStudy summarize_households(std::span<const HouseholdRecord> records) {
  // Integer tallies keep the result independent of record order.
  std::size_t arm[2] = {0, 0};
  std::size_t index_cases[2] = {0, 0};
  std::size_t secondary[2] = {0, 0};
  for (const auto& r : records) {
    ++arm[r.z1];
    if (r.y1 == 1) {
      ++index_cases[r.z1];
      secondary[r.z1] += static_cast<std::size_t>(r.y2);
    }
  }
  if (arm[1] == 0) throw EstimationError("no households in cell z1=1");
  if (arm[0] == 0) throw EstimationError("no households in cell z1=0");
  if (index_cases[0] == 0 && index_cases[1] == 0) throw EstimationError("no infected index cases");
  if (index_cases[1] == 0) throw EstimationError("no infected index cases in cell z1=1, y1=1");
  if (index_cases[0] == 0) throw EstimationError("no infected index cases in cell z1=0, y1=1");

  InfectStudy s;
  s.n_records = records.size();
  s.n_index1 = index_cases[1];
  s.n_index0 = index_cases[0];
  s.p1 = static_cast<double>(secondary[1]) / static_cast<double>(index_cases[1]);
  s.p0 = static_cast<double>(secondary[0]) / static_cast<double>(index_cases[0]);
  s.attack1 = static_cast<double>(index_cases[1]) / static_cast<double>(arm[1]);
  s.attack0 = static_cast<double>(index_cases[0]) / static_cast<double>(arm[0]);
  return s;
}

// ---------------------------------------------------------------------------

std::vector<ClusterData> parse_clusters(std::istream& in, DelimitedFormat format) {
  LineReader reader{in, format.delimiter};
  std::vector<std::string> header;
  if (!reader.next(header)) throw ParseError(reader.line_no + 1, "missing header row");
  const auto idx = locate_columns(header, {"cluster_id", "individual_id", "z", "y"}, reader.line_no);

  // Covariate columns are l_1..l_k, located by name.
  std::vector<std::size_t> lcols;
  for (std::size_t k = 1;; ++k) {
    const auto name = "l_" + std::to_string(k);
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) break;
    lcols.push_back(static_cast<std::size_t>(it - header.begin()));
  }

  std::vector<ClusterData> clusters;
  std::unordered_map<std::string, std::size_t> where;
  std::vector<std::string> f;
  while (reader.next(f)) {
    const auto n = reader.line_no;
    if (f.size() != header.size()) {
      throw ParseError(n, "expected " + std::to_string(header.size()) + " fields, found " +
                              std::to_string(f.size()));
    }
    const auto& cid = f[idx[0]];
    if (cid.empty()) throw ParseError(n, "missing cluster_id");
    ClusterMember m;
    m.individual_id = f[idx[1]];
    if (m.individual_id.empty()) throw ParseError(n, "missing individual_id");
    m.z = field_binary(f, idx[2], "z", n);
    m.y = field_real(f, idx[3], "y", n);
    for (std::size_t k = 0; k < lcols.size(); ++k) {
      m.l.push_back(field_real(f, lcols[k], "l_" + std::to_string(k + 1), n));
    }
    auto [it, fresh] = where.try_emplace(cid, clusters.size());
    if (fresh) clusters.push_back(ClusterData{cid, {}});
    clusters[it->second].members.push_back(std::move(m));
  }
  validate_clusters(clusters);
  return clusters;
}

void write_clusters(std::ostream& out, std::span<const ClusterData> clusters, DelimitedFormat format) {
  const char d = format.delimiter;
  const std::size_t k =
      clusters.empty() || clusters.front().members.empty() ? 0 : clusters.front().members.front().l.size();
  out << "cluster_id" << d << "individual_id" << d << "z" << d << "y";
  for (std::size_t c = 1; c <= k; ++c) out << d << "l_" << c;
  out << '\n';
  for (const auto& cl : clusters) {
    for (const auto& m : cl.members) {
      out << cl.cluster_id << d << m.individual_id << d << m.z << d << format_number(m.y, 17);
      for (double v : m.l) out << d << format_number(v, 17);
      out << '\n';
    }
  }
}

void validate_clusters(std::span<const ClusterData> clusters) {
  if (clusters.empty()) throw ValidationError("no clusters");
  std::optional<std::size_t> dim;
  for (const auto& c : clusters) {
    if (c.members.size() < 2) throw ValidationError("cluster '" + c.cluster_id + "': size must be at least 2");
    std::set<std::string> ids;
    for (const auto& m : c.members) {
      if (m.z != 0 && m.z != 1) throw ValidationError("cluster '" + c.cluster_id + "': z must be 0 or 1");
      if (!ids.insert(m.individual_id).second) {
        throw ValidationError("cluster '" + c.cluster_id + "': duplicate individual_id '" + m.individual_id + "'");
      }
      if (!dim) dim = m.l.size();
      if (m.l.size() != *dim) throw ValidationError("cluster '" + c.cluster_id + "': covariate dimension differs");
    }
  }
}

ExposureSummary parse_exposure_summary(const std::string& name) {
  if (name == "mean" || name == "mean-of-others") return ExposureSummary::MeanOfOthers;
  if (name == "count" || name == "count-of-others") return ExposureSummary::CountOfOthers;
  if (name == "identity" || name == "identity-vector") return ExposureSummary::IdentityVector;
  throw ValidationError("unknown exposure summary '" + name + "'");
}

std::string to_string(ExposureSummary kind) {
  switch (kind) {
    case ExposureSummary::MeanOfOthers: return "mean-of-others";
    case ExposureSummary::CountOfOthers: return "count-of-others";
    case ExposureSummary::IdentityVector: return "identity-vector";
  }
  return "?";
}

std::vector<double> summarize_others(ExposureSummary kind, std::span<const std::vector<double>> values,
                                     std::size_t self) {
  const std::size_t dim = values.empty() ? 0 : values.front().size();
  if (kind == ExposureSummary::IdentityVector) {
    std::vector<double> out;
    for (std::size_t j = 0; j < values.size(); ++j) {
      if (j != self) out.insert(out.end(), values[j].begin(), values[j].end());
    }
    return out;
  }
  std::vector<double> sum(dim, 0.0);
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (j == self) continue;
    for (std::size_t k = 0; k < dim; ++k) sum[k] += values[j][k];
  }
  if (kind == ExposureSummary::MeanOfOthers && values.size() > 1) {
    for (auto& s : sum) s /= static_cast<double>(values.size() - 1);
  }
  return sum;
}

std::vector<IndividualFeatures> cluster_features(const ClusterData& data, ExposureSummary g,
                                                 ExposureSummary h) {
  std::vector<std::vector<double>> zs, ls;
  for (const auto& m : data.members) {
    zs.push_back({static_cast<double>(m.z)});
    ls.push_back(m.l);
  }
  std::vector<IndividualFeatures> out;
  out.reserve(data.members.size());
  for (std::size_t j = 0; j < data.members.size(); ++j) {
    const auto& m = data.members[j];
    out.push_back({data.cluster_id, m.individual_id, m.z, summarize_others(g, zs, j), m.l,
                   summarize_others(h, ls, j), m.y});
  }
  return out;
}

}  // namespace interfere
