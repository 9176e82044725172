#pragma once

// Ground-truth worlds and their exact oracles: two-person households built
// from principal strata, two-stage trials with count-dependent potential
// outcomes, and confounded cluster worlds for the bias and selection models.
//
// All draws use KeyedRng keyed by entity, so every household, group and
// cluster is reproducible regardless of the order it is generated in.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "interfere/confound_bias.hpp"
#include "interfere/selection_gee.hpp"
#include "interfere/trial_data.hpp"

namespace interfere {

// ---------------------------------------------------------------------------
// Households

struct HouseholdWorld {
  // principal strata of the index case: infected under both arms, only
  // without vaccine, or under neither. No stratum is infected only when
  // vaccinated, so monotonicity holds by construction.
  double doomed = 0.0;
  double protected_ = 0.0;
  double immune = 1.0;
  double q_doomed_v = 0.0;     // P(Y2=1 | doomed, z1=1)
  double q_doomed_u = 0.0;     // P(Y2=1 | doomed, z1=0)
  double q_protected_u = 0.0;  // P(Y2=1 | protected, z1=0)
  double q2 = 0.0;             // P(Y2=1 | index uninfected); enters no estimand
};

/// Throws ValidationError for improper probabilities or an empty
/// doomed-or-protected event.
void validate(const HouseholdWorld& world);

/// The conservativeness premise: the secondary risk without vaccine is no
/// higher in the protected stratum than in the doomed one.
bool satisfies_assumption2(const HouseholdWorld& world);

struct HouseholdTruth {
  double p_v = 0.0;
  double p_u = 0.0;
  double p1 = 0.0;
  double p0 = 0.0;
  double attack1 = 0.0;
  double attack0 = 0.0;
  double pi_d = 0.0;
  double pi_p = 0.0;
  double theta = 0.0;
  double gamma = 0.0;
  std::optional<double> beta;  // absent when either risk sits on {0, 1}
};

HouseholdTruth true_household_quantities(const HouseholdWorld& world);

/// z1 ~ Bernoulli(1/2); household i uses the key (seed, i).
std::vector<HouseholdRecord> simulate_households(const HouseholdWorld& world, std::size_t n,
                                                 std::uint64_t seed);

// ---------------------------------------------------------------------------
// Two-stage trials

/// risk(z, k) = base + own z + spill k + inter z k, with k the number of
/// other group members treated.
struct OutcomeRule {
  double base = 0.0;
  double own = 0.0;
  double spill = 0.0;
  double inter = 0.0;

  double operator()(int z, std::int64_t k) const noexcept {
    return base + own * z + spill * static_cast<double>(k) + inter * z * static_cast<double>(k);
  }
};

enum class OutcomeScale {
  Binary,  // Y = 1{u_ij < clamp(risk)}, u_ij fixed by the world seed
  Real     // Y = a_ij + risk, a_ij ~ N(0, heterogeneity^2) fixed by the world seed
};

enum class Allocation { Mixed, Bernoulli };

std::string to_string(Allocation a);
Allocation parse_allocation(const std::string& name);

struct AllocationStrategy {
  std::string label;
  double coverage = 0.5;
};

/// Finite population of groups; potential outcomes depend on own treatment
/// and the number of others treated only.
struct TrialWorld {
  std::vector<std::int64_t> group_sizes;
  OutcomeRule rule;
  OutcomeScale scale = OutcomeScale::Binary;
  double heterogeneity = 0.0;
  std::uint64_t world_seed = 1;

  double potential_outcome(std::size_t group, std::int64_t member, int z, std::int64_t k_others) const;
};

/// Group sizes in [2, 10^4]; throws ValidationError.
void validate(const TrialWorld& world);

/// Effects in the control-minus-treated convention used by the estimators.
struct TrialEffects {
  double direct_psi = 0.0;
  double direct_phi = 0.0;
  double indirect = 0.0;  // (phi, psi)
  double total = 0.0;     // (phi, psi)
  double overall = 0.0;   // (phi, psi)
};

struct TrialTruth {
  TrialEffects mixed;      // round(coverage * n_i) treated in every group
  TrialEffects bernoulli;  // independent draws with probability = coverage
};

/// Exact population-average estimands, averaging group means with equal
/// weight. Mixed allocation needs 1 <= round(coverage n_i) <= n_i - 1.
TrialTruth true_trial_effects(const TrialWorld& world, const AllocationStrategy& psi,
                              const AllocationStrategy& phi);

/// Stage one assigns `groups_psi` randomly chosen groups to psi and the rest
/// to phi; stage two draws treatments within each group. Binary worlds only.
TrialTable simulate_trial(const TrialWorld& world, const AllocationStrategy& psi, const AllocationStrategy& phi,
                          std::size_t groups_psi, Allocation allocation, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Confounded clusters
//
//   Y = beta0 + beta_l l + beta_h h + z (psi_d0 + psi_d1 g) + psi_s g
//       + lambda_u U + lambda_v V + sigma e,
//
// g = number of other members treated, h = mean of the others' l, V = mean
// of the others' U. The outcome depends on the treatments only through the
// structural terms, so every world satisfies conditional ignorability given
// (L, U, V).

enum class ConfounderLaw {
  ShiftNormal,     // L ~ Bern(l_prob), Z ~ Bern(expit(a0 + a1 l)), U | Z ~ N(kappa Z, 1)
  ShiftBinary,     // as above with U | Z ~ Bern(u_prob0 or u_prob1)
  CovariateLinked  // U ~ N(0,1), L = rho U + sqrt(1-rho^2) e, Z ~ Bern(expit(a0 + a1 L))
};

std::string to_string(ConfounderLaw law);
ConfounderLaw parse_confounder_law(const std::string& name);

struct ClusterWorld {
  std::size_t cluster_size = 4;
  ConfounderLaw law = ConfounderLaw::ShiftNormal;
  double l_prob = 0.5;
  double a0 = 0.0;
  double a1 = 0.0;
  double kappa = 0.0;
  double u_prob0 = 0.5;
  double u_prob1 = 0.5;
  double rho = 0.0;
  double beta0 = 0.0;
  double beta_l = 0.0;
  double beta_h = 0.0;
  double psi_d0 = 0.0;
  double psi_d1 = 0.0;
  double psi_s = 0.0;
  double lambda_u = 0.0;
  double lambda_v = 0.0;
  double sigma = 1.0;
};

void validate(const ClusterWorld& world);

struct LedgerRow {
  std::string cluster_id;
  std::string individual_id;
  double u = 0.0;
  double v = 0.0;
};

struct SimulatedClusters {
  std::vector<ClusterData> data;  // observable: z, y, l
  std::vector<LedgerRow> ledger;  // hidden confounders
};

SimulatedClusters simulate_clusters(const ClusterWorld& world, std::size_t n_clusters, std::uint64_t seed);

/// Columns cluster_id, individual_id, u, v.
void write_ledger(std::ostream& out, std::span<const LedgerRow> ledger, DelimitedFormat format = {});

/// E[U | Z = z, L = l], by trapezoid integration over the conditional
/// density for normal laws and by summation for the binary law.
double conditional_u_mean(const ClusterWorld& world, int z, double l);

/// Selection-bias functions implied by the world, from conditional means of
/// the reference potential outcome.
double true_delta_d(const ClusterWorld& world, double z, double g, double l, double h);
double true_delta_s(const ClusterWorld& world, double g, double l, double h);

/// The same functions expressed as a linear family (lambda_d z, lambda_s g).
DeltaFamily true_delta_family(const ClusterWorld& world);

/// Structural (psi_d0, psi_d1) and (psi_s).
ModelParameters true_effect_parameters(const ClusterWorld& world);

/// Observed contrast minus causal contrast between two exposure pairs. The
/// world's confounders shift with z and g only, so the value is the same in
/// every covariate stratum.
double true_bias(const ClusterWorld& world, const ExposurePair& zg, const ExposurePair& zg_prime);

/// Finite-support general bias specification of a binary-U world for one
/// unit: support (u, v) with v on the grid k/(n-1), conditional laws from
/// the world, marginal law mixing over the unit's and the others' treatment
/// probabilities.
BiasSpecGeneral world_bias_spec(const ClusterWorld& world, double l, const std::vector<double>& others_l);

}  // namespace interfere
