#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "wcmdp/execution.hpp"
#include "wcmdp/lp_relax.hpp"
#include "wcmdp/model.hpp"
#include "wcmdp/policies.hpp"
#include "wcmdp/reassign.hpp"

namespace wcmdp {

enum class PolicyKind { ID, ERC };

std::string to_string(PolicyKind policy);
PolicyKind parse_policy(const std::string& name);  // "id" / "erc", throws ConfigError

enum class InitialStateKind { UniformRandom, AllZero, Explicit };

struct InitialState {
  InitialStateKind kind = InitialStateKind::UniformRandom;
  std::vector<StateIndex> states;  // Explicit only
};

std::string to_string(InitialStateKind kind);

struct SimConfig {
  long horizon = 20000;
  int replications = 4;
  long batch_size = 4000;
  std::uint64_t seed = 0;
  PolicyKind policy = PolicyKind::ID;
  InitialState initial;
  bool record_trace = false;
  /// Recompute every step's costs in arm order and count budget overruns.
  bool audit_costs = true;
  Exec exec = Exec::Parallel;
};

/// Everything a policy needs at run time, derived once per instance.
struct PolicyBundle {
  LpSolution solution;
  OptimalPolicies policies;
  ReassignmentResult reassignment;
  PolicyTables tables;
};

/// Solves the relaxation, extracts the single-armed policies and computes the
/// ID reassignment with the given seed. Throws SolverError when the solver
/// does not certify optimality.
PolicyBundle make_bundle(const WcmdpInstance& instance, std::uint64_t reassign_seed,
                         const IpmOptions& options = {});

struct TracePoint {
  int replication = 0;
  long t = 0;
  double reward_per_arm = 0.0;
  int conforming_count = 0;
};

struct SimResult {
  double avg_reward_per_arm = 0.0;
  double optimality_ratio = 0.0;
  double ci_halfwidth = 0.0;  // NaN with fewer than two batches in total
  std::vector<double> per_batch_means;
  std::vector<double> replication_means;
  long feasibility_violations = 0;
  double mean_conforming_fraction = 0.0;
  double runtime_seconds = 0.0;
  InitialStateKind initial_state = InitialStateKind::UniformRandom;
  std::vector<TracePoint> trace;
};

/// (mean, 1.96 * sample std / sqrt(count)); throws std::invalid_argument
/// with fewer than two batches.
std::pair<double, double> batch_means_ci(const std::vector<double>& batch_means);

/// Runs config.replications independent trajectories, each on the stream
/// derive_seed(config.seed, r). Results do not depend on config.exec.
SimResult simulate(const WcmdpInstance& instance, const PolicyBundle& bundle,
                   const SimConfig& config);

struct SweepRow {
  std::string family;
  std::uint64_t seed = 0;
  int N = 0;
  std::string policy;
  long T = 0;
  int reps = 0;
  double R_rel = 0.0;
  double avg_reward = 0.0;
  double ratio = 0.0;
  double ci_halfwidth = 0.0;
  double gap = 0.0;
  double gap_sqrtN = 0.0;
  double conforming_frac = 0.0;
  long violations = 0;
};

std::string family_name(Family family);

/// For each N: generate from the template (template seed), solve once, then
/// simulate every requested policy. Points run one after another; each
/// simulation parallelizes over replications.
std::vector<SweepRow> sweep(const GeneratorConfig& family_template, const std::vector<int>& n_values,
                            const std::vector<PolicyKind>& policies, const SimConfig& config);

extern const char* const kSweepCsvHeader;
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace wcmdp
