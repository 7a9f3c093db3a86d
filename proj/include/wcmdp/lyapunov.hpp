#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "wcmdp/execution.hpp"
#include "wcmdp/lp_relax.hpp"
#include "wcmdp/model.hpp"
#include "wcmdp/reassign.hpp"

namespace wcmdp {

struct PolicyBundle;

class AssumptionError : public std::runtime_error {
 public:
  AssumptionError(const std::string& what, int arm) : std::runtime_error(what), arm_(arm) {}
  int arm() const { return arm_; }

 private:
  int arm_;
};

inline constexpr int kDefaultMixingCap = 10000;

/// Least t >= 1 such that every row of P^t is within l1 distance 1/e of mu;
/// std::nullopt (unbounded) if not reached by t_cap. P is S x S row-major.
/// Throws std::invalid_argument unless ||mu P - mu||_1 <= 1e-8.
std::optional<int> mixing_time(std::span<const double> P, std::span<const double> mu,
                               int t_cap = kDefaultMixingCap);

struct ChainStructure {
  bool unichain = false;   // exactly one closed communicating class
  bool aperiodic = false;  // every closed class has period 1
  int closed_classes = 0;
  int period = 0;          // period of the first closed class
};

/// Support-graph analysis of a row-stochastic S x S matrix.
ChainStructure chain_structure(std::span<const double> P, int num_states);

std::vector<ChainStructure> check_assumption(const OptimalPolicies& policies);

double gamma_from_tau(double tau);        // exp(-1 / (2 tau))
double c_tau_from_tau(double tau);        // 4e / (1 - 1/sqrt(e)) * tau

struct ChainDiagnostics {
  std::vector<std::optional<int>> tau;
  std::vector<char> unichain;
  std::vector<char> aperiodic;
  int tau_max = 0;
  double gamma = 0.0;
  double C_tau = 0.0;
  double L_h = 0.0;
  double C_h = 0.0;
  int num_constraints = 0;

  /// Index of the first arm with an unbounded mixing time, or -1.
  int first_failing_arm() const;
  bool assumption_holds() const { return first_failing_arm() < 0; }
  /// Throws AssumptionError naming the first failing arm.
  void require() const;
};

/// Mixing times, chain structure and the derived constants. When some arm
/// fails the mixing check the constants are left NaN.
ChainDiagnostics compute_diagnostics(const WcmdpInstance& instance,
                                     const OptimalPolicies& policies,
                                     int t_cap = kDefaultMixingCap, Exec exec = Exec::Parallel);

/// Row-distribution matrix x (N x S, row-major); one-hot rows represent a
/// system state.
struct DistributionState {
  int num_arms = 0;
  int num_states = 0;
  std::vector<double> rows;

  static DistributionState from_state(const SystemState& state, int num_states);
  std::span<const double> row(int arm) const {
    return {rows.data() + static_cast<std::size_t>(arm) * num_states,
            static_cast<std::size_t>(num_states)};
  }
};

struct HOptions {
  double tol = 1e-9;          // bound on |computed - true supremum|
  int min_horizon = 0;        // evaluate at least this many look-ahead steps
  int max_iterations = 1000000;
  Exec exec = Exec::Parallel;
};

struct HValue {
  double value = 0.0;
  int horizon = 0;            // largest look-ahead used by any arm
  double tail_bound = 0.0;    // certified bound on the neglected terms
};

/// sup over l >= 0 and g in {c*_1, ..., c*_K, r*} of
/// |sum_{i in D} <(x_i - mu*_i) (P_i - Xi_i)^l, g_i>| / gamma^l.
HValue subset_h(const DistributionState& x, std::span<const int> subset,
                const OptimalPolicies& policies, const ChainDiagnostics& diag,
                const HOptions& options = {});

/// h over every prefix of `order`: result[n] = h(x, {order[0..n-1]}), n = 0..N.
/// One pass over the arms; the per-arm series are shared between prefixes.
std::vector<double> prefix_h(const DistributionState& x, const std::vector<int>& order,
                             const OptimalPolicies& policies, const ChainDiagnostics& diag,
                             const HOptions& options = {});

/// Same quantity by evaluating subset_h separately for each prefix.
std::vector<double> prefix_h_reference(const DistributionState& x, const std::vector<int>& order,
                                       const OptimalPolicies& policies,
                                       const ChainDiagnostics& diag, const HOptions& options = {});

struct LyapunovReport {
  std::vector<double> h_prefix;  // [n], n = 0..N
  std::vector<double> h_id;      // running maximum of h_prefix
  int focus_n = 0;               // N m(x)
  double focus_m = 0.0;
  double V = 0.0;                // h_id[focus_n] + L_h (N - focus_n)
};

/// Largest n with h_id[n] <= min_k beta_k([n]).
int focus_size(const std::vector<double>& h_id, const RemainingBudget& budget);

LyapunovReport lyapunov_report(const DistributionState& x, const OptimalPolicies& policies,
                               const ReassignmentResult& reassignment,
                               const RemainingBudget& budget, const ChainDiagnostics& diag,
                               const HOptions& options = {});

struct DriftStats {
  int samples = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
  double max = 0.0;
  double bound = 0.0;  // C_h sqrt(N)
};

struct DriftOptions {
  int burn_in = 200;   // ID steps before the first snapshot
  int spacing = 5;     // ID steps between snapshots
  HOptions h;
};

/// Samples X_t from an ID trajectory, moves the arms in D one step on their
/// single-armed policies and reports (h(X_{t+1}, D) - gamma h(X_t, D))^+.
DriftStats drift_probe(const WcmdpInstance& instance, const PolicyBundle& bundle,
                       const ChainDiagnostics& diag, const std::vector<int>& subset,
                       int num_samples, std::uint64_t seed, const DriftOptions& options = {});

/// Same statistic for explicit pre-transition distributions, each moved one
/// step with its own stream derive_seed(seed, j).
DriftStats drift_from_states(const OptimalPolicies& policies, const ChainDiagnostics& diag,
                             const std::vector<SystemState>& states,
                             const std::vector<int>& subset, std::uint64_t seed,
                             const HOptions& options = {});

struct ConformityStudy {
  int N = 0;
  int steps = 0;
  double K_conf = 0.0;   // (2 K c_max + M_c) / eta_c
  double K_mono = 0.0;   // ((2 + K_conf) C_h + M_c) / eta_c
  double K_cov = 0.0;    // (eta_c + M_c + L_h) / eta_c
  double conformity_mean = 0.0;  // mean of (N m(X_t) - N*_t)^+ / N
  double conformity_stderr = 0.0;
  double shrink_mean = 0.0;      // mean of (m(X_t) - m(X_{t+1}))^+
  double shrink_stderr = 0.0;
  int coverage_violations = 0;   // states breaking 1 - m <= h_ID/(eta_c N) + K_cov/N
  double mean_focus_m = 0.0;
};

/// Follows one ID trajectory and evaluates the conformity, non-shrinking and
/// coverage statistics at every step after burn_in.
ConformityStudy conformity_study(const WcmdpInstance& instance, const PolicyBundle& bundle,
                                 const ChainDiagnostics& diag, int steps, std::uint64_t seed,
                                 int burn_in = 200, const HOptions& options = {});

/// {"tau", "gamma", "C_tau", "L_h", "C_h", "unichain", "aperiodic", "probes"}.
void write_diagnostics_json(std::ostream& out, const ChainDiagnostics& diag,
                            const std::vector<DriftStats>& probes);

}  // namespace wcmdp
