#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "wcmdp/execution.hpp"
#include "wcmdp/model.hpp"

namespace wcmdp {

// ---------------------------------------------------------------------------
// LP description

enum class RowKind { Budget, Balance, Normalization };
enum class RowSense { LessEqual, Equal };

struct LpRow {
  RowKind kind;
  int arm = -1;    // owning arm (-1 for budget rows)
  int index = 0;   // k for budget rows, s for balance rows
  RowSense sense = RowSense::Equal;
  double rhs = 0.0;
  std::vector<std::pair<int, double>> coeffs;  // (variable, coefficient)
};

/// Sparse LP "maximize objective.y subject to rows, y >= 0" over the
/// state-action frequencies y_i(s,a). Variable index i*S*A + s*A + a.
/// Rows are ordered: K budget rows, N*S balance rows, N normalization rows.
struct SparseLp {
  int num_arms = 0;
  int num_states = 0;
  int num_actions = 0;
  int num_constraints = 0;
  std::vector<double> objective;
  std::vector<LpRow> rows;

  int num_variables() const { return static_cast<int>(objective.size()); }
  int variable(int arm, int s, int a) const {
    return (arm * num_states + s) * num_actions + a;
  }
};

SparseLp build_lp(const WcmdpInstance& instance);

// ---------------------------------------------------------------------------
// Solution

enum class SolverStatus { Optimal, IterationLimit };

std::string to_string(SolverStatus status);

struct LpSolution {
  int num_arms = 0;
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> y;       // [i][s][a], clamped to >= 0
  double objective = 0.0;      // R^rel_N
  SolverStatus status = SolverStatus::Optimal;
  std::vector<double> duals;   // multipliers of the K budget rows (>= 0)
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double relative_gap = 0.0;

  double at(int arm, int s, int a) const {
    return y[(static_cast<std::size_t>(arm) * num_states + s) * num_actions + a];
  }
  double& at(int arm, int s, int a) {
    return y[(static_cast<std::size_t>(arm) * num_states + s) * num_actions + a];
  }
};

class SolverError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IpmOptions {
  int max_iterations = 200;
  double feasibility_tol = 1e-11;  // relative primal / dual residual
  double gap_tol = 1e-11;          // relative duality gap
  // Accepted as optimal when the targets above cannot be reached because of
  // round-off in the final iterations.
  double acceptable_tol = 1e-9;
  Exec exec = Exec::Parallel;
};

/// Solves the relaxation with a primal-dual interior point method that
/// eliminates the per-arm blocks and works on the K x K Schur complement of
/// the coupling rows. Throws SolverError on infeasibility or breakdown;
/// reports IterationLimit in the status when tolerances are not met.
LpSolution solve_lp(const SparseLp& lp, const IpmOptions& options = {});

/// build_lp + solve_lp.
LpSolution solve_relaxation(const WcmdpInstance& instance, const IpmOptions& options = {});

struct SolutionAudit {
  double budget_violation = 0.0;         // max_k ((1/N) sum c y - alpha_k)^+
  double balance_residual = 0.0;         // max_{i,s} |inflow - outflow|
  double normalization_residual = 0.0;   // max_i |sum y_i - 1|
  double min_entry = 0.0;                // min y
  double objective_error = 0.0;          // |recomputed objective - stored|
  bool ok = false;
};

/// Re-evaluates every constraint residual from the raw instance tables.
SolutionAudit check_solution(const WcmdpInstance& instance, const LpSolution& solution,
                             double tol);

void write_solution_json(std::ostream& out, const LpSolution& solution);
LpSolution read_solution_json(std::istream& in, const WcmdpInstance& instance);

// ---------------------------------------------------------------------------
// Optimal single-armed policies

/// Marginals at or below this value use the uniform action distribution.
inline constexpr double kZeroMarginal = 1e-12;

/// pi-bar*_i and the quantities of its induced chain for one arm.
struct SingleArmPolicy {
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> pi;          // [s][a]
  std::vector<double> induced_P;   // [s][s']
  std::vector<double> mu_star;     // [s]
  std::vector<double> C_star;      // [k]
  std::vector<double> r_star;      // [s]
  std::vector<double> c_star;      // [k][s]

  double action_prob(int s, int a) const { return pi[s * num_actions + a]; }
  double P(int s, int next) const { return induced_P[s * num_states + next]; }
  const double* c_star_row(int k) const { return c_star.data() + k * num_states; }
};

struct OptimalPolicies {
  std::vector<SingleArmPolicy> arms;

  int num_arms() const { return static_cast<int>(arms.size()); }
  /// sum_i C*_{k,i}
  double total_cost(int k) const;
};

OptimalPolicies extract_policy(const WcmdpInstance& instance, const LpSolution& solution);

}  // namespace wcmdp
