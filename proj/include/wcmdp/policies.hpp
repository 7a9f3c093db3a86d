#pragma once

#include <span>
#include <vector>

#include "wcmdp/lp_relax.hpp"
#include "wcmdp/model.hpp"
#include "wcmdp/reassign.hpp"
#include "wcmdp/rng.hpp"

namespace wcmdp {

/// One decision epoch. Per-arm vectors are indexed by the original arm index.
struct StepOutcome {
  std::vector<ActionIndex> actions;
  std::vector<ActionIndex> ideal_actions;
  int conforming_count = 0;        // N*_t for ID; arms that played their ideal action for ERC
  double step_reward = 0.0;        // sum_i r_i(S_i, A_i)
  std::vector<double> step_costs;  // [k] sum_i c_{k,i}(S_i, A_i)
};

/// Sampling tables derived once per (instance, policies) pair.
class PolicyTables {
 public:
  PolicyTables(const WcmdpInstance& instance, const OptimalPolicies& policies);

  int num_arms() const { return N_; }
  int num_states() const { return S_; }
  int num_actions() const { return A_; }
  int num_constraints() const { return K_; }

  std::span<const double> action_cdf(int arm, int s) const {
    return {action_cdf_.data() + (static_cast<std::size_t>(arm) * S_ + s) * A_,
            static_cast<std::size_t>(A_)};
  }
  std::span<const double> next_cdf(int arm, int s, int a) const {
    return {next_cdf_.data() + ((static_cast<std::size_t>(arm) * S_ + s) * A_ + a) * S_,
            static_cast<std::size_t>(S_)};
  }
  /// Expected one-step reward under the single-armed policy (ERC index).
  double index(int arm, int s) const { return index_[static_cast<std::size_t>(arm) * S_ + s]; }

 private:
  int N_ = 0, S_ = 0, A_ = 0, K_ = 0;
  std::vector<double> action_cdf_;
  std::vector<double> next_cdf_;
  std::vector<double> index_;
};

/// Cumulative table for a probability vector. Entries from the last
/// positive-probability outcome onward are exactly 1, so inverse-CDF
/// sampling never returns a zero-probability outcome.
std::vector<double> make_cdf(std::span<const double> probs);

/// ID policy: ideal actions are sampled for arms in reassigned-ID order; the
/// longest prefix whose ideal actions fit every budget plays them and every
/// later arm plays action 0.
void id_policy_step(const WcmdpInstance& instance, const PolicyTables& tables,
                    const ReassignmentResult& reassignment, const SystemState& state, Rng& rng,
                    StepOutcome& out);
StepOutcome id_policy_step(const WcmdpInstance& instance, const PolicyTables& tables,
                           const ReassignmentResult& reassignment, const SystemState& state,
                           Rng& rng);

/// Same rule driven by explicit ideal actions (indexed by original arm).
void id_policy_apply(const WcmdpInstance& instance, const std::vector<int>& order,
                     const SystemState& state, std::span<const ActionIndex> ideal,
                     StepOutcome& out);

/// ERC baseline: ideal actions are sampled in arm order, then arms are
/// visited by decreasing expected-reward index (ties by arm index) and each
/// keeps its ideal action when it still fits every budget.
void erc_policy_step(const WcmdpInstance& instance, const PolicyTables& tables,
                     const SystemState& state, Rng& rng, StepOutcome& out);
StepOutcome erc_policy_step(const WcmdpInstance& instance, const PolicyTables& tables,
                            const SystemState& state, Rng& rng);

/// Samples S_{t+1} for every arm, visiting arms in the given order.
void advance_state(const PolicyTables& tables, const std::vector<int>& order,
                   std::span<const ActionIndex> actions, SystemState& state, Rng& rng);

/// Recomputes sum_i c_{k,i}(S_i, A_i) in arm order and counts constraints
/// exceeding alpha_k N by more than the float slack.
int count_budget_violations(const WcmdpInstance& instance, const SystemState& state,
                            std::span<const ActionIndex> actions, double slack = 1e-9);

}  // namespace wcmdp
