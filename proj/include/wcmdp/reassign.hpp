#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "wcmdp/lp_relax.hpp"
#include "wcmdp/model.hpp"

namespace wcmdp {

struct ReassignmentResult {
  std::vector<int> new_id;      // new_id[old] = new
  std::vector<int> order;       // order[new] = old (inverse of new_id)
  std::vector<int> active_set;  // ascending constraint indices
  double c_thr = 0.0;           // alpha_min / 4
  int group_size = 1;           // B
  int num_groups = 0;           // floor(N / B)
  double eta_c = 0.0;           // min(alpha_min / 3, c_thr / B)
  double M_c = 0.0;             // 2 c_thr
  std::uint64_t rng_seed = 0;
  /// Set when some high-cost pool ran dry before every group was served;
  /// the remaining arms were then placed at random.
  bool fallback = false;

  int num_arms() const { return static_cast<int>(new_id.size()); }
  bool is_active(int k) const;
};

/// Constraints k with sum_i C*_{k,i} >= alpha_k N / 2.
std::vector<int> active_constraints(const WcmdpInstance& instance, const OptimalPolicies& policies);

/// Group size B = ceil((c_max - c_thr) K / (alpha_min / 2 - c_thr)), at least 1.
int reassign_group_size(const WcmdpInstance& instance);

/// Builds the ID permutation: each full group of B consecutive new IDs is
/// seeded with arms whose expected type-k cost is at least c_thr for every
/// active k; the rest fill the free IDs in seeded random order.
ReassignmentResult reassign(const WcmdpInstance& instance, const OptimalPolicies& policies,
                            std::uint64_t seed);

/// Identity ordering with the constants filled in (used when reassignment is
/// disabled and by tests).
ReassignmentResult identity_reassignment(const WcmdpInstance& instance,
                                         const OptimalPolicies& policies);

/// beta_k over prefixes of the reassigned order, O(1) per query.
class RemainingBudget {
 public:
  RemainingBudget(const WcmdpInstance& instance, const OptimalPolicies& policies,
                  const ReassignmentResult& reassignment);

  int num_arms() const { return num_arms_; }
  int num_constraints() const { return num_constraints_; }
  /// beta_k([n]) for 0 <= n <= N; throws std::out_of_range otherwise.
  double operator()(int n, int k) const;
  double min_over_constraints(int n) const;

 private:
  int num_arms_ = 0;
  int num_constraints_ = 0;
  std::vector<double> values_;  // [n][k]
};

double remaining_budget(const WcmdpInstance& instance, const OptimalPolicies& policies,
                        const ReassignmentResult& reassignment, int n, int k);

struct SlopeReport {
  bool holds = true;
  int worst_n1 = 0;
  int worst_n2 = 0;
  int worst_k = -1;
  /// min over (n1, n2, k) of beta_k(n1) - beta_k(n2) - eta_c (n2 - n1) + M_c
  double margin = 0.0;
};

/// Checks beta_k([n1]) - beta_k([n2]) >= eta_c (n2 - n1) - M_c for all
/// 1 <= n1 <= n2 <= N and all k.
SlopeReport verify_slope(const WcmdpInstance& instance, const OptimalPolicies& policies,
                         const ReassignmentResult& reassignment);

/// JSON integer array of new_id.
void write_permutation_json(std::ostream& out, const ReassignmentResult& reassignment);

}  // namespace wcmdp
