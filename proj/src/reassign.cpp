#include "wcmdp/reassign.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "wcmdp/rng.hpp"

namespace wcmdp {

bool ReassignmentResult::is_active(int k) const {
  return std::binary_search(active_set.begin(), active_set.end(), k);
}

std::vector<int> active_constraints(const WcmdpInstance& inst, const OptimalPolicies& pol) {
  std::vector<int> active;
  const double n = static_cast<double>(inst.num_arms());
  for (int k = 0; k < inst.num_constraints; ++k) {
    if (pol.total_cost(k) >= inst.alpha[k] * n / 2.0) active.push_back(k);
  }
  return active;
}

int reassign_group_size(const WcmdpInstance& inst) {
  const double c_thr = inst.alpha_min() / 4.0;
  const double raw =
      std::ceil((inst.c_max - c_thr) * inst.num_constraints / (inst.alpha_min() / 2.0 - c_thr));
  return raw < 1.0 ? 1 : static_cast<int>(raw);
}

namespace {

ReassignmentResult constants_only(const WcmdpInstance& inst, const OptimalPolicies& pol) {
  ReassignmentResult res;
  const int N = inst.num_arms();
  res.active_set = active_constraints(inst, pol);
  res.c_thr = inst.alpha_min() / 4.0;
  res.group_size = reassign_group_size(inst);
  res.num_groups = N / res.group_size;
  res.eta_c = std::min(inst.alpha_min() / 3.0, res.c_thr / res.group_size);
  res.M_c = 2.0 * res.c_thr;
  res.new_id.assign(N, -1);
  return res;
}

void fill_order(ReassignmentResult& res) {
  res.order.assign(res.new_id.size(), -1);
  for (std::size_t i = 0; i < res.new_id.size(); ++i) res.order[res.new_id[i]] = static_cast<int>(i);
}

}  // namespace

ReassignmentResult identity_reassignment(const WcmdpInstance& inst, const OptimalPolicies& pol) {
  ReassignmentResult res = constants_only(inst, pol);
  std::iota(res.new_id.begin(), res.new_id.end(), 0);
  fill_order(res);
  return res;
}

ReassignmentResult reassign(const WcmdpInstance& inst, const OptimalPolicies& pol,
                            std::uint64_t seed) {
  ReassignmentResult res = constants_only(inst, pol);
  res.rng_seed = seed;
  const int N = inst.num_arms();
  if (res.active_set.empty()) {
    std::iota(res.new_id.begin(), res.new_id.end(), 0);
    fill_order(res);
    return res;
  }

  const int B = res.group_size;
  std::vector<char> placed(N, 0);
  // Candidate pools D_k, scanned in ascending old ID.
  std::vector<int> cursor(inst.num_constraints, 0);
  auto next_candidate = [&](int k) {
    int& i = cursor[k];
    while (i < N && (placed[i] || pol.arms[i].C_star[k] < res.c_thr)) ++i;
    return i < N ? i : -1;
  };

  for (int g = 0; g < res.num_groups && !res.fallback; ++g) {
    const int begin = g * B;
    const int end = begin + B;
    int next_slot = begin;
    std::vector<int> members;
    for (int k : res.active_set) {
      double sum = 0.0;
      for (int i : members) sum += pol.arms[i].C_star[k];
      if (sum >= res.c_thr) continue;
      if (next_slot == end) break;
      const int i = next_candidate(k);
      if (i < 0) {
        res.fallback = true;
        break;
      }
      placed[i] = 1;
      res.new_id[i] = next_slot++;
      members.push_back(i);
    }
  }

  std::vector<char> used(N, 0);
  for (int i = 0; i < N; ++i) {
    if (res.new_id[i] >= 0) used[res.new_id[i]] = 1;
  }
  std::vector<int> free_slots;
  for (int j = 0; j < N; ++j) {
    if (!used[j]) free_slots.push_back(j);
  }
  Rng rng(seed);
  for (std::size_t j = free_slots.size(); j > 1; --j) {
    std::swap(free_slots[j - 1], free_slots[rng.index(j)]);
  }
  std::size_t next = 0;
  for (int i = 0; i < N; ++i) {
    if (res.new_id[i] < 0) res.new_id[i] = free_slots[next++];
  }
  fill_order(res);
  return res;
}

RemainingBudget::RemainingBudget(const WcmdpInstance& inst, const OptimalPolicies& pol,
                                 const ReassignmentResult& re)
    : num_arms_(inst.num_arms()), num_constraints_(inst.num_constraints) {
  const int N = num_arms_;
  const int K = num_constraints_;
  values_.assign(static_cast<std::size_t>(N + 1) * K, 0.0);
  for (int k = 0; k < K; ++k) {
    const bool active = re.is_active(k);
    const double budget = inst.budget(k);
    double prefix = 0.0;
    for (int n = 0; n <= N; ++n) {
      if (n > 0) prefix += pol.arms[re.order[n - 1]].C_star[k];
      double beta = budget - prefix;
      if (!active) beta -= inst.alpha[k] / 3.0 * n;
      values_[static_cast<std::size_t>(n) * K + k] = beta;
    }
  }
}

double RemainingBudget::operator()(int n, int k) const {
  if (n < 0 || n > num_arms_ || k < 0 || k >= num_constraints_) {
    throw std::out_of_range("remaining budget index out of range");
  }
  return values_[static_cast<std::size_t>(n) * num_constraints_ + k];
}

double RemainingBudget::min_over_constraints(int n) const {
  double m = INFINITY;
  for (int k = 0; k < num_constraints_; ++k) m = std::min(m, (*this)(n, k));
  return m;
}

double remaining_budget(const WcmdpInstance& inst, const OptimalPolicies& pol,
                        const ReassignmentResult& re, int n, int k) {
  return RemainingBudget(inst, pol, re)(n, k);
}

SlopeReport verify_slope(const WcmdpInstance& inst, const OptimalPolicies& pol,
                         const ReassignmentResult& re) {
  const RemainingBudget beta(inst, pol, re);
  const int N = inst.num_arms();
  SlopeReport rep;
  rep.margin = INFINITY;
  // slack(n1, n2) = f(n1) - f(n2) + M_c with f(n) = beta(n) + eta_c n, so a
  // running minimum of f over n1 <= n2 covers every pair.
  for (int k = 0; k < inst.num_constraints; ++k) {
    double best_f = INFINITY;
    int best_n1 = 0;
    for (int n2 = 1; n2 <= N; ++n2) {
      const double f2 = beta(n2, k) + re.eta_c * n2;
      if (f2 < best_f) {
        best_f = f2;
        best_n1 = n2;
      }
      const double slack = best_f - f2 + re.M_c;
      if (slack < rep.margin) {
        rep.margin = slack;
        rep.worst_n1 = best_n1;
        rep.worst_n2 = n2;
        rep.worst_k = k;
      }
    }
  }
  rep.holds = rep.margin >= -1e-12;
  return rep;
}

void write_permutation_json(std::ostream& out, const ReassignmentResult& re) {
  out << '[';
  for (std::size_t i = 0; i < re.new_id.size(); ++i) {
    if (i) out << ',';
    out << re.new_id[i];
  }
  out << "]\n";
}

}  // namespace wcmdp
