#include "wcmdp/policies.hpp"

#include <algorithm>
#include <numeric>

namespace wcmdp {

std::vector<double> make_cdf(std::span<const double> probs) {
  std::vector<double> cdf(probs.size());
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    acc += probs[j];
    cdf[j] = acc;
    if (probs[j] > 0.0) last_positive = j;
  }
  for (std::size_t j = last_positive; j < cdf.size(); ++j) cdf[j] = 1.0;
  return cdf;
}

PolicyTables::PolicyTables(const WcmdpInstance& inst, const OptimalPolicies& pol)
    : N_(inst.num_arms()),
      S_(inst.num_states()),
      A_(inst.num_actions()),
      K_(inst.num_constraints) {
  action_cdf_.resize(static_cast<std::size_t>(N_) * S_ * A_);
  next_cdf_.resize(static_cast<std::size_t>(N_) * S_ * A_ * S_);
  index_.resize(static_cast<std::size_t>(N_) * S_);
  for (int i = 0; i < N_; ++i) {
    const ArmModel& arm = inst.arms[i];
    const SingleArmPolicy& p = pol.arms[i];
    for (int s = 0; s < S_; ++s) {
      const auto a_cdf = make_cdf({p.pi.data() + static_cast<std::size_t>(s) * A_,
                                   static_cast<std::size_t>(A_)});
      std::copy(a_cdf.begin(), a_cdf.end(),
                action_cdf_.begin() + (static_cast<std::size_t>(i) * S_ + s) * A_);
      for (int a = 0; a < A_; ++a) {
        const auto s_cdf = make_cdf({arm.P_row(s, a), static_cast<std::size_t>(S_)});
        std::copy(s_cdf.begin(), s_cdf.end(),
                  next_cdf_.begin() + ((static_cast<std::size_t>(i) * S_ + s) * A_ + a) * S_);
      }
      index_[static_cast<std::size_t>(i) * S_ + s] = p.r_star[s];
    }
  }
}

namespace {

void reset(StepOutcome& out, int N, int K) {
  out.actions.assign(N, 0);
  out.ideal_actions.resize(N);
  out.step_costs.assign(K, 0.0);
  out.step_reward = 0.0;
  out.conforming_count = 0;
}

}  // namespace

void id_policy_apply(const WcmdpInstance& inst, const std::vector<int>& order,
                     const SystemState& state, std::span<const ActionIndex> ideal,
                     StepOutcome& out) {
  const int N = inst.num_arms();
  const int K = inst.num_constraints;
  reset(out, N, K);
  if (ideal.data() != out.ideal_actions.data()) {
    std::copy(ideal.begin(), ideal.end(), out.ideal_actions.begin());
  }

  int stop = N;
  for (int j = 0; j < N && stop == N; ++j) {
    const int i = order[j];
    const ArmModel& arm = inst.arms[i];
    const int s = state.states[i];
    const int a = ideal[i];
    for (int k = 0; k < K; ++k) {
      if (out.step_costs[k] + arm.c(k, s, a) > inst.budget(k)) {
        stop = j;
        break;
      }
    }
    if (stop != N) break;
    for (int k = 0; k < K; ++k) out.step_costs[k] += arm.c(k, s, a);
    out.actions[i] = a;
  }
  out.conforming_count = stop;
  for (int j = 0; j < N; ++j) {
    const int i = order[j];
    out.step_reward += inst.arms[i].r(state.states[i], out.actions[i]);
  }
}

void id_policy_step(const WcmdpInstance& inst, const PolicyTables& tables,
                    const ReassignmentResult& re, const SystemState& state, Rng& rng,
                    StepOutcome& out) {
  const int N = inst.num_arms();
  out.ideal_actions.resize(N);
  for (int j = 0; j < N; ++j) {
    const int i = re.order[j];
    out.ideal_actions[i] =
        static_cast<ActionIndex>(rng.sample_cdf(tables.action_cdf(i, state.states[i])));
  }
  id_policy_apply(inst, re.order, state, out.ideal_actions, out);
}

StepOutcome id_policy_step(const WcmdpInstance& inst, const PolicyTables& tables,
                           const ReassignmentResult& re, const SystemState& state, Rng& rng) {
  StepOutcome out;
  id_policy_step(inst, tables, re, state, rng, out);
  return out;
}

void erc_policy_step(const WcmdpInstance& inst, const PolicyTables& tables,
                     const SystemState& state, Rng& rng, StepOutcome& out) {
  const int N = inst.num_arms();
  const int K = inst.num_constraints;
  reset(out, N, K);
  for (int i = 0; i < N; ++i) {
    out.ideal_actions[i] =
        static_cast<ActionIndex>(rng.sample_cdf(tables.action_cdf(i, state.states[i])));
  }
  std::vector<int> visit(N);
  std::iota(visit.begin(), visit.end(), 0);
  std::sort(visit.begin(), visit.end(), [&](int x, int y) {
    const double ix = tables.index(x, state.states[x]);
    const double iy = tables.index(y, state.states[y]);
    return ix != iy ? ix > iy : x < y;
  });
  for (int i : visit) {
    const ArmModel& arm = inst.arms[i];
    const int s = state.states[i];
    const int a = out.ideal_actions[i];
    bool fits = true;
    for (int k = 0; k < K && fits; ++k) {
      fits = out.step_costs[k] + arm.c(k, s, a) <= inst.budget(k);
    }
    if (!fits) continue;
    for (int k = 0; k < K; ++k) out.step_costs[k] += arm.c(k, s, a);
    out.actions[i] = a;
    ++out.conforming_count;
  }
  for (int i = 0; i < N; ++i) out.step_reward += inst.arms[i].r(state.states[i], out.actions[i]);
}

StepOutcome erc_policy_step(const WcmdpInstance& inst, const PolicyTables& tables,
                            const SystemState& state, Rng& rng) {
  StepOutcome out;
  erc_policy_step(inst, tables, state, rng, out);
  return out;
}

void advance_state(const PolicyTables& tables, const std::vector<int>& order,
                   std::span<const ActionIndex> actions, SystemState& state, Rng& rng) {
  for (int i : order) {
    int& s = state.states[i];
    s = static_cast<StateIndex>(rng.sample_cdf(tables.next_cdf(i, s, actions[i])));
  }
}

int count_budget_violations(const WcmdpInstance& inst, const SystemState& state,
                            std::span<const ActionIndex> actions, double slack) {
  int violations = 0;
  for (int k = 0; k < inst.num_constraints; ++k) {
    double total = 0.0;
    for (int i = 0; i < inst.num_arms(); ++i) {
      total += inst.arms[i].c(k, state.states[i], actions[i]);
    }
    if (total > inst.budget(k) + slack) ++violations;
  }
  return violations;
}

}  // namespace wcmdp
