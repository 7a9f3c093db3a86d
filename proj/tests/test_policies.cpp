#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "wcmdp/exact_oracle.hpp"
#include "wcmdp/policies.hpp"

using namespace wcmdp;

namespace {

// Single-state arms with an idle action and one active action.
WcmdpInstance one_state_arms(const std::vector<double>& cost, const std::vector<double>& reward,
                             double alpha) {
  std::vector<ArmModel> arms;
  for (std::size_t i = 0; i < cost.size(); ++i) {
    arms.push_back(oracle::make_arm(1, 2, 1, {1.0, 1.0}, {0.0, reward[i]}, {0.0, cost[i]}));
  }
  return make_instance(std::move(arms), {alpha});
}

// Relaxation-shaped solution that plays the active action with the given probability.
LpSolution solution_with(int N, const std::vector<double>& active_prob) {
  LpSolution sol;
  sol.num_arms = N;
  sol.num_states = 1;
  sol.num_actions = 2;
  for (int i = 0; i < N; ++i) {
    sol.y.push_back(1.0 - active_prob[i]);
    sol.y.push_back(active_prob[i]);
  }
  sol.duals = {0.0};
  return sol;
}

std::vector<int> identity_order(int N) {
  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  return order;
}

WcmdpInstance small_instance(std::uint64_t seed, int N, int S, int A, int K) {
  GeneratorConfig cfg;
  cfg.seed = seed;
  cfg.num_arms = N;
  cfg.num_states = S;
  cfg.num_actions = A;
  cfg.num_constraints = K;
  return generate(cfg);
}

}  // namespace

TEST_CASE("make_cdf pins the tail to exactly one") {
  const std::vector<double> p{0.2, 0.3, 0.5, 0.0};
  const auto cdf = make_cdf(p);
  CHECK(cdf[0] == 0.2);
  CHECK(cdf[1] == 0.5);
  CHECK(cdf[2] == 1.0);
  CHECK(cdf[3] == 1.0);
  const std::vector<double> q{0.0, 1.0};
  CHECK(make_cdf(q) == std::vector<double>{0.0, 1.0});
}

TEST_CASE("ID policy keeps the longest fitting prefix") {
  const auto inst = one_state_arms({0.8, 0.8, 0.8, 0.8}, {1, 1, 1, 1}, 0.5);  // budget 2
  SystemState st{{0, 0, 0, 0}};
  const std::vector<ActionIndex> ideal{1, 1, 1, 1};
  StepOutcome out;
  id_policy_apply(inst, identity_order(4), st, ideal, out);
  CHECK(out.conforming_count == 2);
  CHECK(out.actions == std::vector<ActionIndex>{1, 1, 0, 0});
  CHECK(out.ideal_actions == ideal);
  CHECK(out.step_costs[0] == doctest::Approx(1.6));
  CHECK(out.step_reward == 2.0);
}

TEST_CASE("ID policy admits a prefix that uses the budget exactly") {
  const auto inst = one_state_arms({1.0, 1.0, 1.0, 1.0}, {1, 1, 1, 1}, 0.5);
  SystemState st{{0, 0, 0, 0}};
  const std::vector<ActionIndex> ideal{1, 1, 1, 1};
  StepOutcome out;
  id_policy_apply(inst, identity_order(4), st, ideal, out);
  CHECK(out.conforming_count == 2);
  CHECK(out.step_costs[0] == 2.0);
}

TEST_CASE("ID policy stops at the first misfit in reassigned order") {
  const auto inst = one_state_arms({0.8, 1.5, 0.1}, {1, 1, 1}, 2.0 / 3.0);  // budget 2
  SystemState st{{0, 0, 0}};
  const std::vector<ActionIndex> ideal{1, 1, 1};
  StepOutcome out;
  id_policy_apply(inst, {0, 1, 2}, st, ideal, out);
  CHECK(out.conforming_count == 1);
  CHECK(out.actions == std::vector<ActionIndex>{1, 0, 0});

  // the later cheap arm is served when it comes first
  id_policy_apply(inst, {2, 0, 1}, st, ideal, out);
  CHECK(out.conforming_count == 2);
  CHECK(out.actions == std::vector<ActionIndex>{1, 0, 1});
}

TEST_CASE("ERC serves arms by decreasing reward index and skips misfits") {
  const auto inst = one_state_arms({1.0, 1.0, 0.4}, {0.2, 0.9, 0.5}, 0.5);  // budget 1.5
  const auto pol = extract_policy(inst, solution_with(3, {1.0, 1.0, 1.0}));
  const PolicyTables tables(inst, pol);
  CHECK(tables.index(1, 0) == 0.9);
  SystemState st{{0, 0, 0}};
  Rng rng(1);
  const auto out = erc_policy_step(inst, tables, st, rng);
  CHECK(out.ideal_actions == std::vector<ActionIndex>{1, 1, 1});
  CHECK(out.actions == std::vector<ActionIndex>{0, 1, 1});
  CHECK(out.conforming_count == 2);
  CHECK(out.step_reward == doctest::Approx(1.4));
}

TEST_CASE("ERC breaks index ties by arm index") {
  const auto inst = one_state_arms({1.0, 1.0, 1.0}, {0.5, 0.5, 0.5}, 1.0 / 3.0);  // budget 1
  const auto pol = extract_policy(inst, solution_with(3, {1.0, 1.0, 1.0}));
  const PolicyTables tables(inst, pol);
  SystemState st{{0, 0, 0}};
  Rng rng(2);
  const auto out = erc_policy_step(inst, tables, st, rng);
  CHECK(out.actions == std::vector<ActionIndex>{1, 0, 0});
  CHECK(out.conforming_count == 1);
}

TEST_CASE("ERC counts idle ideal actions as conforming") {
  const auto inst = one_state_arms({1.0, 1.0, 1.0}, {0.3, 0.6, 0.9}, 1.0 / 3.0);
  const auto pol = extract_policy(inst, solution_with(3, {0.0, 1.0, 1.0}));
  const PolicyTables tables(inst, pol);
  SystemState st{{0, 0, 0}};
  Rng rng(3);
  const auto out = erc_policy_step(inst, tables, st, rng);
  CHECK(out.ideal_actions == std::vector<ActionIndex>{0, 1, 1});
  CHECK(out.actions == std::vector<ActionIndex>{0, 0, 1});
  CHECK(out.conforming_count == 2);
}

TEST_CASE("both policies never exceed a budget and ID plays a prefix") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = small_instance(seed, 40, 5, 3, 3);
    const auto pol = extract_policy(inst, solve_relaxation(inst));
    const auto re = reassign(inst, pol, seed);
    const PolicyTables tables(inst, pol);
    Rng rng(seed);
    SystemState st;
    for (int i = 0; i < 40; ++i) st.states.push_back(static_cast<int>(rng.index(5)));
    StepOutcome id, erc;
    for (int t = 0; t < 200; ++t) {
      id_policy_step(inst, tables, re, st, rng, id);
      erc_policy_step(inst, tables, st, rng, erc);
      CHECK(count_budget_violations(inst, st, id.actions, 0.0) == 0);
      CHECK(count_budget_violations(inst, st, erc.actions, 0.0) == 0);
      for (int k = 0; k < 3; ++k) {
        CHECK(id.step_costs[k] <= inst.budget(k));
        CHECK(erc.step_costs[k] <= inst.budget(k));
      }
      const int stop = id.conforming_count;
      for (int j = 0; j < 40; ++j) {
        const int i = re.order[j];
        CHECK(id.actions[i] == (j < stop ? id.ideal_actions[i] : 0));
      }
      if (stop < 40) {
        const int i = re.order[stop];
        bool overflows = false;
        for (int k = 0; k < 3; ++k) {
          overflows |= id.step_costs[k] + inst.arms[i].c(k, st.states[i], id.ideal_actions[i]) >
                       inst.budget(k);
        }
        CHECK(overflows);
      }
      advance_state(tables, re.order, id.actions, st, rng);
    }
  }
}

TEST_CASE("policy steps are deterministic given the stream") {
  const auto inst = small_instance(3, 30, 4, 3, 2);
  const auto pol = extract_policy(inst, solve_relaxation(inst));
  const auto re = reassign(inst, pol, 3);
  const PolicyTables tables(inst, pol);
  auto run = [&](bool use_id) {
    Rng rng(77);
    SystemState st{std::vector<StateIndex>(30, 0)};
    std::vector<ActionIndex> log;
    for (int t = 0; t < 50; ++t) {
      const auto out = use_id ? id_policy_step(inst, tables, re, st, rng)
                              : erc_policy_step(inst, tables, st, rng);
      log.insert(log.end(), out.actions.begin(), out.actions.end());
      advance_state(tables, re.order, out.actions, st, rng);
    }
    log.insert(log.end(), st.states.begin(), st.states.end());
    return log;
  };
  CHECK(run(true) == run(true));
  CHECK(run(false) == run(false));
}

TEST_CASE("violation counter uses the float slack") {
  const auto inst = one_state_arms({1.0, 1.0}, {1, 1}, 0.5);  // budget 1
  SystemState st{{0, 0}};
  const std::vector<ActionIndex> both{1, 1}, one{1, 0};
  CHECK(count_budget_violations(inst, st, both) == 1);
  CHECK(count_budget_violations(inst, st, one) == 0);
}

TEST_CASE("exact oracle with one arm and slack budget equals the unconstrained gain") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto inst = small_instance(seed, 1, 3, 2, 1);
    inst.alpha[0] = 1.0;  // costs are below 1, every action is feasible
    const auto res = exact_oracle(inst);
    CHECK(res.R_star == doctest::Approx(oracle::arm_gain(inst.arms[0])).epsilon(1e-8));
    CHECK(res.joint_states == 3);
    CHECK(res.joint_pairs == 6);
  }
}

TEST_CASE("exact oracle returns zero without rewards") {
  auto inst = small_instance(2, 2, 3, 2, 1);
  for (auto& arm : inst.arms) std::fill(arm.reward.begin(), arm.reward.end(), 0.0);
  inst.refresh_bounds();
  CHECK(std::abs(exact_oracle(inst).R_star) <= 1e-12);
}

TEST_CASE("exact oracle matches value iteration on the product chain") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto inst = small_instance(seed, 2, 2 + static_cast<int>(seed % 2), 2, 1);
    const auto res = exact_oracle(inst);
    CHECK(res.R_star == doctest::Approx(oracle::product_gain(inst) / 2.0).epsilon(1e-8));
  }
}

TEST_CASE("relaxation value bounds the optimal reward") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = small_instance(seed, 2, 3, 2, 1);
    const double r_star = exact_oracle(inst).R_star;
    const double r_rel = solve_relaxation(inst).objective;
    CHECK(r_star <= r_rel + 1e-6);
  }
}

TEST_CASE("exact oracle refuses oversized products") {
  const auto inst = small_instance(0, 6, 4, 3, 1);
  OracleOptions opts;
  opts.max_pairs = 1000;
  CHECK_THROWS_AS(exact_oracle(inst, opts), OracleError);
}
