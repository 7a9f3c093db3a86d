#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "wcmdp/lyapunov.hpp"
#include "wcmdp/rng.hpp"
#include "wcmdp/simulator.hpp"

using namespace wcmdp;

namespace {

const double kEuler = std::exp(1.0);

// Arms that jump to a fresh uniform state every step, reward 1 in state 0.
WcmdpInstance iid_arms(int N) {
  std::vector<ArmModel> arms(
      N, oracle::make_arm(2, 1, 1, {0.5, 0.5, 0.5, 0.5}, {1.0, 0.0}, {}));
  return make_instance(std::move(arms), {0.5});
}

struct Setup {
  WcmdpInstance inst;
  OptimalPolicies pol;
  ChainDiagnostics diag;
};

Setup setup_for(WcmdpInstance inst) {
  auto pol = extract_policy(inst, solve_relaxation(inst));
  auto diag = compute_diagnostics(inst, pol);
  return {std::move(inst), std::move(pol), std::move(diag)};
}

Setup generated(int N, std::uint64_t seed, int S = 10, int A = 4, int K = 4) {
  GeneratorConfig cfg;
  cfg.seed = seed;
  cfg.num_arms = N;
  cfg.num_states = S;
  cfg.num_actions = A;
  cfg.num_constraints = K;
  return setup_for(generate(cfg));
}

SystemState random_state(int N, int S, Rng& rng) {
  SystemState st;
  for (int i = 0; i < N; ++i) st.states.push_back(static_cast<int>(rng.index(S)));
  return st;
}

std::vector<int> all_arms(int N) {
  std::vector<int> d(N);
  for (int i = 0; i < N; ++i) d[i] = i;
  return d;
}

}  // namespace

TEST_CASE("mixing time of closed-form two-state chains") {
  const std::vector<double> mu{0.5, 0.5};
  CHECK(mixing_time(std::vector<double>{0.5, 0.5, 0.5, 0.5}, mu) == 1);
  CHECK(mixing_time(std::vector<double>{0.75, 0.25, 0.25, 0.75}, mu) == 2);
  CHECK(!mixing_time(std::vector<double>{0.0, 1.0, 1.0, 0.0}, mu).has_value());
  CHECK_THROWS_AS(mixing_time(std::vector<double>{0.5, 0.5, 0.5, 0.5}, std::vector<double>{0.9, 0.1}),
                  std::invalid_argument);
}

TEST_CASE("mixing time follows the geometric decay |1 - p - q|^t") {
  for (double p : {0.05, 0.1, 0.2, 0.3, 0.45}) {
    const double q = p;
    const std::vector<double> P{1 - p, p, q, 1 - q};
    const std::vector<double> mu{0.5, 0.5};
    // distance from either start is |1 - p - q|^t
    const double rate = std::abs(1.0 - p - q);
    int expected = 1;
    while (std::pow(rate, expected) > 1.0 / kEuler) ++expected;
    CHECK(mixing_time(P, mu) == expected);
  }
}

TEST_CASE("chain structure of basic support graphs") {
  const auto pos = chain_structure(std::vector<double>{0.3, 0.7, 0.6, 0.4}, 2);
  CHECK(pos.unichain);
  CHECK(pos.aperiodic);
  CHECK(pos.period == 1);

  const auto id = chain_structure(std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1}, 3);
  CHECK(!id.unichain);
  CHECK(id.closed_classes == 3);

  const auto cyc = chain_structure(std::vector<double>{0, 1, 1, 0}, 2);
  CHECK(cyc.unichain);
  CHECK(!cyc.aperiodic);
  CHECK(cyc.period == 2);

  // transient state 0 feeding a 3-cycle
  const auto tr = chain_structure(
      std::vector<double>{0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 1, 0, 0}, 4);
  CHECK(tr.unichain);
  CHECK(tr.period == 3);
}

TEST_CASE("gamma and C_tau match their closed forms") {
  for (double tau : {1.0, 2.0, 3.0, 7.0, 40.0}) {
    CHECK(std::abs(gamma_from_tau(tau) - std::exp(-1.0 / (2.0 * tau))) <= 1e-12);
    const double c = 4.0 * kEuler / (1.0 - std::exp(-0.5)) * tau;
    CHECK(std::abs(c_tau_from_tau(tau) - c) <= 1e-12 * c);
  }
}

TEST_CASE("diagnostics derive the Lipschitz and drift constants") {
  const auto s = generated(20, 0);
  CHECK(s.diag.assumption_holds());
  int tmax = 1;
  for (const auto& t : s.diag.tau) tmax = std::max(tmax, *t);
  CHECK(s.diag.tau_max == tmax);
  const double C_tau = c_tau_from_tau(tmax);
  CHECK(s.diag.L_h == doctest::Approx(2.0 * std::max(s.inst.c_max, s.inst.r_max) * C_tau));
  CHECK(s.diag.C_h == doctest::Approx(2.0 * (4 * s.inst.c_max + s.inst.r_max) * C_tau));
  std::ostringstream os;
  write_diagnostics_json(os, s.diag, {});
  CHECK(os.str().find("\"gamma\"") != std::string::npos);
}

TEST_CASE("periodic induced chain fails the mixing requirement") {
  const auto s = setup_for(make_instance(
      {oracle::make_arm(2, 1, 1, {0.5, 0.5, 0.5, 0.5}, {1, 0}, {}),
       oracle::make_arm(2, 1, 1, {0.0, 1.0, 1.0, 0.0}, {1, 0}, {})},
      {0.5}));
  CHECK(s.diag.first_failing_arm() == 1);
  CHECK(std::isnan(s.diag.gamma));
  try {
    s.diag.require();
    FAIL("expected an assumption error");
  } catch (const AssumptionError& e) {
    CHECK(e.arm() == 1);
    CHECK(std::string(e.what()).find("arm 1") != std::string::npos);
  }
}

TEST_CASE("h vanishes when every row equals mu*") {
  const auto s = generated(20, 1);
  DistributionState x;
  x.num_arms = 20;
  x.num_states = 10;
  for (const auto& p : s.pol.arms) x.rows.insert(x.rows.end(), p.mu_star.begin(), p.mu_star.end());
  const auto d = all_arms(20);
  CHECK(subset_h(x, d, s.pol, s.diag).value == 0.0);
}

TEST_CASE("closed-form two-state example gives h = 0.5") {
  const auto s = setup_for(iid_arms(1));
  REQUIRE(s.diag.tau_max == 1);
  const auto x = DistributionState::from_state(SystemState{{0}}, 2);
  const std::vector<int> d{0};
  const auto h = subset_h(x, d, s.pol, s.diag);
  CHECK(h.value == 0.5);
  const auto x1 = DistributionState::from_state(SystemState{{1}}, 2);
  CHECK(subset_h(x1, d, s.pol, s.diag).value == 0.5);
}

TEST_CASE("doubling the look-ahead changes h by less than the tolerance") {
  const auto s = generated(30, 2);
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = DistributionState::from_state(random_state(30, 10, rng), 10);
    const auto d = all_arms(30);
    const auto h = subset_h(x, d, s.pol, s.diag);
    HOptions longer;
    longer.min_horizon = 2 * std::max(h.horizon, 1);
    const auto h2 = subset_h(x, d, s.pol, s.diag, longer);
    CHECK(std::abs(h.value - h2.value) <= 1e-7);
    CHECK(h.tail_bound <= 1e-9);
  }
}

TEST_CASE("h is Lipschitz in the subset") {
  const auto s = generated(40, 3);
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = DistributionState::from_state(random_state(40, 10, rng), 10);
    std::vector<int> D, Dp;
    for (int i = 0; i < 40; ++i) {
      if (rng.uniform() < 0.6) {
        D.push_back(i);
        if (rng.uniform() < 0.5) Dp.push_back(i);
      }
    }
    const double hD = subset_h(x, D, s.pol, s.diag).value;
    const double hDp = subset_h(x, Dp, s.pol, s.diag).value;
    CHECK(std::abs(hD - hDp) <= s.diag.L_h * static_cast<double>(D.size() - Dp.size()) + 1e-9);
  }
}

TEST_CASE("h dominates the immediate reward deviation") {
  const auto s = generated(25, 4);
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto st = random_state(25, 10, rng);
    const auto x = DistributionState::from_state(st, 10);
    double dev = 0.0;
    for (int i = 0; i < 25; ++i) {
      const auto& p = s.pol.arms[i];
      for (int q = 0; q < 10; ++q) dev += ((q == st.states[i]) - p.mu_star[q]) * p.r_star[q];
    }
    CHECK(subset_h(x, all_arms(25), s.pol, s.diag).value >= std::abs(dev) - 1e-12);
  }
}

TEST_CASE("shared prefix pass matches per-prefix evaluation") {
  const auto s = generated(60, 5);
  Rng rng(8);
  const auto x = DistributionState::from_state(random_state(60, 10, rng), 10);
  const auto re = reassign(s.inst, s.pol, 5);
  const auto fast = prefix_h(x, re.order, s.pol, s.diag);
  const auto ref = prefix_h_reference(x, re.order, s.pol, s.diag);
  REQUIRE(fast.size() == 61);
  CHECK(fast[0] == 0.0);
  for (int n = 0; n <= 60; ++n) CHECK(std::abs(fast[n] - ref[n]) <= 2e-9);
}

TEST_CASE("serial and parallel prefix evaluation are bitwise identical") {
  const auto s = generated(80, 6);
  Rng rng(9);
  const auto x = DistributionState::from_state(random_state(80, 10, rng), 10);
  const auto order = all_arms(80);
  HOptions serial, parallel;
  serial.exec = Exec::Serial;
  parallel.exec = Exec::Parallel;
  CHECK(prefix_h(x, order, s.pol, s.diag, serial) == prefix_h(x, order, s.pol, s.diag, parallel));
}

TEST_CASE("h_ID is monotone, Lipschitz, and V is assembled from its parts") {
  const auto s = generated(50, 7);
  const auto re = reassign(s.inst, s.pol, 7);
  const RemainingBudget beta(s.inst, s.pol, re);
  Rng rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    const auto x = DistributionState::from_state(random_state(50, 10, rng), 10);
    const auto rep = lyapunov_report(x, s.pol, re, beta, s.diag);
    REQUIRE(rep.h_id.size() == 51);
    CHECK(rep.h_id[0] == 0.0);
    for (int n = 1; n <= 50; ++n) {
      CHECK(rep.h_id[n] >= rep.h_id[n - 1]);
      CHECK(rep.h_id[n] >= rep.h_prefix[n]);
      CHECK(rep.h_id[n] - rep.h_id[n - 1] <= s.diag.L_h + 1e-9);
    }
    // focus is the largest n with h_id[n] <= min_k beta_k(n)
    int brute = 0;
    for (int n = 0; n <= 50; ++n) {
      if (rep.h_id[n] <= beta.min_over_constraints(n)) brute = n;
    }
    CHECK(rep.focus_n == brute);
    CHECK(rep.focus_m == doctest::Approx(brute / 50.0));
    CHECK(rep.V == rep.h_id[rep.focus_n] + s.diag.L_h * (50 - rep.focus_n));
  }
}

TEST_CASE("focus covers every arm when budgets never bind") {
  const auto s = setup_for(iid_arms(10));
  const auto re = identity_reassignment(s.inst, s.pol);
  REQUIRE(re.active_set.empty());
  const RemainingBudget beta(s.inst, s.pol, re);
  // balanced states keep every prefix deviation at most 0.5
  const auto x = DistributionState::from_state(SystemState{{0, 1, 0, 1, 0, 1, 0, 1, 0, 1}}, 2);
  const auto rep = lyapunov_report(x, s.pol, re, beta, s.diag);
  CHECK(rep.focus_n == 10);
  CHECK(rep.V == rep.h_id[10]);
  CHECK(focus_size(std::vector<double>{0.0, 100.0}, beta) == 0);
}

TEST_CASE("drift statistic over the empty subset is zero") {
  const auto s = generated(20, 8);
  Rng rng(11);
  std::vector<SystemState> states;
  for (int j = 0; j < 20; ++j) states.push_back(random_state(20, 10, rng));
  const auto st = drift_from_states(s.pol, s.diag, states, {}, 3);
  CHECK(st.samples == 20);
  CHECK(st.mean == 0.0);
  CHECK(st.max == 0.0);
}

TEST_CASE("drift on the i.i.d. chain is 0.5 (1 - gamma) for every sample") {
  const auto s = setup_for(iid_arms(1));
  std::vector<SystemState> states{SystemState{{0}}, SystemState{{1}}, SystemState{{0}}};
  const auto st = drift_from_states(s.pol, s.diag, states, {0}, 4);
  const double expected = 0.5 * (1.0 - std::exp(-0.5));
  CHECK(st.mean == doctest::Approx(expected).epsilon(1e-12));
  CHECK(st.max == doctest::Approx(expected).epsilon(1e-12));
  CHECK(st.stderr_ <= 1e-15);
  CHECK(st.bound == doctest::Approx(s.diag.C_h));
}

TEST_CASE("drift probe stays below C_h sqrt(N) and is reproducible") {
  GeneratorConfig cfg;
  cfg.num_arms = 30;
  const auto inst = generate(cfg);
  const auto bundle = make_bundle(inst, 0);
  const auto diag = compute_diagnostics(inst, bundle.policies);
  DriftOptions opts;
  opts.burn_in = 50;
  const auto a = drift_probe(inst, bundle, diag, all_arms(30), 100, 1, opts);
  const auto b = drift_probe(inst, bundle, diag, all_arms(30), 100, 1, opts);
  CHECK(a.mean == b.mean);
  CHECK(a.samples == 100);
  CHECK(a.mean + 3.0 * a.stderr_ < a.bound);
  opts.h.exec = Exec::Serial;
  CHECK(drift_probe(inst, bundle, diag, all_arms(30), 100, 1, opts).mean == a.mean);
}

TEST_CASE("conformity, non-shrinking and coverage statistics scale as expected") {
  std::vector<double> shrink_scaled, conformity;
  for (int N : {50, 100, 200}) {
    GeneratorConfig cfg;
    cfg.num_arms = N;
    const auto inst = generate(cfg);
    const auto bundle = make_bundle(inst, 0);
    const auto diag = compute_diagnostics(inst, bundle.policies);
    const auto st = conformity_study(inst, bundle, diag, 400, 0);
    const double root = std::sqrt(static_cast<double>(N));
    CHECK(st.steps == 400);
    CHECK(st.conformity_mean * root <= st.K_conf);
    CHECK(st.shrink_mean * root <= st.K_mono);
    CHECK(st.coverage_violations == 0);
    shrink_scaled.push_back(st.shrink_mean * root);
    conformity.push_back(st.conformity_mean);
  }
  CHECK(conformity[1] <= conformity[0]);
  CHECK(conformity[2] <= conformity[1]);
  const auto [lo, hi] = std::minmax_element(shrink_scaled.begin(), shrink_scaled.end());
  CHECK(*hi <= 3.0 * *lo);
}
