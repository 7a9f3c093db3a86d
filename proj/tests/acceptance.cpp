// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>

#include "oracles.hpp"
#include "wcmdp/exact_oracle.hpp"
#include "wcmdp/lyapunov.hpp"
#include "wcmdp/reassign.hpp"
#include "wcmdp/rng.hpp"
#include "wcmdp/simulator.hpp"

using namespace wcmdp;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

const std::vector<int> kSweepN{100, 200, 400, 800};
constexpr std::uint64_t kSweepSeed = 0;
constexpr std::uint64_t kTypedSeed = 1;

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

const std::vector<SweepRow>& main_sweep() {
  static const std::vector<SweepRow> rows = [] {
    GeneratorConfig tmpl;
    tmpl.seed = kSweepSeed;
    SimConfig cfg;
    cfg.seed = kSweepSeed;
    return sweep(tmpl, kSweepN, {PolicyKind::ID, PolicyKind::ERC}, cfg);
  }();
  return rows;
}

std::vector<const SweepRow*> rows_for(const std::vector<SweepRow>& rows, const std::string& policy) {
  std::vector<const SweepRow*> out;
  for (const auto& r : rows) {
    if (r.policy == policy) out.push_back(&r);
  }
  return out;
}

Verdict oracle_bound() {
  Verdict v;
  double worst = -INFINITY;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GeneratorConfig cfg;
    cfg.seed = seed;
    cfg.num_arms = 2;
    cfg.num_states = 3;
    cfg.num_actions = 2;
    cfg.num_constraints = 1;
    const auto inst = generate(cfg);
    const double excess = exact_oracle(inst).R_star - solve_relaxation(inst).objective;
    worst = std::max(worst, excess);
    v.pass = v.pass && excess <= 1e-6;
  }
  v.detail = fmt("20 instances, max(R* - R_rel) = %.3g", worst);
  return v;
}

Verdict hard_feasibility() {
  Verdict v;
  long total = 0;
  for (const auto& r : main_sweep()) total += r.violations;
  v.pass = total == 0 && main_sweep().size() == 2 * kSweepN.size();
  v.detail = fmt("%.0f budget violations over %.0f runs", static_cast<double>(total),
                 static_cast<double>(main_sweep().size()));
  return v;
}

Verdict optimality_trend() {
  Verdict v;
  const auto id = rows_for(main_sweep(), "id");
  std::string ratios, scaled;
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t j = 0; j < id.size(); ++j) {
    ratios += fmt(j ? ", %.4f" : "%.4f", id[j]->ratio);
    scaled += fmt(j ? ", %.3f" : "%.3f", id[j]->gap_sqrtN);
    if (j > 0) v.pass = v.pass && id[j]->ratio >= id[j - 1]->ratio - 0.005;
    lo = std::min(lo, id[j]->gap_sqrtN);
    hi = std::max(hi, id[j]->gap_sqrtN);
  }
  v.pass = v.pass && id.back()->ratio > id.front()->ratio && lo > 0.0 && hi <= 3.0 * lo;
  v.detail = "ID ratio [" + ratios + "], gap*sqrt(N) [" + scaled + "]";
  return v;
}

Verdict erc_comparison() {
  Verdict v;
  GeneratorConfig tmpl;
  tmpl.seed = kTypedSeed;
  tmpl.family = Family::Typed;
  tmpl.num_types = 10;
  tmpl.num_constraints = 1;
  tmpl.cost_mode = CostMode::ActionOnly;
  SimConfig cfg;
  cfg.seed = kTypedSeed;
  const auto rows = sweep(tmpl, {100, 200, 400}, {PolicyKind::ID, PolicyKind::ERC}, cfg);
  const auto id = rows_for(rows, "id");
  const auto erc = rows_for(rows, "erc");
  std::string diffs;
  for (std::size_t j = 0; j < id.size(); ++j) {
    const double d = id[j]->ratio - erc[j]->ratio;
    diffs += fmt(j ? ", %+.4f" : "%+.4f", d);
    v.pass = v.pass && d >= -0.02;
  }
  v.detail = "typed family, ID - ERC ratio at N=100,200,400: [" + diffs + "]";
  return v;
}

Verdict slope_property() {
  Verdict v;
  double worst = INFINITY;
  int groups = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    GeneratorConfig cfg;
    cfg.seed = seed;
    cfg.num_arms = 200;
    const auto inst = generate(cfg);
    const auto pol = extract_policy(inst, solve_relaxation(inst));
    const auto re = reassign(inst, pol, seed);
    const auto rep = verify_slope(inst, pol, re);
    const double exhaustive = oracle::slope_margin_exhaustive(inst, pol, re);
    v.pass = v.pass && rep.holds && exhaustive >= -1e-12;
    worst = std::min(worst, exhaustive);
    groups += re.num_groups;
  }
  v.detail = fmt("10 instances, min exhaustive margin %.4g, %.0f groups seeded in total", worst,
                 static_cast<double>(groups));
  return v;
}

Verdict drift_bound() {
  Verdict v;
  GeneratorConfig cfg;
  cfg.num_arms = 50;
  const auto inst = generate(cfg);
  const auto bundle = make_bundle(inst, 0);
  const auto diag = compute_diagnostics(inst, bundle.policies);
  std::vector<int> all(50);
  for (int i = 0; i < 50; ++i) all[i] = i;
  const auto st = drift_probe(inst, bundle, diag, all, 1000, 0);
  v.pass = st.samples == 1000 && st.mean + 3.0 * st.stderr_ < st.bound;
  v.detail = fmt("mean %.4g, stderr %.3g, bound C_h*sqrt(N) = %.4g", st.mean, st.stderr_, st.bound);
  return v;
}

Verdict h_truths() {
  Verdict v;
  std::string notes;
  GeneratorConfig cfg;
  cfg.num_arms = 40;
  const auto inst = generate(cfg);
  const auto pol = extract_policy(inst, solve_relaxation(inst));
  const auto diag = compute_diagnostics(inst, pol);
  std::vector<int> all(40);
  for (int i = 0; i < 40; ++i) all[i] = i;

  DistributionState at_mu;
  at_mu.num_arms = 40;
  at_mu.num_states = 10;
  for (const auto& p : pol.arms) at_mu.rows.insert(at_mu.rows.end(), p.mu_star.begin(), p.mu_star.end());
  const double h_mu = subset_h(at_mu, all, pol, diag).value;
  v.pass = h_mu == 0.0;

  Rng rng(2024);
  double worst_lip = -INFINITY, worst_trunc = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    SystemState st;
    for (int i = 0; i < 40; ++i) st.states.push_back(static_cast<int>(rng.index(10)));
    const auto x = DistributionState::from_state(st, 10);
    std::vector<int> D, Dp;
    for (int i = 0; i < 40; ++i) {
      if (rng.uniform() < 0.7) {
        D.push_back(i);
        if (rng.uniform() < 0.5) Dp.push_back(i);
      }
    }
    const auto hD = subset_h(x, D, pol, diag);
    const double hDp = subset_h(x, Dp, pol, diag).value;
    const double excess =
        std::abs(hD.value - hDp) - diag.L_h * static_cast<double>(D.size() - Dp.size());
    worst_lip = std::max(worst_lip, excess);
    if (trial < 10) {
      HOptions longer;
      longer.min_horizon = 2 * std::max(hD.horizon, 1);
      worst_trunc = std::max(worst_trunc, std::abs(subset_h(x, D, pol, diag, longer).value - hD.value));
    }
  }
  v.pass = v.pass && worst_lip <= 0.0 && worst_trunc <= 1e-7;

  // |S| = 2, P = Xi, mu* = (0.5, 0.5), reward (1, 0) in state 0
  const auto arm = oracle::make_arm(2, 1, 1, {0.5, 0.5, 0.5, 0.5}, {1.0, 0.0}, {});
  const auto tiny = make_instance({arm}, {0.5});
  const auto tiny_pol = extract_policy(tiny, solve_relaxation(tiny));
  const auto tiny_diag = compute_diagnostics(tiny, tiny_pol);
  const std::vector<int> one{0};
  const double h_half =
      subset_h(DistributionState::from_state(SystemState{{0}}, 2), one, tiny_pol, tiny_diag).value;
  v.pass = v.pass && h_half == 0.5;
  v.detail = fmt("h(mu*) = %g, max Lipschitz excess %.3g, doubled-horizon change %.3g", h_mu,
                 worst_lip, worst_trunc) +
             fmt(", closed-form h = %.17g", h_half);
  return v;
}

Verdict mixing_closed_forms() {
  Verdict v;
  const std::vector<double> mu{0.5, 0.5};
  const auto iid = mixing_time(std::vector<double>{0.5, 0.5, 0.5, 0.5}, mu);
  const auto lazy = mixing_time(std::vector<double>{0.75, 0.25, 0.25, 0.75}, mu);
  const auto cycle = mixing_time(std::vector<double>{0.0, 1.0, 1.0, 0.0}, mu);
  v.pass = iid == 1 && lazy == 2 && !cycle.has_value();
  double worst = 0.0;
  const double e = std::exp(1.0);
  for (int tau = 1; tau <= 50; ++tau) {
    const double g = std::pow(e, -0.5 / tau);
    const double c = 4.0 * e * tau / (1.0 - 1.0 / std::sqrt(e));
    worst = std::max(worst, std::abs(gamma_from_tau(tau) - g));
    worst = std::max(worst, std::abs(c_tau_from_tau(tau) - c) / c);
  }
  v.pass = v.pass && worst <= 1e-12;
  v.detail = "tau = " + std::to_string(iid.value_or(-1)) + ", " +
             std::to_string(lazy.value_or(-1)) + ", " +
             (cycle ? std::to_string(*cycle) : std::string("unbounded")) +
             fmt("; max deviation of gamma / C_tau %.3g", worst);
  return v;
}

Verdict finite_time_shape() {
  Verdict v;
  GeneratorConfig cfg;
  cfg.num_arms = 200;
  const auto inst = generate(cfg);
  const auto bundle = make_bundle(inst, 0);
  SimConfig sc;
  sc.horizon = 20000;
  const auto a = simulate(inst, bundle, sc);
  sc.horizon = 40000;
  const auto b = simulate(inst, bundle, sc);
  const double diff = std::abs(a.avg_reward_per_arm - b.avg_reward_per_arm);
  const double band = 3.0 * std::hypot(a.ci_halfwidth, b.ci_halfwidth);
  v.pass = diff <= band;
  v.detail = fmt("|avg(2e4) - avg(4e4)| = %.3g, 3x combined halfwidth = %.3g", diff, band);
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"relaxation bounds the exact optimum", oracle_bound},
      {"hard budget feasibility on the sweep", hard_feasibility},
      {"optimality ratio trend and gap*sqrt(N) band", optimality_trend},
      {"ID versus ERC on the typed family", erc_comparison},
      {"slope property of the reassigned order", slope_property},
      {"Lyapunov drift below C_h*sqrt(N)", drift_bound},
      {"subset Lyapunov function unit truths", h_truths},
      {"mixing-time closed forms and constants", mixing_closed_forms},
      {"finite-time average stability", finite_time_shape},
  };
  int failures = 0;
  for (std::size_t j = 0; j < criteria.size(); ++j) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[j].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !v.pass;
    std::printf("%s %zu %s: %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", j + 1,
                criteria[j].first.c_str(), v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
