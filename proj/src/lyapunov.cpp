#include "wcmdp/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include "json.hpp"
#include "wcmdp/policies.hpp"
#include "wcmdp/rng.hpp"
#include "wcmdp/simulator.hpp"

namespace wcmdp {

namespace {

constexpr double kE = 2.718281828459045235360287471352662498;

double l1_distance(const std::vector<double>& a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) d += std::abs(a[j] - b[j]);
  return d;
}

// out = v P for a row vector v and S x S row-major P.
void row_times(std::span<const double> v, std::span<const double> P, int S,
               std::vector<double>& out) {
  out.assign(S, 0.0);
  for (int s = 0; s < S; ++s) {
    const double w = v[s];
    if (w == 0.0) continue;
    const double* row = P.data() + static_cast<std::size_t>(s) * S;
    for (int n = 0; n < S; ++n) out[n] += w * row[n];
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Mixing times and chain structure

std::optional<int> mixing_time(std::span<const double> P, std::span<const double> mu, int t_cap) {
  const int S = static_cast<int>(mu.size());
  if (P.size() != static_cast<std::size_t>(S) * S) {
    throw std::invalid_argument("transition matrix and distribution sizes differ");
  }
  std::vector<double> next;
  row_times(mu, P, S, next);
  if (l1_distance(next, mu) > 1e-8) {
    throw std::invalid_argument("distribution is not stationary for the chain");
  }
  const double threshold = 1.0 / kE;
  int worst = 1;
  std::vector<double> dist(S);
  for (int s = 0; s < S; ++s) {
    std::fill(dist.begin(), dist.end(), 0.0);
    dist[s] = 1.0;
    int t = 0;
    do {
      row_times(dist, P, S, next);
      dist.swap(next);
      ++t;
    } while (l1_distance(dist, mu) > threshold && t < t_cap);
    if (l1_distance(dist, mu) > threshold) return std::nullopt;
    worst = std::max(worst, t);
  }
  return worst;
}

ChainStructure chain_structure(std::span<const double> P, int S) {
  std::vector<std::vector<int>> adj(S);
  for (int s = 0; s < S; ++s) {
    for (int n = 0; n < S; ++n) {
      if (P[static_cast<std::size_t>(s) * S + n] > 0.0) adj[s].push_back(n);
    }
  }

  // Tarjan's strongly connected components.
  std::vector<int> index(S, -1), low(S, 0), comp(S, -1), stack;
  std::vector<char> on_stack(S, 0);
  int counter = 0, num_comp = 0;
  std::function<void(int)> visit = [&](int u) {
    index[u] = low[u] = counter++;
    stack.push_back(u);
    on_stack[u] = 1;
    for (int v : adj[u]) {
      if (index[v] < 0) {
        visit(v);
        low[u] = std::min(low[u], low[v]);
      } else if (on_stack[v]) {
        low[u] = std::min(low[u], index[v]);
      }
    }
    if (low[u] == index[u]) {
      int v;
      do {
        v = stack.back();
        stack.pop_back();
        on_stack[v] = 0;
        comp[v] = num_comp;
      } while (v != u);
      ++num_comp;
    }
  };
  for (int s = 0; s < S; ++s) {
    if (index[s] < 0) visit(s);
  }

  std::vector<char> closed(num_comp, 1);
  for (int u = 0; u < S; ++u) {
    for (int v : adj[u]) {
      if (comp[u] != comp[v]) closed[comp[u]] = 0;
    }
  }

  ChainStructure out;
  out.aperiodic = true;
  for (int c = 0; c < num_comp; ++c) {
    if (!closed[c]) continue;
    ++out.closed_classes;
    // Period: gcd of level[u] + 1 - level[v] over edges inside the class.
    int root = -1;
    for (int s = 0; s < S && root < 0; ++s) {
      if (comp[s] == c) root = s;
    }
    std::vector<int> level(S, -1);
    std::vector<int> queue{root};
    level[root] = 0;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const int u = queue[q];
      for (int v : adj[u]) {
        if (comp[v] == c && level[v] < 0) {
          level[v] = level[u] + 1;
          queue.push_back(v);
        }
      }
    }
    int period = 0;
    for (int u : queue) {
      for (int v : adj[u]) {
        if (comp[v] == c) period = std::gcd(period, std::abs(level[u] + 1 - level[v]));
      }
    }
    if (out.closed_classes == 1) out.period = period;
    if (period != 1) out.aperiodic = false;
  }
  out.unichain = out.closed_classes == 1;
  return out;
}

std::vector<ChainStructure> check_assumption(const OptimalPolicies& pol) {
  std::vector<ChainStructure> out;
  out.reserve(pol.arms.size());
  for (const auto& arm : pol.arms) out.push_back(chain_structure(arm.induced_P, arm.num_states));
  return out;
}

double gamma_from_tau(double tau) { return std::exp(-1.0 / (2.0 * tau)); }

double c_tau_from_tau(double tau) { return 4.0 * kE / (1.0 - 1.0 / std::sqrt(kE)) * tau; }

int ChainDiagnostics::first_failing_arm() const {
  for (std::size_t i = 0; i < tau.size(); ++i) {
    if (!tau[i]) return static_cast<int>(i);
  }
  return -1;
}

void ChainDiagnostics::require() const {
  const int arm = first_failing_arm();
  if (arm < 0) return;
  std::string why = !unichain[arm] ? "not unichain" : !aperiodic[arm] ? "periodic" : "slow mixing";
  throw AssumptionError("arm " + std::to_string(arm) + ": induced chain fails the mixing check (" +
                            why + ")",
                        arm);
}

ChainDiagnostics compute_diagnostics(const WcmdpInstance& inst, const OptimalPolicies& pol,
                                     int t_cap, Exec exec) {
  const int N = pol.num_arms();
  ChainDiagnostics d;
  d.num_constraints = inst.num_constraints;
  d.tau.resize(N);
  d.unichain.resize(N);
  d.aperiodic.resize(N);
  ExceptionSink sink;
#pragma omp parallel for schedule(dynamic, 8) if (is_parallel(exec))
  for (int i = 0; i < N; ++i) {
    sink.capture([&] {
      const SingleArmPolicy& p = pol.arms[i];
      const ChainStructure cs = chain_structure(p.induced_P, p.num_states);
      d.unichain[i] = cs.unichain;
      d.aperiodic[i] = cs.aperiodic;
      d.tau[i] = mixing_time(p.induced_P, p.mu_star, t_cap);
    });
  }
  sink.rethrow();
  if (!d.assumption_holds()) {
    d.gamma = d.C_tau = d.L_h = d.C_h = std::numeric_limits<double>::quiet_NaN();
    return d;
  }
  d.tau_max = 1;
  for (const auto& t : d.tau) d.tau_max = std::max(d.tau_max, *t);
  d.gamma = gamma_from_tau(d.tau_max);
  d.C_tau = c_tau_from_tau(d.tau_max);
  d.L_h = 2.0 * std::max(inst.c_max, inst.r_max) * d.C_tau;
  d.C_h = 2.0 * (inst.num_constraints * inst.c_max + inst.r_max) * d.C_tau;
  return d;
}

// ---------------------------------------------------------------------------
// Subset Lyapunov function

DistributionState DistributionState::from_state(const SystemState& state, int num_states) {
  DistributionState x;
  x.num_arms = state.num_arms();
  x.num_states = num_states;
  x.rows = state.one_hot(num_states);
  return x;
}

namespace {

struct ArmSeries {
  int length = 0;
  double tail = 0.0;
  std::vector<double> terms;  // [l][g]
};

ArmSeries arm_series(std::span<const double> x, const SingleArmPolicy& p, int K, double gamma,
                     double arm_tol, const HOptions& opt) {
  const int S = p.num_states;
  const int G = K + 1;
  auto g_row = [&](int g) { return g < K ? p.c_star_row(g) : p.r_star.data(); };
  double g_norm = 0.0;
  for (int g = 0; g < G; ++g) {
    for (int s = 0; s < S; ++s) g_norm = std::max(g_norm, std::abs(g_row(g)[s]));
  }

  ArmSeries out;
  std::vector<double> v(S), next;
  for (int s = 0; s < S; ++s) v[s] = x[s] - p.mu_star[s];
  double weight = 1.0;  // gamma^-l
  for (int l = 0;; ++l) {
    double norm = 0.0;
    for (double e : v) norm += std::abs(e);
    // Terms beyond l are bounded by 2e ||v_l||_1 max|g| / gamma^l.
    const double cert = 2.0 * kE * norm * g_norm * weight;
    if (l >= opt.min_horizon && cert <= arm_tol) {
      out.length = l;
      out.tail = cert;
      return out;
    }
    if (l >= opt.max_iterations) {
      throw AssumptionError("look-ahead series did not converge within the iteration cap", -1);
    }
    for (int g = 0; g < G; ++g) {
      const double* row = g_row(g);
      double dot = 0.0;
      for (int s = 0; s < S; ++s) dot += v[s] * row[s];
      out.terms.push_back(dot * weight);
    }
    // v <- v (P - Xi)
    row_times(v, p.induced_P, S, next);
    double mass = 0.0;
    for (double e : v) mass += e;
    for (int s = 0; s < S; ++s) v[s] = next[s] - mass * p.mu_star[s];
    weight /= gamma;
  }
}

std::vector<ArmSeries> all_series(const DistributionState& x, std::span<const int> arms,
                                  const OptimalPolicies& pol, const ChainDiagnostics& diag,
                                  double arm_tol, const HOptions& opt) {
  diag.require();
  const int n = static_cast<int>(arms.size());
  std::vector<ArmSeries> series(n);
  ExceptionSink sink;
#pragma omp parallel for schedule(static) if (is_parallel(opt.exec))
  for (int j = 0; j < n; ++j) {
    sink.capture([&] {
      const int i = arms[j];
      series[j] =
          arm_series(x.row(i), pol.arms[i], diag.num_constraints, diag.gamma, arm_tol, opt);
    });
  }
  sink.rethrow();
  return series;
}

// Adds an arm's series into the running sums and returns the new max |sum|.
void accumulate(const ArmSeries& s, int G, std::vector<double>& sums) {
  const std::size_t needed = static_cast<std::size_t>(s.length) * G;
  if (sums.size() < needed) sums.resize(needed, 0.0);
  for (std::size_t j = 0; j < needed; ++j) sums[j] += s.terms[j];
}

double max_abs(const std::vector<double>& sums) {
  double m = 0.0;
  for (double e : sums) m = std::max(m, std::abs(e));
  return m;
}

}  // namespace

HValue subset_h(const DistributionState& x, std::span<const int> subset,
                const OptimalPolicies& pol, const ChainDiagnostics& diag, const HOptions& opt) {
  HValue out;
  if (subset.empty()) return out;
  const double arm_tol = opt.tol / static_cast<double>(subset.size());
  const auto series = all_series(x, subset, pol, diag, arm_tol, opt);
  const int G = diag.num_constraints + 1;
  std::vector<double> sums;
  for (const auto& s : series) {
    accumulate(s, G, sums);
    out.horizon = std::max(out.horizon, s.length);
    out.tail_bound += s.tail;
  }
  out.value = max_abs(sums);
  return out;
}

std::vector<double> prefix_h(const DistributionState& x, const std::vector<int>& order,
                             const OptimalPolicies& pol, const ChainDiagnostics& diag,
                             const HOptions& opt) {
  const int N = static_cast<int>(order.size());
  std::vector<double> h(N + 1, 0.0);
  if (N == 0) return h;
  const double arm_tol = opt.tol / static_cast<double>(N);
  const auto series = all_series(x, order, pol, diag, arm_tol, opt);
  const int G = diag.num_constraints + 1;
  std::vector<double> sums;
  for (int n = 1; n <= N; ++n) {
    accumulate(series[n - 1], G, sums);
    h[n] = max_abs(sums);
  }
  return h;
}

std::vector<double> prefix_h_reference(const DistributionState& x, const std::vector<int>& order,
                                       const OptimalPolicies& pol, const ChainDiagnostics& diag,
                                       const HOptions& opt) {
  HOptions serial = opt;
  serial.exec = Exec::Serial;
  const int N = static_cast<int>(order.size());
  std::vector<double> h(N + 1, 0.0);
  for (int n = 1; n <= N; ++n) {
    h[n] = subset_h(x, std::span<const int>(order.data(), n), pol, diag, serial).value;
  }
  return h;
}

int focus_size(const std::vector<double>& h_id, const RemainingBudget& budget) {
  for (int n = static_cast<int>(h_id.size()) - 1; n > 0; --n) {
    if (h_id[n] <= budget.min_over_constraints(n)) return n;
  }
  return 0;
}

LyapunovReport lyapunov_report(const DistributionState& x, const OptimalPolicies& pol,
                               const ReassignmentResult& re, const RemainingBudget& budget,
                               const ChainDiagnostics& diag, const HOptions& opt) {
  LyapunovReport rep;
  rep.h_prefix = prefix_h(x, re.order, pol, diag, opt);
  rep.h_id.resize(rep.h_prefix.size());
  double running = 0.0;
  for (std::size_t n = 0; n < rep.h_prefix.size(); ++n) {
    running = std::max(running, rep.h_prefix[n]);
    rep.h_id[n] = running;
  }
  const int N = static_cast<int>(re.order.size());
  rep.focus_n = focus_size(rep.h_id, budget);
  rep.focus_m = N > 0 ? static_cast<double>(rep.focus_n) / N : 0.0;
  rep.V = rep.h_id[rep.focus_n] + diag.L_h * (N - rep.focus_n);
  return rep;
}

// ---------------------------------------------------------------------------
// Empirical drift and conformity checks

namespace {

DriftStats summarize(const std::vector<double>& xs, double bound) {
  DriftStats st;
  st.samples = static_cast<int>(xs.size());
  st.bound = bound;
  if (xs.empty()) return st;
  const double n = static_cast<double>(xs.size());
  double sum = 0.0;
  for (double v : xs) {
    sum += v;
    st.max = std::max(st.max, v);
  }
  st.mean = sum / n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double v : xs) ss += (v - st.mean) * (v - st.mean);
    st.stderr_ = std::sqrt(ss / (n - 1.0) / n);
  }
  return st;
}

}  // namespace

DriftStats drift_from_states(const OptimalPolicies& pol, const ChainDiagnostics& diag,
                             const std::vector<SystemState>& states,
                             const std::vector<int>& subset, std::uint64_t seed,
                             const HOptions& opt) {
  diag.require();
  const int M = static_cast<int>(states.size());
  std::vector<double> stats(M, 0.0);
  HOptions inner = opt;
  inner.exec = Exec::Serial;
  const int S = pol.arms.empty() ? 0 : pol.arms.front().num_states;
  ExceptionSink sink;
#pragma omp parallel for schedule(dynamic, 4) if (is_parallel(opt.exec))
  for (int j = 0; j < M; ++j) sink.capture([&] {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
    SystemState after = states[j];
    for (int i : subset) {
      const SingleArmPolicy& p = pol.arms[i];
      const int s = after.states[i];
      const auto cdf = make_cdf({p.induced_P.data() + static_cast<std::size_t>(s) * S,
                                 static_cast<std::size_t>(S)});
      after.states[i] = static_cast<StateIndex>(rng.sample_cdf(cdf));
    }
    const double h0 =
        subset_h(DistributionState::from_state(states[j], S), subset, pol, diag, inner).value;
    const double h1 =
        subset_h(DistributionState::from_state(after, S), subset, pol, diag, inner).value;
    stats[j] = std::max(0.0, h1 - diag.gamma * h0);
  });
  sink.rethrow();
  const int N = states.empty() ? 0 : states.front().num_arms();
  return summarize(stats, diag.C_h * std::sqrt(static_cast<double>(N)));
}

DriftStats drift_probe(const WcmdpInstance& inst, const PolicyBundle& bundle,
                       const ChainDiagnostics& diag, const std::vector<int>& subset,
                       int num_samples, std::uint64_t seed, const DriftOptions& opt) {
  const int N = inst.num_arms();
  Rng rng(derive_seed(seed, 0));
  SystemState st;
  st.states.resize(N);
  for (int i = 0; i < N; ++i) st.states[i] = static_cast<StateIndex>(rng.index(inst.num_states()));
  StepOutcome step;
  auto advance = [&]() {
    id_policy_step(inst, bundle.tables, bundle.reassignment, st, rng, step);
    advance_state(bundle.tables, bundle.reassignment.order, step.actions, st, rng);
  };
  for (int t = 0; t < opt.burn_in; ++t) advance();
  std::vector<SystemState> snapshots;
  snapshots.reserve(num_samples);
  for (int j = 0; j < num_samples; ++j) {
    snapshots.push_back(st);
    for (int t = 0; t < opt.spacing; ++t) advance();
  }
  DriftStats st_out = drift_from_states(bundle.policies, diag, snapshots, subset,
                                        derive_seed(seed, 1), opt.h);
  st_out.bound = diag.C_h * std::sqrt(static_cast<double>(N));
  return st_out;
}

ConformityStudy conformity_study(const WcmdpInstance& inst, const PolicyBundle& bundle,
                                 const ChainDiagnostics& diag, int steps, std::uint64_t seed,
                                 int burn_in, const HOptions& opt) {
  diag.require();
  const int N = inst.num_arms();
  const int S = inst.num_states();
  const ReassignmentResult& re = bundle.reassignment;
  const RemainingBudget budget(inst, bundle.policies, re);

  ConformityStudy out;
  out.N = N;
  out.steps = steps;
  out.K_conf = (2.0 * inst.num_constraints * inst.c_max + re.M_c) / re.eta_c;
  out.K_mono = ((2.0 + out.K_conf) * diag.C_h + re.M_c) / re.eta_c;
  out.K_cov = (re.eta_c + re.M_c + diag.L_h) / re.eta_c;

  Rng rng(derive_seed(seed, 0));
  SystemState st;
  st.states.resize(N);
  for (int i = 0; i < N; ++i) st.states[i] = static_cast<StateIndex>(rng.index(S));
  StepOutcome step;
  for (int t = 0; t < burn_in; ++t) {
    id_policy_step(inst, bundle.tables, re, st, rng, step);
    advance_state(bundle.tables, re.order, step.actions, st, rng);
  }

  std::vector<double> conformity, shrink;
  double focus_sum = 0.0;
  auto report = [&]() {
    return lyapunov_report(DistributionState::from_state(st, S), bundle.policies, re, budget,
                           diag, opt);
  };
  LyapunovReport cur = report();
  for (int t = 0; t < steps; ++t) {
    const double m = cur.focus_m;
    focus_sum += m;
    if (1.0 - m > cur.h_id[cur.focus_n] / (re.eta_c * N) + out.K_cov / N + 1e-12) {
      ++out.coverage_violations;
    }
    id_policy_step(inst, bundle.tables, re, st, rng, step);
    conformity.push_back(std::max(0, cur.focus_n - step.conforming_count) / static_cast<double>(N));
    advance_state(bundle.tables, re.order, step.actions, st, rng);
    LyapunovReport next = report();
    shrink.push_back(std::max(0.0, m - next.focus_m));
    cur = std::move(next);
  }
  const DriftStats c = summarize(conformity, 0.0);
  const DriftStats s = summarize(shrink, 0.0);
  out.conformity_mean = c.mean;
  out.conformity_stderr = c.stderr_;
  out.shrink_mean = s.mean;
  out.shrink_stderr = s.stderr_;
  out.mean_focus_m = steps > 0 ? focus_sum / steps : 0.0;
  return out;
}

void write_diagnostics_json(std::ostream& out, const ChainDiagnostics& diag,
                            const std::vector<DriftStats>& probes) {
  nlohmann::json doc;
  nlohmann::json tau = nlohmann::json::array();
  for (const auto& t : diag.tau) tau.push_back(t ? nlohmann::json(*t) : nlohmann::json("unbounded"));
  doc["tau"] = tau;
  doc["tau_max"] = diag.tau_max;
  doc["gamma"] = diag.gamma;
  doc["C_tau"] = diag.C_tau;
  doc["L_h"] = diag.L_h;
  doc["C_h"] = diag.C_h;
  doc["unichain"] = std::vector<bool>(diag.unichain.begin(), diag.unichain.end());
  doc["aperiodic"] = std::vector<bool>(diag.aperiodic.begin(), diag.aperiodic.end());
  nlohmann::json pr = nlohmann::json::array();
  for (const auto& p : probes) {
    pr.push_back({{"samples", p.samples},
                  {"mean", p.mean},
                  {"stderr", p.stderr_},
                  {"max", p.max},
                  {"bound", p.bound}});
  }
  doc["probes"] = pr;
  out << doc.dump(2) << '\n';
}

}  // namespace wcmdp
