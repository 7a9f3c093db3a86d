#include "wcmdp/simulator.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace wcmdp {

std::string to_string(PolicyKind policy) { return policy == PolicyKind::ID ? "id" : "erc"; }

PolicyKind parse_policy(const std::string& name) {
  if (name == "id") return PolicyKind::ID;
  if (name == "erc") return PolicyKind::ERC;
  throw ConfigError("unknown policy '" + name + "' (expected id or erc)");
}

std::string to_string(InitialStateKind kind) {
  switch (kind) {
    case InitialStateKind::UniformRandom: return "uniform-random";
    case InitialStateKind::AllZero: return "all-zero";
    case InitialStateKind::Explicit: return "explicit";
  }
  return "unknown";
}

PolicyBundle make_bundle(const WcmdpInstance& inst, std::uint64_t reassign_seed,
                         const IpmOptions& options) {
  LpSolution sol = solve_relaxation(inst, options);
  if (sol.status != SolverStatus::Optimal) {
    throw SolverError("relaxation solver stopped with status " + to_string(sol.status));
  }
  OptimalPolicies pol = extract_policy(inst, sol);
  ReassignmentResult re = reassign(inst, pol, reassign_seed);
  PolicyTables tables(inst, pol);
  return {std::move(sol), std::move(pol), std::move(re), std::move(tables)};
}

std::pair<double, double> batch_means_ci(const std::vector<double>& xs) {
  if (xs.size() < 2) throw std::invalid_argument("batch means need at least two batches");
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  return {mean, 1.96 * sd / std::sqrt(n)};
}

namespace {

struct ReplicationOutcome {
  std::vector<double> batch_means;
  double mean = 0.0;
  long violations = 0;
  double conforming = 0.0;  // sum over steps of N*_t / N
  std::vector<TracePoint> trace;
};

SystemState initial_state(const WcmdpInstance& inst, const InitialState& init, Rng& rng) {
  SystemState st;
  const int N = inst.num_arms();
  const int S = inst.num_states();
  switch (init.kind) {
    case InitialStateKind::UniformRandom:
      st.states.resize(N);
      for (int i = 0; i < N; ++i) st.states[i] = static_cast<StateIndex>(rng.index(S));
      break;
    case InitialStateKind::AllZero:
      st.states.assign(N, 0);
      break;
    case InitialStateKind::Explicit:
      st.states = init.states;
      break;
  }
  return st;
}

ReplicationOutcome run_replication(const WcmdpInstance& inst, const PolicyBundle& bundle,
                                   const SimConfig& cfg, int r) {
  const int N = inst.num_arms();
  Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(r)));
  SystemState st = initial_state(inst, cfg.initial, rng);

  std::vector<int> identity(N);
  std::iota(identity.begin(), identity.end(), 0);
  const std::vector<int>& order =
      cfg.policy == PolicyKind::ID ? bundle.reassignment.order : identity;

  ReplicationOutcome out;
  StepOutcome step;
  const double inv_n = 1.0 / N;
  double batch_sum = 0.0, total = 0.0;
  for (long t = 0; t < cfg.horizon; ++t) {
    if (cfg.policy == PolicyKind::ID) {
      id_policy_step(inst, bundle.tables, bundle.reassignment, st, rng, step);
    } else {
      erc_policy_step(inst, bundle.tables, st, rng, step);
    }
    if (cfg.audit_costs) out.violations += count_budget_violations(inst, st, step.actions);
    batch_sum += step.step_reward;
    out.conforming += step.conforming_count * inv_n;
    if (cfg.record_trace) out.trace.push_back({r, t, step.step_reward * inv_n, step.conforming_count});
    if ((t + 1) % cfg.batch_size == 0) {
      out.batch_means.push_back(batch_sum * inv_n / static_cast<double>(cfg.batch_size));
      total += batch_sum;
      batch_sum = 0.0;
    }
    advance_state(bundle.tables, order, step.actions, st, rng);
  }
  out.mean = total * inv_n / static_cast<double>(cfg.horizon);
  return out;
}

}  // namespace

SimResult simulate(const WcmdpInstance& inst, const PolicyBundle& bundle, const SimConfig& cfg) {
  if (cfg.horizon < 1 || cfg.batch_size < 1 || cfg.horizon % cfg.batch_size != 0) {
    throw ConfigError("batch size must be positive and divide the horizon");
  }
  if (cfg.replications < 1) throw ConfigError("at least one replication is required");
  if (cfg.initial.kind == InitialStateKind::Explicit) {
    if (static_cast<int>(cfg.initial.states.size()) != inst.num_arms()) {
      throw ConfigError("explicit initial state has the wrong length");
    }
    for (StateIndex s : cfg.initial.states) {
      if (s < 0 || s >= inst.num_states()) throw ConfigError("explicit initial state out of range");
    }
  }

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<ReplicationOutcome> reps(cfg.replications);
  ExceptionSink sink;
#pragma omp parallel for schedule(dynamic, 1) if (is_parallel(cfg.exec))
  for (int r = 0; r < cfg.replications; ++r) {
    sink.capture([&] { reps[r] = run_replication(inst, bundle, cfg, r); });
  }
  sink.rethrow();

  SimResult res;
  res.initial_state = cfg.initial.kind;
  double sum = 0.0, conforming = 0.0;
  for (auto& rep : reps) {
    res.per_batch_means.insert(res.per_batch_means.end(), rep.batch_means.begin(),
                               rep.batch_means.end());
    res.replication_means.push_back(rep.mean);
    res.feasibility_violations += rep.violations;
    sum += rep.mean;
    conforming += rep.conforming;
    if (cfg.record_trace) res.trace.insert(res.trace.end(), rep.trace.begin(), rep.trace.end());
  }
  res.avg_reward_per_arm = sum / cfg.replications;
  res.optimality_ratio = res.avg_reward_per_arm / bundle.solution.objective;
  res.ci_halfwidth = res.per_batch_means.size() >= 2
                         ? batch_means_ci(res.per_batch_means).second
                         : std::numeric_limits<double>::quiet_NaN();
  res.mean_conforming_fraction =
      conforming / (static_cast<double>(cfg.horizon) * cfg.replications);
  res.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

std::string family_name(Family family) {
  return family == Family::Typed ? "typed" : "fully-het";
}

std::vector<SweepRow> sweep(const GeneratorConfig& tmpl, const std::vector<int>& n_values,
                            const std::vector<PolicyKind>& policies, const SimConfig& cfg) {
  for (std::size_t j = 1; j < n_values.size(); ++j) {
    if (n_values[j] <= n_values[j - 1]) throw ConfigError("N values must be strictly ascending");
  }
  std::vector<SweepRow> rows;
  for (int N : n_values) {
    GeneratorConfig gc = tmpl;
    gc.num_arms = N;
    const WcmdpInstance inst = generate(gc);
    const PolicyBundle bundle = make_bundle(inst, cfg.seed);
    for (PolicyKind kind : policies) {
      SimConfig sc = cfg;
      sc.policy = kind;
      const SimResult res = simulate(inst, bundle, sc);
      SweepRow row;
      row.family = family_name(tmpl.family);
      row.seed = tmpl.seed;
      row.N = N;
      row.policy = to_string(kind);
      row.T = cfg.horizon;
      row.reps = cfg.replications;
      row.R_rel = bundle.solution.objective;
      row.avg_reward = res.avg_reward_per_arm;
      row.ratio = res.optimality_ratio;
      row.ci_halfwidth = res.ci_halfwidth;
      row.gap = row.R_rel - row.avg_reward;
      row.gap_sqrtN = row.gap * std::sqrt(static_cast<double>(N));
      row.conforming_frac = res.mean_conforming_fraction;
      row.violations = res.feasibility_violations;
      rows.push_back(row);
    }
  }
  return rows;
}

const char* const kSweepCsvHeader =
    "family,seed,N,policy,T,reps,R_rel,avg_reward,ratio,ci_halfwidth,gap,gap_sqrtN,"
    "conforming_frac,violations";

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kSweepCsvHeader << '\n';
  char buf[512];
  for (const SweepRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%llu,%d,%s,%ld,%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%ld",
                  r.family.c_str(), static_cast<unsigned long long>(r.seed), r.N, r.policy.c_str(),
                  r.T, r.reps, r.R_rel, r.avg_reward, r.ratio, r.ci_halfwidth, r.gap, r.gap_sqrtN,
                  r.conforming_frac, r.violations);
    out << buf << '\n';
  }
}

}  // namespace wcmdp
