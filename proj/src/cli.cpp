#include "wcmdp/cli.hpp"

#include <Eigen/Core>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "wcmdp/exact_oracle.hpp"
#include "wcmdp/lp_relax.hpp"
#include "wcmdp/lyapunov.hpp"
#include "wcmdp/model.hpp"
#include "wcmdp/simulator.hpp"
#include "wcmdp/svg_plot.hpp"

namespace wcmdp {

namespace {

class Failure : public std::runtime_error {
 public:
  Failure(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct FamilyFlags {
  std::string family = "fully-het";
  int states = 10;
  int actions = 4;
  int constraints = 4;
  unsigned long long seed = 0;
  int types = 10;
  std::string cost_mode = "state-action";

  void add(CLI::App* sub) {
    sub->add_option("--family", family, "Instance family")
        ->check(CLI::IsMember({"fully-het", "typed"}))
        ->capture_default_str();
    sub->add_option("--states", states, "Number of states per arm")->capture_default_str();
    sub->add_option("--actions", actions, "Number of actions per arm")->capture_default_str();
    sub->add_option("--k", constraints, "Number of budget constraints")->capture_default_str();
    sub->add_option("--seed", seed, "Generator seed")->capture_default_str();
    sub->add_option("--types", types, "Number of types (typed family)")->capture_default_str();
    sub->add_option("--cost-mode", cost_mode, "Cost structure")
        ->check(CLI::IsMember({"state-action", "action-only"}))
        ->capture_default_str();
  }

  GeneratorConfig config(int n) const {
    GeneratorConfig g;
    g.seed = seed;
    g.num_arms = n;
    g.num_states = states;
    g.num_actions = actions;
    g.num_constraints = constraints;
    g.family = family == "typed" ? Family::Typed : Family::FullyHeterogeneous;
    g.num_types = types;
    g.cost_mode = cost_mode == "action-only" ? CostMode::ActionOnly : CostMode::StateAction;
    return g;
  }
};

struct SimFlags {
  long horizon = 20000;
  int reps = 4;
  long batch = 4000;
  unsigned long long seed = 0;
  std::string initial = "uniform";
  std::vector<int> initial_states;

  void add(CLI::App* sub, const char* seed_flag) {
    sub->add_option("--horizon", horizon, "Time steps per replication")->capture_default_str();
    sub->add_option("--reps", reps, "Independent replications")->capture_default_str();
    sub->add_option("--batch", batch, "Batch size for batch means")->capture_default_str();
    sub->add_option(seed_flag, seed, "Simulation seed")->capture_default_str();
    sub->add_option("--initial", initial, "Initial state")
        ->check(CLI::IsMember({"uniform", "zero", "explicit"}))
        ->capture_default_str();
    sub->add_option("--initial-states", initial_states, "Explicit initial states")->delimiter(',');
  }

  SimConfig config() const {
    SimConfig c;
    c.horizon = horizon;
    c.replications = reps;
    c.batch_size = std::min(batch, horizon);
    c.seed = seed;
    if (initial == "zero") c.initial.kind = InitialStateKind::AllZero;
    if (initial == "explicit") {
      c.initial.kind = InitialStateKind::Explicit;
      c.initial.states = initial_states;
    }
    return c;
  }
};

WcmdpInstance load_valid_instance(const std::string& path) {
  WcmdpInstance inst;
  try {
    inst = load_instance(path);
  } catch (const FormatError& e) {
    throw Failure(kExitValidation, e.what());
  }
  const ValidationReport report = validate(inst);
  if (!report.empty()) {
    std::string msg = "instance failed validation:";
    for (const auto& v : report) msg += "\n  " + describe(v);
    throw Failure(kExitValidation, msg);
  }
  return inst;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Failure(kExitFailure, "cannot write " + path);
  return f;
}

template <class F>
void emit(const std::string& path, std::ostream& fallback, F&& writer) {
  if (path.empty()) {
    writer(fallback);
  } else {
    auto f = open_output(path);
    writer(f);
  }
}

PolicyBundle bundle_for(const WcmdpInstance& inst, unsigned long long seed) {
  try {
    return make_bundle(inst, seed);
  } catch (const SolverError& e) {
    throw Failure(kExitFailure, std::string("LP solve failed: ") + e.what());
  }
}

}  // namespace

void write_manifest(const std::string& output, const std::string& command,
                    const std::vector<std::string>& args, unsigned long long seed,
                    const std::string& instance_hash) {
  nlohmann::json doc;
  doc["command"] = command;
  doc["args"] = args;
  doc["seed"] = seed;
  doc["versions"] = {{"wcmdp", kVersion},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                   std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"cli11", CLI11_VERSION}};
  doc["instance_hash"] = instance_hash;
  doc["timestamp"] = utc_timestamp();
  std::ofstream f(output + ".manifest.json");
  if (!f) throw Failure(kExitFailure, "cannot write manifest for " + output);
  f << doc.dump(2) << '\n';
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Planning and simulation for heterogeneous weakly-coupled MDPs", "wcmdp"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("wcmdp ") + kVersion);
  int threads = 0;
  app.add_option("--threads", threads, "Worker thread cap (0 = runtime default)")
      ->envname("WCMDP_THREADS");

  std::vector<std::string> args(argv + 1, argv + argc);

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a random instance");
  FamilyFlags gen_family;
  int gen_n = 0;
  std::string gen_out;
  gen_family.add(gen);
  gen->add_option("--n", gen_n, "Number of arms")->required()->check(CLI::PositiveNumber);
  gen->add_option("--out", gen_out, "Output instance JSON (default: stdout)");

  // solve
  auto* solve = app.add_subcommand("solve", "Solve the LP relaxation of an instance");
  std::string solve_in, solve_out;
  solve->add_option("--instance", solve_in, "Instance JSON")->required();
  solve->add_option("--out", solve_out, "Output solution JSON");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate one policy on an instance");
  std::string sim_in, sim_out, sim_policy = "id", sim_trace;
  SimFlags sim_flags;
  sim->add_option("--instance", sim_in, "Instance JSON")->required();
  sim->add_option("--policy", sim_policy, "Policy")
      ->check(CLI::IsMember({"id", "erc"}))
      ->capture_default_str();
  sim_flags.add(sim, "--seed");
  sim->add_option("--out", sim_out, "Output result JSON");
  sim->add_option("--trace", sim_trace, "Per-step trace CSV");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Sweep the number of arms for a generated family");
  FamilyFlags sw_family;
  SimFlags sw_flags;
  std::vector<int> sw_n;
  std::vector<std::string> sw_policies{"id"};
  std::string sw_out, sw_svg;
  sw_family.add(sw);
  sw_flags.add(sw, "--sim-seed");
  sw->add_option("--n-list", sw_n, "Comma-separated arm counts")->required()->delimiter(',');
  sw->add_option("--policies", sw_policies, "Comma-separated policies")
      ->delimiter(',')
      ->check(CLI::IsMember({"id", "erc"}));
  sw->add_option("--out", sw_out, "Output CSV (default: stdout)");
  sw->add_option("--svg", sw_svg, "Optimality ratio chart");

  // diagnose
  auto* diag_cmd = app.add_subcommand("diagnose", "Mixing times, assumption checks, drift probes");
  std::string dg_in, dg_out;
  bool dg_strict = false, dg_probe = false;
  int dg_samples = 1000, dg_tcap = kDefaultMixingCap;
  unsigned long long dg_seed = 0;
  diag_cmd->add_option("--instance", dg_in, "Instance JSON")->required();
  diag_cmd->add_option("--out", dg_out, "Output diagnostics JSON (default: stdout)");
  diag_cmd->add_flag("--strict", dg_strict, "Fail when an induced chain does not mix");
  diag_cmd->add_flag("--probe-drift", dg_probe, "Run the empirical drift probe");
  diag_cmd->add_option("--samples", dg_samples, "Drift probe samples")->capture_default_str();
  diag_cmd->add_option("--seed", dg_seed, "Probe seed")->capture_default_str();
  diag_cmd->add_option("--t-cap", dg_tcap, "Mixing time search cap")->capture_default_str();

  // compare
  auto* cmp = app.add_subcommand("compare", "Simulate ID and ERC on one instance");
  std::string cmp_in, cmp_out;
  SimFlags cmp_flags;
  cmp->add_option("--instance", cmp_in, "Instance JSON")->required();
  cmp_flags.add(cmp, "--seed");
  cmp->add_option("--out", cmp_out, "Output CSV (default: stdout)");

  // oracle-check
  auto* orc = app.add_subcommand("oracle-check", "Compare the exact optimum with the LP bound");
  std::string orc_in;
  FamilyFlags orc_family;
  orc_family.states = 3;
  orc_family.actions = 2;
  orc_family.constraints = 1;
  int orc_n = 2, orc_count = 20;
  double orc_tol = 1e-6;
  orc->add_option("--instance", orc_in, "Check a single instance file");
  orc_family.add(orc);
  orc->add_option("--n", orc_n, "Arms per generated instance")->capture_default_str();
  orc->add_option("--count", orc_count, "Generated instances (seeds seed..seed+count-1)")
      ->capture_default_str();
  orc->add_option("--tol", orc_tol, "Allowed excess of the exact optimum")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  set_thread_count(threads);

  try {
    if (gen->parsed()) {
      WcmdpInstance inst;
      try {
        inst = generate(gen_family.config(gen_n));
      } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
      }
      const ValidationReport report = validate(inst);
      if (!report.empty()) {
        for (const auto& v : report) err << describe(v) << '\n';
        return kExitValidation;
      }
      emit(gen_out, out, [&](std::ostream& o) { write_instance_json(o, inst); });
      if (!gen_out.empty()) {
        write_manifest(gen_out, "generate", args, gen_family.seed, instance_hash(inst));
      }
      return kExitOk;
    }

    if (solve->parsed()) {
      const WcmdpInstance inst = load_valid_instance(solve_in);
      const LpSolution sol = solve_relaxation(inst);
      const SolutionAudit audit = check_solution(inst, sol, 1e-8);
      if (!solve_out.empty()) {
        auto f = open_output(solve_out);
        write_solution_json(f, sol);
        write_manifest(solve_out, "solve", args, 0, instance_hash(inst));
      }
      char buf[256];
      std::snprintf(buf, sizeof buf,
                    "R_rel=%.12g status=%s iterations=%d budget=%.2e balance=%.2e "
                    "normalization=%.2e\n",
                    sol.objective, to_string(sol.status).c_str(), sol.iterations,
                    audit.budget_violation, audit.balance_residual,
                    audit.normalization_residual);
      out << buf;
      if (sol.status != SolverStatus::Optimal || !audit.ok) {
        err << "error: solution did not pass the feasibility audit\n";
        return kExitFailure;
      }
      return kExitOk;
    }

    if (sim->parsed()) {
      const WcmdpInstance inst = load_valid_instance(sim_in);
      const PolicyBundle bundle = bundle_for(inst, sim_flags.seed);
      SimConfig cfg = sim_flags.config();
      cfg.policy = parse_policy(sim_policy);
      cfg.record_trace = !sim_trace.empty();
      const SimResult res = simulate(inst, bundle, cfg);
      nlohmann::json doc{{"policy", sim_policy},
                         {"N", inst.num_arms()},
                         {"T", cfg.horizon},
                         {"reps", cfg.replications},
                         {"R_rel", bundle.solution.objective},
                         {"avg_reward", res.avg_reward_per_arm},
                         {"ratio", res.optimality_ratio},
                         {"ci_halfwidth", res.ci_halfwidth},
                         {"batch_means", res.per_batch_means},
                         {"conforming_frac", res.mean_conforming_fraction},
                         {"violations", res.feasibility_violations},
                         {"initial_state", to_string(res.initial_state)}};
      if (!sim_out.empty()) {
        auto f = open_output(sim_out);
        f << doc.dump(2) << '\n';
        write_manifest(sim_out, "simulate", args, sim_flags.seed, instance_hash(inst));
      }
      if (!sim_trace.empty()) {
        auto f = open_output(sim_trace);
        f << "replication,t,reward_per_arm,conforming\n";
        for (const auto& p : res.trace) {
          f << p.replication << ',' << p.t << ',' << p.reward_per_arm << ','
            << p.conforming_count << '\n';
        }
      }
      char buf[256];
      std::snprintf(buf, sizeof buf,
                    "policy=%s N=%d avg_reward=%.8f ratio=%.6f ci=%.3g violations=%ld\n",
                    sim_policy.c_str(), inst.num_arms(), res.avg_reward_per_arm,
                    res.optimality_ratio, res.ci_halfwidth, res.feasibility_violations);
      out << buf;
      return res.feasibility_violations == 0 ? kExitOk : kExitFeasibility;
    }

    if (sw->parsed()) {
      std::vector<PolicyKind> kinds;
      for (const auto& p : sw_policies) kinds.push_back(parse_policy(p));
      std::vector<SweepRow> rows;
      try {
        rows = sweep(sw_family.config(sw_n.empty() ? 1 : sw_n.front()), sw_n, kinds,
                     sw_flags.config());
      } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
      }
      emit(sw_out, out, [&](std::ostream& o) { write_sweep_csv(o, rows); });
      if (!sw_out.empty()) write_manifest(sw_out, "sweep", args, sw_family.seed, "");
      if (!sw_svg.empty()) {
        std::map<std::string, PlotSeries> by_policy;
        for (const auto& r : rows) {
          auto& s = by_policy[r.policy];
          s.name = r.policy == "id" ? "ID" : "ERC";
          s.x.push_back(r.N);
          s.y.push_back(r.ratio);
        }
        std::vector<PlotSeries> series;
        for (auto& [name, s] : by_policy) series.push_back(std::move(s));
        auto f = open_output(sw_svg);
        write_svg_plot(f, series, "Optimality ratio (" + family_name(sw_family.config(1).family) + ")",
                       "N", "ratio");
        write_manifest(sw_svg, "sweep", args, sw_family.seed, "");
      }
      long violations = 0;
      for (const auto& r : rows) violations += r.violations;
      if (violations) {
        err << "error: " << violations << " budget violations\n";
        return kExitFeasibility;
      }
      return kExitOk;
    }

    if (diag_cmd->parsed()) {
      const WcmdpInstance inst = load_valid_instance(dg_in);
      const PolicyBundle bundle = bundle_for(inst, dg_seed);
      const ChainDiagnostics diag = compute_diagnostics(inst, bundle.policies, dg_tcap);
      if (!diag.assumption_holds()) {
        try {
          diag.require();
        } catch (const AssumptionError& e) {
          if (dg_strict) {
            err << "error: " << e.what() << '\n';
            return kExitAssumption;
          }
          err << "warning: " << e.what() << '\n';
        }
      }
      std::vector<DriftStats> probes;
      if (dg_probe && diag.assumption_holds()) {
        std::vector<int> all(inst.num_arms());
        for (int i = 0; i < inst.num_arms(); ++i) all[i] = i;
        probes.push_back(drift_probe(inst, bundle, diag, all, dg_samples, dg_seed));
      }
      emit(dg_out, out, [&](std::ostream& o) { write_diagnostics_json(o, diag, probes); });
      if (!dg_out.empty()) write_manifest(dg_out, "diagnose", args, dg_seed, instance_hash(inst));
      return kExitOk;
    }

    if (cmp->parsed()) {
      const WcmdpInstance inst = load_valid_instance(cmp_in);
      const PolicyBundle bundle = bundle_for(inst, cmp_flags.seed);
      std::vector<SweepRow> rows;
      long violations = 0;
      for (PolicyKind kind : {PolicyKind::ID, PolicyKind::ERC}) {
        SimConfig cfg = cmp_flags.config();
        cfg.policy = kind;
        const SimResult res = simulate(inst, bundle, cfg);
        SweepRow row;
        row.family = "file";
        row.seed = cmp_flags.seed;
        row.N = inst.num_arms();
        row.policy = to_string(kind);
        row.T = cfg.horizon;
        row.reps = cfg.replications;
        row.R_rel = bundle.solution.objective;
        row.avg_reward = res.avg_reward_per_arm;
        row.ratio = res.optimality_ratio;
        row.ci_halfwidth = res.ci_halfwidth;
        row.gap = row.R_rel - row.avg_reward;
        row.gap_sqrtN = row.gap * std::sqrt(static_cast<double>(row.N));
        row.conforming_frac = res.mean_conforming_fraction;
        row.violations = res.feasibility_violations;
        violations += row.violations;
        rows.push_back(row);
      }
      emit(cmp_out, out, [&](std::ostream& o) { write_sweep_csv(o, rows); });
      if (!cmp_out.empty()) {
        write_manifest(cmp_out, "compare", args, cmp_flags.seed, instance_hash(inst));
      }
      return violations == 0 ? kExitOk : kExitFeasibility;
    }

    if (orc->parsed()) {
      std::vector<std::pair<std::string, WcmdpInstance>> cases;
      if (!orc_in.empty()) {
        cases.emplace_back(orc_in, load_valid_instance(orc_in));
      } else {
        for (int j = 0; j < orc_count; ++j) {
          GeneratorConfig g = orc_family.config(orc_n);
          g.seed = orc_family.seed + j;
          cases.emplace_back("seed " + std::to_string(g.seed), generate(g));
        }
      }
      int failures = 0;
      for (const auto& [label, inst] : cases) {
        const LpSolution sol = solve_relaxation(inst);
        const OracleResult orr = exact_oracle(inst);
        const bool ok = orr.R_star <= sol.objective + orc_tol;
        failures += !ok;
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s: R*=%.10f R_rel=%.10f %s\n", label.c_str(), orr.R_star,
                      sol.objective, ok ? "ok" : "VIOLATED");
        out << buf;
      }
      return failures == 0 ? kExitOk : kExitFailure;
    }
  } catch (const Failure& e) {
    err << "error: " << e.what() << '\n';
    return e.code();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const AssumptionError& e) {
    err << "error: " << e.what() << '\n';
    return kExitAssumption;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace wcmdp
