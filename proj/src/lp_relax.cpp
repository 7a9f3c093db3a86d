#include "wcmdp/lp_relax.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>

#include "json.hpp"

namespace wcmdp {

SparseLp build_lp(const WcmdpInstance& inst) {
  const int N = inst.num_arms();
  const int S = inst.num_states();
  const int A = inst.num_actions();
  const int K = inst.num_constraints;
  const double inv_n = 1.0 / static_cast<double>(N);

  SparseLp lp;
  lp.num_arms = N;
  lp.num_states = S;
  lp.num_actions = A;
  lp.num_constraints = K;
  lp.objective.assign(static_cast<std::size_t>(N) * S * A, 0.0);
  for (int i = 0; i < N; ++i) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) lp.objective[lp.variable(i, s, a)] = inst.arms[i].r(s, a) * inv_n;
    }
  }

  lp.rows.reserve(static_cast<std::size_t>(K) + static_cast<std::size_t>(N) * (S + 1));
  for (int k = 0; k < K; ++k) {
    LpRow row{RowKind::Budget, -1, k, RowSense::LessEqual, inst.alpha[k], {}};
    for (int i = 0; i < N; ++i) {
      for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
          const double c = inst.arms[i].c(k, s, a);
          if (c != 0.0) row.coeffs.emplace_back(lp.variable(i, s, a), c * inv_n);
        }
      }
    }
    lp.rows.push_back(std::move(row));
  }
  // inflow - outflow = 0
  for (int i = 0; i < N; ++i) {
    const ArmModel& arm = inst.arms[i];
    for (int s = 0; s < S; ++s) {
      LpRow row{RowKind::Balance, i, s, RowSense::Equal, 0.0, {}};
      for (int sp = 0; sp < S; ++sp) {
        for (int a = 0; a < A; ++a) {
          const double coef = arm.P(sp, a, s) - (sp == s ? 1.0 : 0.0);
          if (coef != 0.0) row.coeffs.emplace_back(lp.variable(i, sp, a), coef);
        }
      }
      lp.rows.push_back(std::move(row));
    }
  }
  for (int i = 0; i < N; ++i) {
    LpRow row{RowKind::Normalization, i, 0, RowSense::Equal, 1.0, {}};
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) row.coeffs.emplace_back(lp.variable(i, s, a), 1.0);
    }
    lp.rows.push_back(std::move(row));
  }
  return lp;
}

std::string to_string(SolverStatus status) {
  switch (status) {
    case SolverStatus::Optimal: return "optimal";
    case SolverStatus::IterationLimit: return "iteration_limit";
  }
  return "unknown";
}

LpSolution solve_relaxation(const WcmdpInstance& instance, const IpmOptions& options) {
  return solve_lp(build_lp(instance), options);
}

SolutionAudit check_solution(const WcmdpInstance& inst, const LpSolution& sol, double tol) {
  const int N = inst.num_arms();
  const int S = inst.num_states();
  const int A = inst.num_actions();
  const int K = inst.num_constraints;
  SolutionAudit audit;
  if (sol.num_arms != N || sol.num_states != S || sol.num_actions != A ||
      sol.y.size() != static_cast<std::size_t>(N) * S * A) {
    audit.ok = false;
    audit.balance_residual = audit.normalization_residual = INFINITY;
    return audit;
  }

  audit.min_entry = sol.y.empty() ? 0.0 : *std::min_element(sol.y.begin(), sol.y.end());
  std::vector<double> budget(K, 0.0);
  double reward = 0.0;
  for (int i = 0; i < N; ++i) {
    const ArmModel& arm = inst.arms[i];
    double total = 0.0;
    for (int s = 0; s < S; ++s) {
      double inflow = 0.0, outflow = 0.0;
      for (int sp = 0; sp < S; ++sp) {
        for (int a = 0; a < A; ++a) inflow += arm.P(sp, a, s) * sol.at(i, sp, a);
      }
      for (int a = 0; a < A; ++a) {
        const double y = sol.at(i, s, a);
        outflow += y;
        reward += arm.r(s, a) * y;
        for (int k = 0; k < K; ++k) budget[k] += arm.c(k, s, a) * y;
      }
      total += outflow;
      audit.balance_residual = std::max(audit.balance_residual, std::abs(inflow - outflow));
    }
    audit.normalization_residual = std::max(audit.normalization_residual, std::abs(total - 1.0));
  }
  const double n = static_cast<double>(N);
  for (int k = 0; k < K; ++k) {
    audit.budget_violation = std::max(audit.budget_violation, budget[k] / n - inst.alpha[k]);
  }
  audit.objective_error = std::abs(reward / n - sol.objective);
  audit.ok = audit.budget_violation <= tol && audit.balance_residual <= tol &&
             audit.normalization_residual <= tol && audit.min_entry >= -tol &&
             audit.objective_error <= tol * (1.0 + std::abs(sol.objective));
  return audit;
}

namespace {

void put_number(std::ostream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

}  // namespace

void write_solution_json(std::ostream& out, const LpSolution& sol) {
  out << "{\"R_rel\":";
  put_number(out, sol.objective);
  out << ",\"status\":\"" << to_string(sol.status) << "\",\"duals\":[";
  for (std::size_t k = 0; k < sol.duals.size(); ++k) {
    if (k) out << ',';
    put_number(out, sol.duals[k]);
  }
  out << "],\"y\":[";
  for (int i = 0; i < sol.num_arms; ++i) {
    out << (i ? ",\n" : "\n") << '[';
    for (int s = 0; s < sol.num_states; ++s) {
      if (s) out << ',';
      out << '[';
      for (int a = 0; a < sol.num_actions; ++a) {
        if (a) out << ',';
        put_number(out, sol.at(i, s, a));
      }
      out << ']';
    }
    out << ']';
  }
  out << "\n]}\n";
}

LpSolution read_solution_json(std::istream& in, const WcmdpInstance& inst) {
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("solution JSON parse error: ") + e.what());
  }
  LpSolution sol;
  sol.num_arms = inst.num_arms();
  sol.num_states = inst.num_states();
  sol.num_actions = inst.num_actions();
  try {
    sol.objective = doc.at("R_rel").get<double>();
    sol.duals = doc.at("duals").get<std::vector<double>>();
    if (doc.contains("status") && doc["status"].get<std::string>() != "optimal") {
      sol.status = SolverStatus::IterationLimit;
    }
    const auto& y = doc.at("y");
    if (static_cast<int>(y.size()) != sol.num_arms ||
        static_cast<int>(sol.duals.size()) != inst.num_constraints) {
      throw FormatError("solution dimensions do not match the instance");
    }
    sol.y.assign(static_cast<std::size_t>(sol.num_arms) * sol.num_states * sol.num_actions, 0.0);
    for (int i = 0; i < sol.num_arms; ++i) {
      if (static_cast<int>(y[i].size()) != sol.num_states) throw FormatError("y state length");
      for (int s = 0; s < sol.num_states; ++s) {
        if (static_cast<int>(y[i][s].size()) != sol.num_actions) {
          throw FormatError("y action length");
        }
        for (int a = 0; a < sol.num_actions; ++a) sol.at(i, s, a) = y[i][s][a].get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("solution JSON schema error: ") + e.what());
  }
  return sol;
}

double OptimalPolicies::total_cost(int k) const {
  double total = 0.0;
  for (const auto& arm : arms) total += arm.C_star[k];
  return total;
}

OptimalPolicies extract_policy(const WcmdpInstance& inst, const LpSolution& sol) {
  const int N = inst.num_arms();
  const int S = inst.num_states();
  const int A = inst.num_actions();
  const int K = inst.num_constraints;
  OptimalPolicies out;
  out.arms.resize(N);
  std::vector<double> y(static_cast<std::size_t>(S) * A);
  for (int i = 0; i < N; ++i) {
    const ArmModel& arm = inst.arms[i];
    SingleArmPolicy& p = out.arms[i];
    p.num_states = S;
    p.num_actions = A;
    p.pi.assign(static_cast<std::size_t>(S) * A, 0.0);
    p.induced_P.assign(static_cast<std::size_t>(S) * S, 0.0);
    p.mu_star.assign(S, 0.0);
    p.C_star.assign(K, 0.0);
    p.r_star.assign(S, 0.0);
    p.c_star.assign(static_cast<std::size_t>(K) * S, 0.0);

    double total = 0.0;
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const double v = std::max(0.0, sol.at(i, s, a));
        y[s * A + a] = v;
        total += v;
      }
    }
    if (total > 0.0) {
      for (double& v : y) v /= total;
    }

    for (int s = 0; s < S; ++s) {
      double marginal = 0.0;
      for (int a = 0; a < A; ++a) marginal += y[s * A + a];
      p.mu_star[s] = marginal;
      for (int a = 0; a < A; ++a) {
        p.pi[s * A + a] = marginal > kZeroMarginal ? y[s * A + a] / marginal : 1.0 / A;
      }
      for (int a = 0; a < A; ++a) {
        const double w = p.pi[s * A + a];
        if (w == 0.0) continue;
        const double* row = arm.P_row(s, a);
        for (int n = 0; n < S; ++n) p.induced_P[s * S + n] += w * row[n];
        p.r_star[s] += w * arm.r(s, a);
        for (int k = 0; k < K; ++k) p.c_star[k * S + s] += w * arm.c(k, s, a);
      }
      for (int a = 0; a < A; ++a) {
        for (int k = 0; k < K; ++k) p.C_star[k] += y[s * A + a] * arm.c(k, s, a);
      }
    }
  }
  return out;
}

}  // namespace wcmdp
