#include "wcmdp/exact_oracle.hpp"

#include <algorithm>
#include <string>

#include "wcmdp/dense_simplex.hpp"

namespace wcmdp {

namespace {

struct JointPair {
  int state;
  std::vector<int> actions;
  double reward;
};

}  // namespace

OracleResult exact_oracle(const WcmdpInstance& inst, const OracleOptions& opt) {
  const int N = inst.num_arms();
  const int S = inst.num_states();
  const int A = inst.num_actions();
  const int K = inst.num_constraints;
  if (N < 1) throw OracleError("oracle needs at least one arm");

  // Joint state index: sum_i s_i S^i.
  std::size_t joint = 1;
  std::size_t joint_actions = 1;
  for (int i = 0; i < N; ++i) {
    joint *= S;
    joint_actions *= A;
    if (joint * joint_actions > 64 * opt.max_pairs) {
      throw OracleError("product MDP exceeds the size guard");
    }
  }
  const int J = static_cast<int>(joint);

  auto decode = [&](std::size_t code, int base, std::vector<int>& digits) {
    for (int i = 0; i < N; ++i) {
      digits[i] = static_cast<int>(code % base);
      code /= base;
    }
  };

  std::vector<JointPair> pairs;
  std::vector<int> s(N), a(N);
  for (int js = 0; js < J; ++js) {
    decode(js, S, s);
    for (std::size_t ja = 0; ja < joint_actions; ++ja) {
      decode(ja, A, a);
      bool feasible = true;
      for (int k = 0; k < K && feasible; ++k) {
        double total = 0.0;
        for (int i = 0; i < N; ++i) total += inst.arms[i].c(k, s[i], a[i]);
        feasible = total <= inst.budget(k);
      }
      if (!feasible) continue;
      double reward = 0.0;
      for (int i = 0; i < N; ++i) reward += inst.arms[i].r(s[i], a[i]);
      pairs.push_back({js, a, reward});
      if (pairs.size() > opt.max_pairs) throw OracleError("product MDP exceeds the size guard");
    }
  }
  const int P = static_cast<int>(pairs.size());
  const std::size_t rows = 2 * static_cast<std::size_t>(J);
  const std::size_t cols = 2 * static_cast<std::size_t>(P);
  if ((rows + 1) * (cols + rows + 1) > opt.max_tableau_entries) {
    throw OracleError("product MDP too large for the dense oracle LP (" + std::to_string(P) +
                      " state-action pairs)");
  }

  // Multichain average-reward LP, written as a minimization:
  //   min -r.w
  //   sum_a w(j,a) - sum_{s,a} p(j|s,a) w(s,a) = 0
  //   sum_a w(j,a) + sum_a z(j,a) - sum_{s,a} p(j|s,a) z(s,a) = beta_j
  // The multipliers of the second block are the optimal gains.
  DenseLp lp;
  lp.rows = static_cast<int>(rows);
  lp.cols = static_cast<int>(cols);
  lp.A.assign(rows * cols, 0.0);
  lp.b.assign(rows, 0.0);
  lp.c.assign(cols, 0.0);
  for (int j = 0; j < J; ++j) lp.b[J + j] = 1.0 / J;

  std::vector<int> next(N);
  for (int p = 0; p < P; ++p) {
    const JointPair& jp = pairs[p];
    decode(jp.state, S, s);
    lp.c[p] = -jp.reward;
    lp.at(jp.state, p) += 1.0;
    lp.at(J + jp.state, p) += 1.0;
    lp.at(J + jp.state, P + p) += 1.0;
    for (int j = 0; j < J; ++j) {
      decode(j, S, next);
      double prob = 1.0;
      for (int i = 0; i < N && prob != 0.0; ++i) prob *= inst.arms[i].P(s[i], jp.actions[i], next[i]);
      if (prob == 0.0) continue;
      lp.at(j, p) -= prob;
      lp.at(J + j, P + p) -= prob;
    }
  }

  const DenseLpResult sol = solve_dense_lp(lp, opt.tol);
  if (sol.status != DenseStatus::Optimal) {
    throw OracleError("oracle LP did not reach optimality (numerically singular input?)");
  }
  OracleResult res;
  res.joint_states = J;
  res.joint_pairs = pairs.size();
  res.gain.resize(J);
  for (int j = 0; j < J; ++j) res.gain[j] = -sol.duals[J + j];
  res.R_star = *std::max_element(res.gain.begin(), res.gain.end()) / N;
  return res;
}

}  // namespace wcmdp
