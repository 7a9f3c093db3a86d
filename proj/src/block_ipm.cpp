// Primal-dual interior point method (Mehrotra predictor-corrector) for the
// block-angular relaxation LP.
//
// Internal standard form:  min c'x  s.t.  Ax = b, x >= 0  with
//   x = [y_1 .. y_N, slack_1 .. slack_K]
//   A = [ B_1            0 ]   per-arm rows: S-1 balance rows + normalization
//       [      ..        0 ]
//       [          B_N   0 ]
//       [ L_1 .. L_N     I ]   K coupling (budget) rows
// The normal equations A D A' are solved by eliminating the S x S arm blocks
// and factoring the K x K Schur complement of the coupling rows. All per-arm
// work is independent; every cross-arm reduction runs serially in arm order
// so the serial and OpenMP paths agree bitwise.

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "wcmdp/lp_relax.hpp"

namespace wcmdp {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct ArmBlock {
  MatrixXd B;   // S x n  (balance rows 0..S-2, then normalization)
  MatrixXd L;   // K x n  (budget coefficients, scaled by N)
  VectorXd b;   // S
  VectorXd c;   // n      (negated objective, scaled by N)
};

struct Iterate {
  std::vector<VectorXd> x, z, pi;  // per arm
  VectorXd xs, zs, pic;            // slack primal/dual, coupling duals
};

struct Direction {
  std::vector<VectorXd> dx, dz, dpi;
  VectorXd dxs, dzs, dpic;
};

class BlockIpm {
 public:
  BlockIpm(const SparseLp& lp, const IpmOptions& opt) : opt_(opt) { load(lp); }

  LpSolution run();

 private:
  void load(const SparseLp& lp);
  void factor(const Iterate& it);
  // Solves (A D A') v = f for the current factorization.
  void solve_normal(const std::vector<VectorXd>& f_arm, const VectorXd& f_c,
                    std::vector<VectorXd>& v_arm, VectorXd& v_c) const;
  void residuals(const Iterate& it);
  void direction(const Iterate& it, const std::vector<VectorXd>& rxz, const VectorXd& rxz_s,
                 Direction& d);
  void starting_point(Iterate& it);

  bool par() const { return is_parallel(opt_.exec); }

  IpmOptions opt_;
  int N_ = 0, S_ = 0, A_ = 0, K_ = 0, n_arm_ = 0;
  double scale_ = 1.0;
  std::vector<ArmBlock> arms_;
  VectorXd bc_;  // coupling rhs (scaled)

  // factorization state
  std::vector<VectorXd> d_;       // per-arm X Z^-1
  VectorXd ds_;
  std::vector<Eigen::LDLT<MatrixXd>> block_ldlt_;
  std::vector<MatrixXd> E_, W_;   // B D L', M^-1 E
  Eigen::PartialPivLU<MatrixXd> schur_lu_;

  // residual state
  std::vector<VectorXd> rp_, rd_;
  VectorXd rpc_, rds_;
  double primal_res_ = 0.0, dual_res_ = 0.0;
  double b_norm_ = 0.0, c_norm_ = 0.0;
};

void BlockIpm::load(const SparseLp& lp) {
  N_ = lp.num_arms;
  S_ = lp.num_states;
  A_ = lp.num_actions;
  K_ = lp.num_constraints;
  n_arm_ = S_ * A_;
  if (N_ < 1 || S_ < 1 || A_ < 1 || K_ < 0) throw SolverError("empty LP");
  if (lp.num_variables() != N_ * n_arm_) throw SolverError("variable count mismatch");
  scale_ = static_cast<double>(N_);

  arms_.assign(N_, ArmBlock{});
  for (auto& arm : arms_) {
    arm.B = MatrixXd::Zero(S_, n_arm_);
    arm.L = MatrixXd::Zero(K_, n_arm_);
    arm.b = VectorXd::Zero(S_);
    arm.c = VectorXd::Zero(n_arm_);
  }
  for (int i = 0; i < N_; ++i) {
    for (int j = 0; j < n_arm_; ++j) arms_[i].c(j) = -scale_ * lp.objective[i * n_arm_ + j];
  }
  bc_ = VectorXd::Zero(K_);

  auto owner = [&](int var) { return var / n_arm_; };
  for (const LpRow& row : lp.rows) {
    switch (row.kind) {
      case RowKind::Budget: {
        if (row.sense != RowSense::LessEqual || row.index < 0 || row.index >= K_) {
          throw SolverError("malformed budget row");
        }
        bc_(row.index) = scale_ * row.rhs;
        for (auto [var, coef] : row.coeffs) {
          arms_[owner(var)].L(row.index, var % n_arm_) += scale_ * coef;
        }
        break;
      }
      case RowKind::Balance: {
        // The balance rows of one arm sum to zero; the last one is implied.
        if (row.index == S_ - 1) break;
        for (auto [var, coef] : row.coeffs) {
          if (owner(var) != row.arm) throw SolverError("LP is not block-angular");
          arms_[row.arm].B(row.index, var % n_arm_) += coef;
        }
        arms_[row.arm].b(row.index) = row.rhs;
        break;
      }
      case RowKind::Normalization: {
        for (auto [var, coef] : row.coeffs) {
          if (owner(var) != row.arm) throw SolverError("LP is not block-angular");
          arms_[row.arm].B(S_ - 1, var % n_arm_) += coef;
        }
        arms_[row.arm].b(S_ - 1) = row.rhs;
        break;
      }
    }
  }

  b_norm_ = bc_.size() ? bc_.cwiseAbs().maxCoeff() : 0.0;
  c_norm_ = 0.0;
  for (const auto& arm : arms_) {
    b_norm_ = std::max(b_norm_, arm.b.cwiseAbs().maxCoeff());
    c_norm_ = std::max(c_norm_, arm.c.cwiseAbs().maxCoeff());
  }

  d_.assign(N_, VectorXd());
  block_ldlt_.resize(N_);
  E_.assign(N_, MatrixXd());
  W_.assign(N_, MatrixXd());
  rp_.assign(N_, VectorXd());
  rd_.assign(N_, VectorXd());
}

void BlockIpm::factor(const Iterate& it) {
  std::vector<MatrixXd> contrib(N_);
#pragma omp parallel for schedule(static) if (par())
  for (int i = 0; i < N_; ++i) {
    const ArmBlock& arm = arms_[i];
    d_[i] = it.x[i].cwiseQuotient(it.z[i]);
    const MatrixXd BD = arm.B * d_[i].asDiagonal();
    MatrixXd M = BD * arm.B.transpose();
    // Tiny diagonal shift keeps rank-deficient balance rows factorizable.
    const double shift = 1e-14 * (1.0 + M.diagonal().cwiseAbs().maxCoeff());
    M.diagonal().array() += shift;
    block_ldlt_[i].compute(M);
    E_[i] = BD * arm.L.transpose();
    W_[i] = block_ldlt_[i].solve(E_[i]);
    contrib[i] = arm.L * d_[i].asDiagonal() * arm.L.transpose() - E_[i].transpose() * W_[i];
  }
  ds_ = it.xs.cwiseQuotient(it.zs);
  MatrixXd schur = ds_.asDiagonal();
  for (int i = 0; i < N_; ++i) schur += contrib[i];
  schur_lu_.compute(schur);
}

void BlockIpm::solve_normal(const std::vector<VectorXd>& f_arm, const VectorXd& f_c,
                            std::vector<VectorXd>& v_arm, VectorXd& v_c) const {
  v_arm.resize(N_);
  std::vector<VectorXd> partial(N_);
#pragma omp parallel for schedule(static) if (par())
  for (int i = 0; i < N_; ++i) {
    v_arm[i] = block_ldlt_[i].solve(f_arm[i]);
    partial[i] = E_[i].transpose() * v_arm[i];
  }
  VectorXd rhs = f_c;
  for (int i = 0; i < N_; ++i) rhs -= partial[i];
  v_c = K_ > 0 ? VectorXd(schur_lu_.solve(rhs)) : VectorXd();
#pragma omp parallel for schedule(static) if (par())
  for (int i = 0; i < N_; ++i) {
    if (K_ > 0) v_arm[i] -= W_[i] * v_c;
  }
}

void BlockIpm::residuals(const Iterate& it) {
  std::vector<VectorXd> coupling(N_);
  std::vector<double> pmax(N_), dmax(N_);
#pragma omp parallel for schedule(static) if (par())
  for (int i = 0; i < N_; ++i) {
    const ArmBlock& arm = arms_[i];
    rp_[i] = arm.b - arm.B * it.x[i];
    rd_[i] = arm.c - arm.B.transpose() * it.pi[i] - arm.L.transpose() * it.pic - it.z[i];
    coupling[i] = arm.L * it.x[i];
    pmax[i] = rp_[i].cwiseAbs().maxCoeff();
    dmax[i] = rd_[i].cwiseAbs().maxCoeff();
  }
  rpc_ = bc_ - it.xs;
  for (int i = 0; i < N_; ++i) rpc_ -= coupling[i];
  rds_ = -it.pic - it.zs;
  double p = K_ ? rpc_.cwiseAbs().maxCoeff() : 0.0;
  double d = K_ ? rds_.cwiseAbs().maxCoeff() : 0.0;
  for (int i = 0; i < N_; ++i) {
    p = std::max(p, pmax[i]);
    d = std::max(d, dmax[i]);
  }
  primal_res_ = p / (1.0 + b_norm_);
  dual_res_ = d / (1.0 + c_norm_);
}

void BlockIpm::direction(const Iterate& it, const std::vector<VectorXd>& rxz,
                         const VectorXd& rxz_s, Direction& d) {
  // rhs = rp + A w,  w = D rd - Z^-1 rxz
  std::vector<VectorXd> w(N_), f(N_), lw(N_);
#pragma omp parallel for schedule(static) if (par())
  for (int i = 0; i < N_; ++i) {
    w[i] = d_[i].cwiseProduct(rd_[i]) - rxz[i].cwiseQuotient(it.z[i]);
    f[i] = rp_[i] + arms_[i].B * w[i];
    lw[i] = arms_[i].L * w[i];
  }
  const VectorXd ws = ds_.cwiseProduct(rds_) - rxz_s.cwiseQuotient(it.zs);
  VectorXd fc = rpc_ + ws;
  for (int i = 0; i < N_; ++i) fc += lw[i];

  solve_normal(f, fc, d.dpi, d.dpic);

  d.dx.resize(N_);
  d.dz.resize(N_);
#pragma omp parallel for schedule(static) if (par())
  for (int i = 0; i < N_; ++i) {
    const ArmBlock& arm = arms_[i];
    const VectorXd at_dpi = arm.B.transpose() * d.dpi[i] + arm.L.transpose() * d.dpic;
    d.dx[i] = d_[i].cwiseProduct(at_dpi - rd_[i]) + rxz[i].cwiseQuotient(it.z[i]);
    d.dz[i] = rd_[i] - at_dpi;
  }
  d.dxs = ds_.cwiseProduct(d.dpic - rds_) + rxz_s.cwiseQuotient(it.zs);
  d.dzs = rds_ - d.dpic;
}

void BlockIpm::starting_point(Iterate& it) {
  // Mehrotra's heuristic: least-squares x and (pi, z) with D = I, then shift
  // into the positive orthant.
  it.x.assign(N_, VectorXd::Ones(n_arm_));
  it.z.assign(N_, VectorXd::Ones(n_arm_));
  it.pi.assign(N_, VectorXd::Zero(S_));
  it.xs = VectorXd::Ones(K_);
  it.zs = VectorXd::Ones(K_);
  it.pic = VectorXd::Zero(K_);
  factor(it);

  // x~ = A'(AA')^-1 b
  std::vector<VectorXd> v;
  VectorXd vc;
  std::vector<VectorXd> b_arm(N_);
  for (int i = 0; i < N_; ++i) b_arm[i] = arms_[i].b;
  solve_normal(b_arm, bc_, v, vc);
  for (int i = 0; i < N_; ++i) {
    it.x[i] = arms_[i].B.transpose() * v[i] + arms_[i].L.transpose() * vc;
  }
  it.xs = vc;

  // pi~ = (AA')^-1 A c,  z~ = c - A' pi~
  std::vector<VectorXd> ac(N_);
  VectorXd acc = VectorXd::Zero(K_);
  for (int i = 0; i < N_; ++i) {
    ac[i] = arms_[i].B * arms_[i].c;
    acc += arms_[i].L * arms_[i].c;
  }
  solve_normal(ac, acc, it.pi, it.pic);
  for (int i = 0; i < N_; ++i) {
    it.z[i] = arms_[i].c - arms_[i].B.transpose() * it.pi[i] - arms_[i].L.transpose() * it.pic;
  }
  it.zs = -it.pic;

  double min_x = K_ ? it.xs.minCoeff() : std::numeric_limits<double>::infinity();
  double min_z = K_ ? it.zs.minCoeff() : std::numeric_limits<double>::infinity();
  for (int i = 0; i < N_; ++i) {
    min_x = std::min(min_x, it.x[i].minCoeff());
    min_z = std::min(min_z, it.z[i].minCoeff());
  }
  const double shift_x = std::max(-1.5 * min_x, 0.0) + 1e-2;
  const double shift_z = std::max(-1.5 * min_z, 0.0) + 1e-2;
  double xz = 0.0, sum_x = 0.0, sum_z = 0.0;
  auto shift = [&](VectorXd& x, VectorXd& z) {
    x.array() += shift_x;
    z.array() += shift_z;
    xz += x.dot(z);
    sum_x += x.sum();
    sum_z += z.sum();
  };
  for (int i = 0; i < N_; ++i) shift(it.x[i], it.z[i]);
  shift(it.xs, it.zs);
  const double dx = 0.5 * xz / sum_z;
  const double dz = 0.5 * xz / sum_x;
  for (int i = 0; i < N_; ++i) {
    it.x[i].array() += dx;
    it.z[i].array() += dz;
  }
  it.xs.array() += dx;
  it.zs.array() += dz;
}

double max_step(const VectorXd& v, const VectorXd& dv) {
  double step = 1.0;
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (dv(j) < 0.0) step = std::min(step, -v(j) / dv(j));
  }
  return step;
}

LpSolution BlockIpm::run() {
  Iterate it;
  starting_point(it);
  const double n_total = static_cast<double>(N_) * n_arm_ + K_;

  auto complementarity = [&](const Iterate& cur) {
    double s = cur.xs.dot(cur.zs);
    for (int i = 0; i < N_; ++i) s += cur.x[i].dot(cur.z[i]);
    return s;
  };
  auto objectives = [&](const Iterate& cur) {
    double primal = 0.0, dual = bc_.dot(cur.pic);
    for (int i = 0; i < N_; ++i) {
      primal += arms_[i].c.dot(cur.x[i]);
      dual += arms_[i].b.dot(cur.pi[i]);
    }
    return std::pair{primal, dual};
  };

  LpSolution sol;
  sol.status = SolverStatus::IterationLimit;
  double gap = std::numeric_limits<double>::infinity();
  int iter = 0;
  // The best iterate seen so far is kept: very close to optimality the
  // normal equations become ill-conditioned and a step can lose accuracy.
  Iterate best;
  double best_merit = std::numeric_limits<double>::infinity();
  double best_pr = 0.0, best_dr = 0.0, best_gap = 0.0;
  int best_iter = 0;
  for (; iter <= opt_.max_iterations; ++iter) {
    residuals(it);
    const auto [pobj, dobj] = objectives(it);
    gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj));
    if (!std::isfinite(gap) || !std::isfinite(primal_res_) || !std::isfinite(dual_res_)) break;
    const double merit = std::max({primal_res_, dual_res_, gap});
    if (merit < best_merit) {
      best = it;
      best_merit = merit;
      best_pr = primal_res_;
      best_dr = dual_res_;
      best_gap = gap;
      best_iter = iter;
    }
    if (primal_res_ <= opt_.feasibility_tol && dual_res_ <= opt_.feasibility_tol &&
        gap <= opt_.gap_tol) {
      break;
    }
    if (iter == opt_.max_iterations) break;

    factor(it);
    const double mu = complementarity(it) / n_total;

    // Predictor.
    std::vector<VectorXd> rxz(N_);
    for (int i = 0; i < N_; ++i) rxz[i] = -it.x[i].cwiseProduct(it.z[i]);
    VectorXd rxz_s = -it.xs.cwiseProduct(it.zs);
    Direction aff;
    direction(it, rxz, rxz_s, aff);

    double ap = max_step(it.xs, aff.dxs), ad = max_step(it.zs, aff.dzs);
    for (int i = 0; i < N_; ++i) {
      ap = std::min(ap, max_step(it.x[i], aff.dx[i]));
      ad = std::min(ad, max_step(it.z[i], aff.dz[i]));
    }
    double mu_aff = (it.xs + ap * aff.dxs).dot(it.zs + ad * aff.dzs);
    for (int i = 0; i < N_; ++i) {
      mu_aff += (it.x[i] + ap * aff.dx[i]).dot(it.z[i] + ad * aff.dz[i]);
    }
    mu_aff /= n_total;
    const double sigma = std::pow(mu_aff / mu, 3.0);

    // Corrector.
    for (int i = 0; i < N_; ++i) {
      rxz[i].array() += sigma * mu - (aff.dx[i].array() * aff.dz[i].array());
    }
    rxz_s.array() += sigma * mu - (aff.dxs.array() * aff.dzs.array());
    Direction d;
    direction(it, rxz, rxz_s, d);

    ap = max_step(it.xs, d.dxs);
    ad = max_step(it.zs, d.dzs);
    for (int i = 0; i < N_; ++i) {
      ap = std::min(ap, max_step(it.x[i], d.dx[i]));
      ad = std::min(ad, max_step(it.z[i], d.dz[i]));
    }
    const double eta = std::max(0.9, 1.0 - 10.0 * mu);
    ap = std::min(1.0, eta * ap);
    ad = std::min(1.0, eta * ad);
    for (int i = 0; i < N_; ++i) {
      it.x[i] += ap * d.dx[i];
      it.z[i] += ad * d.dz[i];
      it.pi[i] += ad * d.dpi[i];
    }
    it.xs += ap * d.dxs;
    it.zs += ad * d.dzs;
    it.pic += ad * d.dpic;
  }

  if (!std::isfinite(best_merit)) throw SolverError("interior point iteration diverged");
  it = std::move(best);
  iter = best_iter;
  primal_res_ = best_pr;
  dual_res_ = best_dr;
  gap = best_gap;
  if (primal_res_ <= opt_.acceptable_tol && dual_res_ <= opt_.acceptable_tol &&
      gap <= opt_.acceptable_tol) {
    sol.status = SolverStatus::Optimal;
  }

  // Project each arm block back onto its equality rows (minimum-norm
  // correction), which removes the residual left by the final Newton step.
#pragma omp parallel for schedule(static) if (par())
  for (int i = 0; i < N_; ++i) {
    const ArmBlock& arm = arms_[i];
    const VectorXd r = arm.b - arm.B * it.x[i];
    const MatrixXd BBt = arm.B * arm.B.transpose();
    it.x[i] += arm.B.transpose() * BBt.ldlt().solve(r);
  }

  sol.num_arms = N_;
  sol.num_states = S_;
  sol.num_actions = A_;
  sol.iterations = iter;
  sol.primal_residual = primal_res_;
  sol.dual_residual = dual_res_;
  sol.relative_gap = gap;
  sol.y.resize(static_cast<std::size_t>(N_) * n_arm_);
  double objective = 0.0;
  for (int i = 0; i < N_; ++i) {
    for (int j = 0; j < n_arm_; ++j) {
      const double v = std::max(0.0, it.x[i](j));
      sol.y[static_cast<std::size_t>(i) * n_arm_ + j] = v;
      objective -= arms_[i].c(j) * v;
    }
  }
  sol.objective = objective / scale_;
  sol.duals.resize(K_);
  for (int k = 0; k < K_; ++k) sol.duals[k] = std::max(0.0, -it.pic(k));
  return sol;
}

}  // namespace

LpSolution solve_lp(const SparseLp& lp, const IpmOptions& options) {
  BlockIpm ipm(lp, options);
  return ipm.run();
}

}  // namespace wcmdp
