#include "wcmdp/dense_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wcmdp {

namespace {

class Tableau {
 public:
  Tableau(int m, int n) : m_(m), n_(n), width_(n + 1), t_((m + 1) * static_cast<std::size_t>(n + 1), 0.0) {}

  double& at(int r, int j) { return t_[static_cast<std::size_t>(r) * width_ + j]; }
  double& rhs(int r) { return at(r, n_); }
  double& cost(int j) { return at(m_, j); }

  void pivot(int pr, int pc) {
    const double inv = 1.0 / at(pr, pc);
    for (int j = 0; j < width_; ++j) at(pr, j) *= inv;
    at(pr, pc) = 1.0;
    for (int r = 0; r <= m_; ++r) {
      if (r == pr) continue;
      const double f = at(r, pc);
      if (f == 0.0) continue;
      for (int j = 0; j < width_; ++j) at(r, j) -= f * at(pr, j);
      at(r, pc) = 0.0;
    }
  }

 private:
  int m_, n_, width_;
  std::vector<double> t_;
};

}  // namespace

DenseLpResult solve_dense_lp(const DenseLp& lp, double tol) {
  const int m = lp.rows;
  const int n = lp.cols;
  if (static_cast<int>(lp.b.size()) != m || static_cast<int>(lp.c.size()) != n ||
      lp.A.size() != static_cast<std::size_t>(m) * n) {
    throw DenseLpError("dense LP dimensions are inconsistent");
  }
  // Columns: n structural, then m artificial.
  const int total = n + m;
  Tableau t(m, total);
  std::vector<double> sign(m, 1.0);
  std::vector<int> basis(m);
  for (int r = 0; r < m; ++r) {
    sign[r] = lp.b[r] < 0.0 ? -1.0 : 1.0;
    for (int j = 0; j < n; ++j) t.at(r, j) = sign[r] * lp.at(r, j);
    t.at(r, n + r) = 1.0;
    t.rhs(r) = sign[r] * lp.b[r];
    basis[r] = n + r;
  }

  DenseLpResult res;
  auto run = [&](int allowed) {
    for (;;) {
      int enter = -1;
      for (int j = 0; j < allowed; ++j) {
        if (t.cost(j) < -tol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int r = 0; r < m; ++r) {
        const double a = t.at(r, enter);
        if (a <= tol) continue;
        const double ratio = t.rhs(r) / a;
        if (leave < 0 || ratio < best - 1e-14) {
          best = ratio;
          leave = r;
        } else if (ratio <= best + 1e-14 && basis[r] < basis[leave]) {
          leave = r;
        }
      }
      if (leave < 0) return false;
      t.pivot(leave, enter);
      basis[leave] = enter;
      ++res.pivots;
    }
  };

  // Phase 1: minimize the sum of artificials.
  for (int j = 0; j <= total; ++j) t.cost(j) = 0.0;
  for (int r = 0; r < m; ++r) {
    for (int j = 0; j < n; ++j) t.cost(j) -= t.at(r, j);
    t.cost(total) -= t.rhs(r);
  }
  run(n);
  double b_scale = 1.0;
  for (int r = 0; r < m; ++r) b_scale = std::max(b_scale, std::abs(lp.b[r]));
  if (-t.cost(total) > 1e-9 * b_scale) {
    res.status = DenseStatus::Infeasible;
    return res;
  }
  // Drive remaining artificials out of the basis where a structural pivot
  // exists; rows where none exists are redundant.
  for (int r = 0; r < m; ++r) {
    if (basis[r] < n) continue;
    for (int j = 0; j < n; ++j) {
      if (std::abs(t.at(r, j)) > 1e-9) {
        t.pivot(r, j);
        basis[r] = j;
        ++res.pivots;
        break;
      }
    }
  }

  // Phase 2: original costs, artificials may not re-enter.
  for (int j = 0; j <= total; ++j) t.cost(j) = j < n ? lp.c[j] : 0.0;
  for (int r = 0; r < m; ++r) {
    const double cb = basis[r] < n ? lp.c[basis[r]] : 0.0;
    if (cb == 0.0) continue;
    for (int j = 0; j <= total; ++j) t.cost(j) -= cb * t.at(r, j);
  }
  if (!run(n)) {
    res.status = DenseStatus::Unbounded;
    return res;
  }

  res.status = DenseStatus::Optimal;
  res.x.assign(n, 0.0);
  for (int r = 0; r < m; ++r) {
    if (basis[r] < n) res.x[basis[r]] = t.rhs(r);
  }
  res.objective = 0.0;
  for (int j = 0; j < n; ++j) res.objective += lp.c[j] * res.x[j];
  res.duals.resize(m);
  for (int r = 0; r < m; ++r) res.duals[r] = -t.cost(n + r) * sign[r];
  return res;
}

}  // namespace wcmdp
