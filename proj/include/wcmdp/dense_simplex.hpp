#pragma once

#include <stdexcept>
#include <vector>

namespace wcmdp {

/// min c'x  s.t.  Ax = b, x >= 0, with A stored row-major.
struct DenseLp {
  int rows = 0;
  int cols = 0;
  std::vector<double> A;
  std::vector<double> b;
  std::vector<double> c;

  double& at(int r, int j) { return A[static_cast<std::size_t>(r) * cols + j]; }
  double at(int r, int j) const { return A[static_cast<std::size_t>(r) * cols + j]; }
};

enum class DenseStatus { Optimal, Infeasible, Unbounded };

struct DenseLpResult {
  DenseStatus status = DenseStatus::Optimal;
  std::vector<double> x;
  double objective = 0.0;
  /// Row multipliers pi with c - A'pi >= 0 at the optimum.
  std::vector<double> duals;
  int pivots = 0;
};

class DenseLpError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Two-phase tableau simplex with Bland's rule. Meant for small problems
/// (exact oracles and cross-checks), not for the full relaxation.
DenseLpResult solve_dense_lp(const DenseLp& lp, double tol = 1e-10);

}  // namespace wcmdp
