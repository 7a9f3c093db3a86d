#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "wcmdp/model.hpp"

namespace wcmdp {

struct OracleOptions {
  std::size_t max_pairs = 1'000'000;  // joint state-action pairs
  /// Cap on the dense simplex tableau (rows x columns) to bound memory.
  std::size_t max_tableau_entries = 50'000'000;
  double tol = 1e-10;
};

struct OracleResult {
  double R_star = 0.0;            // max over joint start states of the gain, per arm
  std::vector<double> gain;       // optimal gain per joint state (not divided by N)
  int joint_states = 0;
  std::size_t joint_pairs = 0;
};

class OracleError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Optimal long-run average reward of the N-armed problem. Builds the
/// product MDP with joint actions restricted to those meeting every budget
/// and solves the multichain average-reward LP.
OracleResult exact_oracle(const WcmdpInstance& instance, const OracleOptions& options = {});

}  // namespace wcmdp
