#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace wcmdp {

using StateIndex = int;
using ActionIndex = int;

/// One arm's MDP. Tables are stored flat in row-major order:
/// transition[s][a][s'], reward[s][a], cost[k][s][a]. Action 0 is the
/// zero-cost action.
struct ArmModel {
  int num_states = 0;
  int num_actions = 0;
  int num_constraints = 0;
  std::vector<double> transition;
  std::vector<double> reward;
  std::vector<double> cost;

  ArmModel() = default;
  ArmModel(int states, int actions, int constraints)
      : num_states(states),
        num_actions(actions),
        num_constraints(constraints),
        transition(static_cast<std::size_t>(states) * actions * states, 0.0),
        reward(static_cast<std::size_t>(states) * actions, 0.0),
        cost(static_cast<std::size_t>(constraints) * states * actions, 0.0) {}

  double& P(int s, int a, int next) {
    return transition[(static_cast<std::size_t>(s) * num_actions + a) * num_states + next];
  }
  double P(int s, int a, int next) const {
    return transition[(static_cast<std::size_t>(s) * num_actions + a) * num_states + next];
  }
  /// Pointer to the distribution P(.|s,a), length num_states.
  const double* P_row(int s, int a) const {
    return transition.data() + (static_cast<std::size_t>(s) * num_actions + a) * num_states;
  }
  double& r(int s, int a) { return reward[static_cast<std::size_t>(s) * num_actions + a]; }
  double r(int s, int a) const { return reward[static_cast<std::size_t>(s) * num_actions + a]; }
  double& c(int k, int s, int a) {
    return cost[(static_cast<std::size_t>(k) * num_states + s) * num_actions + a];
  }
  double c(int k, int s, int a) const {
    return cost[(static_cast<std::size_t>(k) * num_states + s) * num_actions + a];
  }

  bool operator==(const ArmModel&) const = default;
};

/// N arms coupled by K per-step budgets sum_i c_{k,i}(s_i, a_i) <= alpha_k N.
struct WcmdpInstance {
  std::vector<ArmModel> arms;
  int num_constraints = 0;
  std::vector<double> alpha;
  double r_max = 0.0;
  double c_max = 0.0;

  int num_arms() const { return static_cast<int>(arms.size()); }
  int num_states() const { return arms.empty() ? 0 : arms.front().num_states; }
  int num_actions() const { return arms.empty() ? 0 : arms.front().num_actions; }
  double budget(int k) const { return alpha[k] * static_cast<double>(arms.size()); }
  double alpha_min() const;

  /// Recomputes the cached r_max / c_max from the tables.
  void refresh_bounds();

  bool operator==(const WcmdpInstance&) const = default;
};

/// Builds an instance and fills the cached bounds.
WcmdpInstance make_instance(std::vector<ArmModel> arms, std::vector<double> alpha);

/// Arm states S_i, indexed by arm. The one-hot matrix X is exposed on demand.
struct SystemState {
  std::vector<StateIndex> states;

  int num_arms() const { return static_cast<int>(states.size()); }
  /// Row-major N x |S| one-hot matrix X with X_i(s) = 1{S_i = s}.
  std::vector<double> one_hot(int num_states) const;
};

struct Violation {
  int arm = -1;  // -1 for instance-level fields
  std::string field;
  std::string detail;
  double value = 0.0;
};

using ValidationReport = std::vector<Violation>;

/// Checks every ArmModel / WcmdpInstance invariant. Empty report iff valid.
ValidationReport validate(const WcmdpInstance& instance);

std::string describe(const Violation& v);

enum class Family { FullyHeterogeneous, Typed };
enum class CostMode { StateAction, ActionOnly };

struct GeneratorConfig {
  std::uint64_t seed = 0;
  int num_arms = 100;
  int num_states = 10;
  int num_actions = 4;
  int num_constraints = 4;
  Family family = Family::FullyHeterogeneous;
  int num_types = 10;
  CostMode cost_mode = CostMode::StateAction;
};

class ConfigError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Independent random arms: Dirichlet(1,...,1) transition rows, U[0,1]
/// rewards and costs for a != 0, alpha_k uniform on {0.05, ..., 0.45}.
/// Budget coefficients are drawn first, then arms in index order, so the
/// first n arms do not depend on N.
WcmdpInstance generate_fully_heterogeneous(const GeneratorConfig& config);

/// num_types parameter sets drawn as above, arms split into equal contiguous
/// blocks sharing one set. Throws ConfigError unless N % num_types == 0.
WcmdpInstance generate_typed(const GeneratorConfig& config);

/// Dispatches on config.family.
WcmdpInstance generate(const GeneratorConfig& config);

class FormatError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// JSON instance document {"N","S","A","K","alpha","arms":[{"P","r","c"}]}
/// with every number printed to 17 significant digits.
void write_instance_json(std::ostream& out, const WcmdpInstance& instance);
std::string instance_to_json(const WcmdpInstance& instance);
WcmdpInstance read_instance_json(std::istream& in);
WcmdpInstance instance_from_json(const std::string& text);
WcmdpInstance load_instance(const std::string& path);
void save_instance(const std::string& path, const WcmdpInstance& instance);

/// FNV-1a digest of the serialized instance; stable across platforms.
std::string instance_hash(const WcmdpInstance& instance);

}  // namespace wcmdp
