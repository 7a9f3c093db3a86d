#include "wcmdp/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "wcmdp/rng.hpp"

namespace wcmdp {

double WcmdpInstance::alpha_min() const {
  return alpha.empty() ? 0.0 : *std::min_element(alpha.begin(), alpha.end());
}

void WcmdpInstance::refresh_bounds() {
  r_max = 0.0;
  c_max = 0.0;
  for (const auto& arm : arms) {
    for (double r : arm.reward) r_max = std::max(r_max, std::abs(r));
    for (double c : arm.cost) c_max = std::max(c_max, c);
  }
}

WcmdpInstance make_instance(std::vector<ArmModel> arms, std::vector<double> alpha) {
  WcmdpInstance inst;
  inst.num_constraints = static_cast<int>(alpha.size());
  inst.arms = std::move(arms);
  inst.alpha = std::move(alpha);
  inst.refresh_bounds();
  return inst;
}

std::vector<double> SystemState::one_hot(int num_states) const {
  std::vector<double> x(states.size() * static_cast<std::size_t>(num_states), 0.0);
  for (std::size_t i = 0; i < states.size(); ++i) {
    x[i * num_states + states[i]] = 1.0;
  }
  return x;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

constexpr double kRowSumTol = 1e-9;

std::string format_value(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

}  // namespace

std::string describe(const Violation& v) {
  std::ostringstream os;
  if (v.arm >= 0) os << "arm " << v.arm << ": ";
  os << v.field << ": " << v.detail << " (value " << format_value(v.value) << ")";
  return os.str();
}

ValidationReport validate(const WcmdpInstance& inst) {
  ValidationReport report;
  auto add = [&](int arm, std::string field, std::string detail, double value) {
    report.push_back({arm, std::move(field), std::move(detail), value});
  };

  const int K = inst.num_constraints;
  if (inst.arms.empty()) add(-1, "arms", "instance has no arms", 0.0);
  if (static_cast<int>(inst.alpha.size()) != K) {
    add(-1, "alpha", "length differs from K", static_cast<double>(inst.alpha.size()));
  }
  for (std::size_t k = 0; k < inst.alpha.size(); ++k) {
    if (!(inst.alpha[k] > 0.0) || !std::isfinite(inst.alpha[k])) {
      add(-1, "alpha", "alpha[" + std::to_string(k) + "] must be positive", inst.alpha[k]);
    }
  }
  if (inst.arms.empty()) return report;

  const int S = inst.num_states();
  const int A = inst.num_actions();
  if (S < 1) add(-1, "S", "num_states must be positive", S);
  if (A < 1) add(-1, "A", "num_actions must be positive", A);

  double r_max = 0.0;
  double c_max = 0.0;
  for (int i = 0; i < inst.num_arms(); ++i) {
    const ArmModel& arm = inst.arms[i];
    if (arm.num_states != S || arm.num_actions != A || arm.num_constraints != K) {
      add(i, "shape", "arm dimensions differ from the instance", arm.num_states);
      continue;
    }
    const auto sa = static_cast<std::size_t>(S) * A;
    if (arm.transition.size() != sa * S || arm.reward.size() != sa ||
        arm.cost.size() != sa * K) {
      add(i, "shape", "table sizes inconsistent with dimensions",
          static_cast<double>(arm.transition.size()));
      continue;
    }
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        double sum = 0.0;
        for (int n = 0; n < S; ++n) {
          const double p = arm.P(s, a, n);
          if (!(p >= 0.0 && p <= 1.0)) {
            add(i, "transition",
                "entry outside [0,1] at (s=" + std::to_string(s) + ",a=" + std::to_string(a) +
                    ",s'=" + std::to_string(n) + ")",
                p);
          }
          sum += p;
        }
        if (!(std::abs(sum - 1.0) <= kRowSumTol)) {
          add(i, "transition",
              "row sum differs from 1 at (s=" + std::to_string(s) + ",a=" + std::to_string(a) + ")",
              sum);
        }
        const double r = arm.r(s, a);
        if (!std::isfinite(r)) {
          add(i, "reward", "non-finite at (s=" + std::to_string(s) + ",a=" + std::to_string(a) + ")",
              r);
        } else {
          r_max = std::max(r_max, std::abs(r));
        }
        for (int k = 0; k < K; ++k) {
          const double c = arm.c(k, s, a);
          const std::string where = "(k=" + std::to_string(k) + ",s=" + std::to_string(s) +
                                    ",a=" + std::to_string(a) + ")";
          if (!std::isfinite(c) || c < 0.0) {
            add(i, "cost", "negative or non-finite at " + where, c);
          } else {
            c_max = std::max(c_max, c);
          }
          if (a == 0 && c != 0.0) {
            add(i, "cost", "zero-cost action 0 has nonzero cost at " + where, c);
          }
        }
      }
    }
  }
  if (inst.r_max != r_max) add(-1, "r_max", "cached value differs from tables", inst.r_max);
  if (inst.c_max != c_max) add(-1, "c_max", "cached value differs from tables", inst.c_max);
  return report;
}

// ---------------------------------------------------------------------------
// Generation

namespace {

void check_dimensions(const GeneratorConfig& cfg) {
  if (cfg.num_arms < 1) throw ConfigError("N must be at least 1");
  if (cfg.num_states < 1) throw ConfigError("number of states must be at least 1");
  if (cfg.num_actions < 1) throw ConfigError("number of actions must be at least 1");
  if (cfg.num_constraints < 1) throw ConfigError("K must be at least 1");
}

std::vector<double> sample_alpha(Rng& rng, int K) {
  std::vector<double> alpha(K);
  for (auto& a : alpha) a = 0.05 * static_cast<double>(1 + rng.index(9));
  return alpha;
}

ArmModel sample_arm(Rng& rng, const GeneratorConfig& cfg) {
  const int S = cfg.num_states;
  const int A = cfg.num_actions;
  const int K = cfg.num_constraints;
  ArmModel arm(S, A, K);

  // Dirichlet(1,...,1) rows from normalized exponentials.
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      double total = 0.0;
      for (int n = 0; n < S; ++n) {
        arm.P(s, a, n) = rng.exponential();
        total += arm.P(s, a, n);
      }
      for (int n = 0; n < S; ++n) arm.P(s, a, n) /= total;
    }
  }
  for (int s = 0; s < S; ++s) {
    for (int a = 1; a < A; ++a) arm.r(s, a) = rng.uniform();
  }
  if (cfg.cost_mode == CostMode::ActionOnly) {
    for (int k = 0; k < K; ++k) {
      for (int a = 1; a < A; ++a) {
        const double c = rng.uniform();
        for (int s = 0; s < S; ++s) arm.c(k, s, a) = c;
      }
    }
  } else {
    for (int k = 0; k < K; ++k) {
      for (int s = 0; s < S; ++s) {
        for (int a = 1; a < A; ++a) arm.c(k, s, a) = rng.uniform();
      }
    }
  }
  return arm;
}

}  // namespace

WcmdpInstance generate_fully_heterogeneous(const GeneratorConfig& cfg) {
  check_dimensions(cfg);
  Rng rng(cfg.seed);
  auto alpha = sample_alpha(rng, cfg.num_constraints);
  std::vector<ArmModel> arms;
  arms.reserve(cfg.num_arms);
  for (int i = 0; i < cfg.num_arms; ++i) arms.push_back(sample_arm(rng, cfg));
  return make_instance(std::move(arms), std::move(alpha));
}

WcmdpInstance generate_typed(const GeneratorConfig& cfg) {
  check_dimensions(cfg);
  if (cfg.num_types < 1) throw ConfigError("number of types must be at least 1");
  if (cfg.num_arms % cfg.num_types != 0) {
    throw ConfigError("N=" + std::to_string(cfg.num_arms) + " is not divisible by " +
                      std::to_string(cfg.num_types) + " types");
  }
  Rng rng(cfg.seed);
  auto alpha = sample_alpha(rng, cfg.num_constraints);
  std::vector<ArmModel> types;
  types.reserve(cfg.num_types);
  for (int t = 0; t < cfg.num_types; ++t) types.push_back(sample_arm(rng, cfg));

  const int per_type = cfg.num_arms / cfg.num_types;
  std::vector<ArmModel> arms;
  arms.reserve(cfg.num_arms);
  for (int i = 0; i < cfg.num_arms; ++i) arms.push_back(types[i / per_type]);
  return make_instance(std::move(arms), std::move(alpha));
}

WcmdpInstance generate(const GeneratorConfig& cfg) {
  return cfg.family == Family::Typed ? generate_typed(cfg) : generate_fully_heterogeneous(cfg);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

void put_number(std::ostream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

template <class F>
void put_list(std::ostream& out, int n, F&& item) {
  out << '[';
  for (int j = 0; j < n; ++j) {
    if (j) out << ',';
    item(j);
  }
  out << ']';
}

}  // namespace

void write_instance_json(std::ostream& out, const WcmdpInstance& inst) {
  const int S = inst.num_states();
  const int A = inst.num_actions();
  const int K = inst.num_constraints;
  out << "{\"N\":" << inst.num_arms() << ",\"S\":" << S << ",\"A\":" << A << ",\"K\":" << K
      << ",\"alpha\":";
  put_list(out, K, [&](int k) { put_number(out, inst.alpha[k]); });
  out << ",\"arms\":[";
  for (int i = 0; i < inst.num_arms(); ++i) {
    const ArmModel& arm = inst.arms[i];
    out << (i ? ",\n" : "\n") << "{\"P\":";
    put_list(out, S, [&](int s) {
      put_list(out, A, [&](int a) {
        put_list(out, S, [&](int n) { put_number(out, arm.P(s, a, n)); });
      });
    });
    out << ",\"r\":";
    put_list(out, S, [&](int s) { put_list(out, A, [&](int a) { put_number(out, arm.r(s, a)); }); });
    out << ",\"c\":";
    put_list(out, K, [&](int k) {
      put_list(out, S, [&](int s) {
        put_list(out, A, [&](int a) { put_number(out, arm.c(k, s, a)); });
      });
    });
    out << '}';
  }
  out << "\n]}\n";
}

std::string instance_to_json(const WcmdpInstance& inst) {
  std::ostringstream os;
  write_instance_json(os, inst);
  return os.str();
}

WcmdpInstance read_instance_json(std::istream& in) {
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("instance JSON parse error: ") + e.what());
  }
  try {
    const int N = doc.at("N").get<int>();
    const int S = doc.at("S").get<int>();
    const int A = doc.at("A").get<int>();
    const int K = doc.at("K").get<int>();
    auto alpha = doc.at("alpha").get<std::vector<double>>();
    const auto& arms_doc = doc.at("arms");
    if (static_cast<int>(arms_doc.size()) != N) throw FormatError("arms length differs from N");
    if (static_cast<int>(alpha.size()) != K) throw FormatError("alpha length differs from K");

    std::vector<ArmModel> arms;
    arms.reserve(N);
    for (const auto& a_doc : arms_doc) {
      ArmModel arm(S, A, K);
      const auto& P = a_doc.at("P");
      const auto& r = a_doc.at("r");
      const auto& c = a_doc.at("c");
      if (static_cast<int>(P.size()) != S || static_cast<int>(r.size()) != S ||
          static_cast<int>(c.size()) != K) {
        throw FormatError("arm table has the wrong outer length");
      }
      for (int s = 0; s < S; ++s) {
        if (static_cast<int>(P[s].size()) != A || static_cast<int>(r[s].size()) != A) {
          throw FormatError("arm table has the wrong action length");
        }
        for (int a = 0; a < A; ++a) {
          if (static_cast<int>(P[s][a].size()) != S) throw FormatError("transition row length");
          for (int n = 0; n < S; ++n) arm.P(s, a, n) = P[s][a][n].get<double>();
          arm.r(s, a) = r[s][a].get<double>();
        }
      }
      for (int k = 0; k < K; ++k) {
        if (static_cast<int>(c[k].size()) != S) throw FormatError("cost table length");
        for (int s = 0; s < S; ++s) {
          if (static_cast<int>(c[k][s].size()) != A) throw FormatError("cost row length");
          for (int a = 0; a < A; ++a) arm.c(k, s, a) = c[k][s][a].get<double>();
        }
      }
      arms.push_back(std::move(arm));
    }
    return make_instance(std::move(arms), std::move(alpha));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("instance JSON schema error: ") + e.what());
  }
}

WcmdpInstance instance_from_json(const std::string& text) {
  std::istringstream is(text);
  return read_instance_json(is);
}

WcmdpInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open instance file " + path);
  return read_instance_json(in);
}

void save_instance(const std::string& path, const WcmdpInstance& instance) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write instance file " + path);
  write_instance_json(out, instance);
}

std::string instance_hash(const WcmdpInstance& instance) {
  const std::string text = instance_to_json(instance);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace wcmdp
