#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tabb/agents.hpp"
#include "tabb/fit.hpp"
#include "tabb/recovery.hpp"

namespace tabb::cli {

enum class ScenarioKind { simulate, propagate, sweep_delta, switch_rate, fit, recover, new_arm };

std::string kind_name(ScenarioKind kind);
std::optional<ScenarioKind> kind_from_name(const std::string& name);

struct AgentBlock {
  enum class Type { q, bayes };
  Type type = Type::q;
  LearningRateSet rates;
  Policy policy;
  QState q0{0.5, 0.5};

  AgentSpec spec() const;
};

struct EnsembleBlock {
  int replicas = 10'000;
  unsigned threads = 1;
};

struct SweepBlock {
  std::vector<double> x;
  std::vector<double> beta;
  std::vector<double> p;
};

struct MinSwitchBlock {
  std::vector<double> alpha1;
  double alpha2 = 0.01;
  std::vector<int> tau_c;
};

struct FitBlock {
  std::string sessions;
  std::vector<ModelFamily> models{kAllFamilies.begin(), kAllFamilies.end()};
  int restarts = 20;
  double tolerance = 1e-8;
  double beta_max = 50.0;
};

struct RecoverBlock {
  int n_agents = 500;
  RecoveryGenerator generator;
};

struct NewArmBlock {
  std::string sessions;
  std::string subject;  ///< empty: first subject in the file
  ModelFamily q_model = ModelFamily::full;
  std::vector<double> p3;
  int training_trials = 24;
  int reps = 10'000;
};

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::simulate;
  std::uint64_t seed = 0;
  Environment environment;
  std::optional<AgentBlock> agent;
  EnsembleBlock ensemble;
  std::string output_directory;
  int steps = 0;  ///< propagate: trials to propagate (0: environment horizon)
  SweepBlock sweep;
  std::optional<MinSwitchBlock> min_switch;
  FitBlock fit;
  RecoverBlock recover;
  NewArmBlock new_arm;
};

/// One problem found in a config file. `line` is 0 when it cannot be located.
struct Diagnostic {
  int line = 0;
  std::string field;
  std::string message;

  std::string format(const std::string& file) const;
};

struct ParseResult {
  std::optional<ScenarioConfig> config;
  std::vector<Diagnostic> diagnostics;
};

/// Parses and validates a config document. The config is set only when there
/// are no diagnostics.
ParseResult parse_config(const std::string& text);

/// Canonical JSON form: every field of the blocks the scenario kind uses,
/// with defaults filled in and grids expanded.
nlohmann::ordered_json to_json(const ScenarioConfig& config);
std::string serialize_config(const ScenarioConfig& config);

/// 64-bit FNV-1a, printed as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace tabb::cli
