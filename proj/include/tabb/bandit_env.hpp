#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace tabb {

/// Raised when a user-supplied value violates a documented range or
/// cross-field constraint.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Arm : std::uint8_t { first = 0, second = 1 };

constexpr int index(Arm a) { return static_cast<int>(a); }
constexpr Arm other(Arm a) { return a == Arm::first ? Arm::second : Arm::first; }
/// 1-based label used in CSV files.
constexpr int label(Arm a) { return index(a) + 1; }
Arm arm_from_label(int label);

/// Two-armed Bernoulli bandit with stationary reward probabilities.
struct Environment {
  double p1 = 0.5;
  double p2 = 0.5;
  bool counterfactual = true;
  int horizon = 24;

  double p(Arm a) const { return a == Arm::first ? p1 : p2; }
  bool symmetric() const { return p1 == p2; }
};

Environment make_environment(double p1, double p2, bool counterfactual, int horizon);

struct RewardPair {
  int r1 = 0;
  int r2 = 0;

  int of(Arm a) const { return a == Arm::first ? r1 : r2; }
};

/// Reproducible random stream keyed by (master seed, replica index).
///
/// Distinct replica indices are decorrelated through std::seed_seq; copying a
/// stream snapshots its position, so a copy replays the same draws.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t replica_index);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t replica_index() const { return replica_; }

  /// Uniform double in [0, 1) built from the top 53 bits of one engine draw.
  double uniform();
  /// 1 with probability p, else 0. Consumes exactly one draw.
  int bernoulli(double p) { return uniform() < p ? 1 : 0; }

 private:
  std::uint64_t seed_;
  std::uint64_t replica_;
  std::mt19937_64 engine_;
};

/// Draws both arms' rewards (arm 1 first), whatever the feedback regime.
RewardPair sample_rewards(const Environment& env, RngStream& rng);

}  // namespace tabb
