#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "tabb/agents.hpp"

namespace tabb {

class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Finite-horizon Bayes-optimal value and policy over every belief reachable
/// from the uniform prior, built by backward induction (undiscounted, V = 0 at
/// the horizon).
///
/// Without counterfactual feedback a belief after t trials has counts summing
/// to t; shells are stored as flat arrays in lexicographic (a1, b1, a2) order.
/// With counterfactual feedback both arms are observed each trial, so a shell
/// is the (t + 1)^2 grid of success counts (a1, a2) with a_i + b_i = t.
class BayesPlan {
 public:
  int horizon() const { return horizon_; }
  bool counterfactual() const { return counterfactual_; }

  /// Trial index (depth) of a belief; throws if it lies on no shell.
  int depth(const BeliefState& b) const;
  double value(const BeliefState& b) const;
  /// Optimal arm at a belief with depth < horizon; ties go to arm 1.
  Arm action(const BeliefState& b) const;

  /// Number of stored beliefs, all shells included.
  std::size_t size() const;

  /// Offset of a belief inside its shell (lexicographic rank).
  static std::size_t shell_rank(const BeliefState& b, bool counterfactual);
  static std::size_t shell_size(int depth, bool counterfactual);

 private:
  friend BayesPlan bayes_optimal_plan(int, bool, std::size_t);

  int horizon_ = 0;
  bool counterfactual_ = false;
  std::vector<std::vector<double>> values_;
  std::vector<std::vector<std::uint8_t>> actions_;
};

/// Builds the plan. Throws ResourceError when the tables would exceed
/// `memory_limit_bytes`, ValidationError when horizon < 1.
BayesPlan bayes_optimal_plan(int horizon, bool counterfactual,
                             std::size_t memory_limit_bytes = std::size_t{1} << 30);

}  // namespace tabb
