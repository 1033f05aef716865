#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "tabb/bandit_env.hpp"

namespace tabb {

/// Action values of the two arms.
struct QState {
  double q1 = 0.5;
  double q2 = 0.5;

  double of(Arm a) const { return a == Arm::first ? q1 : q2; }
  double& of(Arm a) { return a == Arm::first ? q1 : q2; }
  QState swapped() const { return {q2, q1}; }
};

/// The four prediction-error learning rates: chosen/unchosen arm, positive/negative error.
struct RateQuad {
  double plus_c = 0.0;
  double minus_c = 0.0;
  double plus_u = 0.0;
  double minus_u = 0.0;

  static RateQuad uniform(double alpha) { return {alpha, alpha, alpha, alpha}; }
  bool unbiased() const {
    return plus_c == minus_c && minus_c == plus_u && plus_u == minus_u;
  }
};

/// Time dependence of the learning rates. `step` and `bayes` replace all four
/// rates with a single unbiased value at each trial.
struct Schedule {
  enum class Kind { constant, step, bayes };
  Kind kind = Kind::constant;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  int tau_c = 0;

  static Schedule constant() { return {}; }
  static Schedule step(double alpha1, double alpha2, int tau_c) {
    return {Kind::step, alpha1, alpha2, tau_c};
  }
  static Schedule bayes() { return {Kind::bayes, 0.0, 0.0, 0}; }
};

struct LearningRateSet {
  RateQuad base;
  Schedule schedule;

  /// Rates in force at trial t. Without counterfactual feedback the
  /// unchosen-arm rates are zero.
  RateQuad at(int t, bool counterfactual = true) const;

  /// Throws ValidationError when any rate leaves [0, 1] or when unchosen-arm
  /// rates are nonzero in a task without counterfactual feedback.
  void validate(bool counterfactual) const;
};

/// Action-selection rule.
struct Policy {
  enum class Mode { softmax, greedy };
  double beta = 1.0;
  Mode mode = Mode::softmax;
  /// Greedy ties go to arm 1 unless this is set, in which case they are a coin flip.
  bool random_tie_break = false;
};

/// Probability of choosing arm 1.
double softmax_policy(QState q, const Policy& policy);

/// Picks an arm from one uniform draw u in [0, 1).
Arm choose_action(QState q, const Policy& policy, double u);

/// Asymmetric prediction-error update of both action values. In tasks without
/// counterfactual feedback only the chosen arm moves.
QState q_update(QState q, Arm chosen, RewardPair rewards, const RateQuad& rates,
                bool counterfactual);
QState q_update(QState q, Arm chosen, RewardPair rewards, const LearningRateSet& rates,
                int t, bool counterfactual);

/// Beta-posterior success/failure counts per arm (uniform prior).
struct BeliefState {
  int a1 = 0;
  int b1 = 0;
  int a2 = 0;
  int b2 = 0;

  int successes(Arm a) const { return a == Arm::first ? a1 : a2; }
  int failures(Arm a) const { return a == Arm::first ? b1 : b2; }
  int pulls(Arm a) const { return successes(a) + failures(a); }
  int total() const { return a1 + b1 + a2 + b2; }

  friend bool operator==(const BeliefState&, const BeliefState&) = default;
};

BeliefState belief_update(BeliefState b, Arm chosen, RewardPair rewards, bool counterfactual);

/// Mean of the beta posterior, (a + 1) / (a + b + 2).
double posterior_mean(const BeliefState& b, Arm arm);
QState posterior_means(const BeliefState& b);

/// Learning rate at which prediction-error updating reproduces the posterior
/// mean: 1 / (t + 3) with counterfactual feedback.
double effective_rate(int t);
/// Per-arm variant used without counterfactual feedback: 1 / (a_i + b_i + 3).
double effective_rate(const BeliefState& b, Arm arm);

/// Probability of choosing arm 1 under the posterior-mean policy. Greedy mode
/// returns an indicator (ties to arm 1).
double bayes_greedy_action(const BeliefState& b, const Policy& policy);
Arm bayes_greedy_arm(const BeliefState& b);

struct QAgentSpec {
  LearningRateSet rates;
  Policy policy;
  QState q0{0.5, 0.5};
};

struct BayesAgentSpec {
  Policy policy;
};

using AgentSpec = std::variant<QAgentSpec, BayesAgentSpec>;

struct TrialRecord {
  int t = 0;
  Arm action = Arm::first;
  int r_chosen = 0;
  std::optional<int> r_unchosen;
  /// Values after this trial's update (posterior means for Bayes agents).
  QState values;
};

struct Trajectory {
  std::uint64_t replica = 0;
  QState initial;
  std::vector<TrialRecord> trials;
  /// Bayes agents only: beliefs before trial 0 through after the last trial.
  std::vector<BeliefState> beliefs;
};

/// Simulates one agent for env.horizon trials. Each trial consumes one uniform
/// for the action, then both rewards, so agents fed the same stream share
/// every random draw.
Trajectory run_trajectory(const AgentSpec& agent, const Environment& env, RngStream& rng);

/// CSV rows: replica,t,action,r_chosen,r_unchosen,q1,q2 (r_unchosen empty when hidden).
void write_trajectory_csv(std::ostream& out, std::span<const Trajectory> trajectories);

}  // namespace tabb
