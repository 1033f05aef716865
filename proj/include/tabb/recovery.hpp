#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tabb/fit.hpp"

namespace tabb {

/// Two-sided sign test on paired differences; zero differences are dropped.
struct SignTest {
  int positive = 0;
  int negative = 0;
  double p_value = 1.0;
};

SignTest sign_test(std::span<const double> differences);

/// Which simulated agents feed the recovery experiment.
struct RecoveryGenerator {
  enum class Kind { bayes_softmax, bayes_greedy, q_learner };
  Kind kind = Kind::bayes_softmax;
  double beta = 10.0;
  /// q_learner only.
  RateQuad rates = RateQuad::uniform(0.3);
};

struct RecoveryOptions {
  int n_agents = 500;
  RecoveryGenerator generator;
  FitOptions fit;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct RecoveryReport {
  int n_agents = 0;
  /// Ensemble means of the fitted (a+c, a-c, a+u, a-u) and beta.
  RateQuad mean_rates;
  RateQuad se_rates;
  double mean_beta = 0.0;
  double frac_positivity = 0.0;   ///< a+c > a-c
  double frac_confirmation = 0.0; ///< a+c > a-c and a-u > a+u
  /// Sign tests on a+c - a-c and a-u - a+u; absent with fewer than two agents.
  std::optional<SignTest> positivity_test;
  std::optional<SignTest> unchosen_test;
  int failed_fits = 0;
  std::vector<FitResult> fits;
};

/// Simulates n agents in `env` (agent i uses RngStream(seed, i)), fits the Full
/// model to each session and summarises the fitted learning rates.
RecoveryReport recover_bias(const Environment& env, const RecoveryOptions& opts);

struct NewArmRow {
  double p3 = 0.0;
  double pi3_bayes = 0.0;
  double pi3_q = 0.0;
};

struct NewArmOptions {
  int training_trials = 24;
  int reps = 10'000;
  std::uint64_t seed = 0;
};

/// Probability of preferring a newly introduced arm 3 over arm 1 after
/// training on arm 3 alone, under the fitted Bayes model and a fitted
/// Q-learning model. Arm 1's value is taken at the end of the session; each
/// model trains arm 3 with its own learning rule from 1/2 and chooses by
/// softmax with its fitted beta. All p3 values and both models share the
/// reward uniforms of each repetition.
std::vector<NewArmRow> new_arm_curve(const FitResult& fit_bayes, const FitResult& fit_q,
                                     const SessionData& session, std::span<const double> p3_grid,
                                     const NewArmOptions& opts = {});

}  // namespace tabb
