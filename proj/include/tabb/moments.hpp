#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <vector>

#include "tabb/agents.hpp"

namespace tabb {

/// First and second moments of the action-value distribution in a symmetric
/// environment, where <Q1> = <Q2> and <Q1^2> = <Q2^2>.
struct MomentState {
  double m1 = 0.5;   ///< <Q1>
  double m11 = 0.25; ///< <Q1^2>
  double m12 = 0.25; ///< <Q1 Q2>

  /// <Q1^2> - <Q1 Q2>, half the mean squared gap between the two values.
  double delta() const { return m11 - m12; }
  double variance() const { return m11 - m1 * m1; }

  static MomentState point_mass(double q) { return {q, q * q, q * q}; }
};

/// Policy-weighted expectations needed to close the moment recursions.
struct PolicyMoments {
  double pi = 0.5;      ///< <pi>
  double pi_q1 = 0.0;   ///< <pi Q1>
  double pi_q1sq = 0.0; ///< <pi Q1^2>
};

/// Coefficients of the exact one-step moment recursions for learning rates
/// `RateQuad` in a symmetric environment with reward probability p.
///
/// The baseline terms describe the step in which arm 1 is unchosen (and arm 2
/// chosen); the policy terms are the corrections weighted by the probability
/// of choosing arm 1.
struct MomentCoefficients {
  struct Mean {
    double decay = 0.0;         ///< multiplies <Q1>
    double policy_slope = 0.0;  ///< multiplies <pi Q1>
    double policy_offset = 0.0; ///< multiplies <pi>
    double offset = 0.0;
  };
  /// E[Q1' Q2'] when arm 1 is unchosen and arm 2 chosen:
  /// decay <Q1Q2> + unchosen_linear <Q1> + chosen_linear <Q2> + offset.
  /// The arm-1-chosen step swaps the two linear terms.
  struct Cross {
    double decay = 0.0;
    double unchosen_linear = 0.0;
    double chosen_linear = 0.0;
    double offset = 0.0;
  };
  /// E[Q'^2] = decay Q^2 + linear Q + offset for one update rule.
  struct Square {
    double decay = 0.0;
    double linear = 0.0;
    double offset = 0.0;
  };

  Mean mean;
  Cross cross;
  Square square_unchosen;
  Square square_chosen;
};

MomentCoefficients compute_coefficients(const RateQuad& rates, double p);

/// One step of the exact moment recursions given the policy expectations.
MomentState step_moments_exact(const MomentState& m, const MomentCoefficients& c,
                               const PolicyMoments& pm);

/// Second-order Taylor closure of the softmax expectations around the
/// symmetric mean, where pi(mu) = 1/2.
PolicyMoments closure_policy_moments(const MomentState& m, double beta);

/// Closed moment dynamics (exact recursions plus the second-order closure).
MomentState step_moments(const MomentState& m, const RateQuad& rates, double p, double beta);

/// Unbiased time-varying rate alpha_t; exact, no closure involved.
MomentState step_moments_bayes(const MomentState& m, double alpha_t, double p);

/// Delta recursion: epistemic drift (1 - a)^2 delta plus noise p (1 - p) a^2.
double step_delta(double delta, double alpha_t, double p);

/// Propagates moments from m0 for `steps` trials using the schedule in `rates`.
/// Element 0 is m0.
std::vector<MomentState> propagate_moments(const LearningRateSet& rates, double p, double beta,
                                           int steps, MomentState m0 = MomentState::point_mass(0.5));

struct ConstantRateSteadyState {
  double delta;
  double relaxation_time;
};

/// Steady state of the Delta recursion with a constant unbiased rate:
/// p(1-p) alpha / (2 - alpha), relaxing on 1 / (alpha (2 - alpha)).
/// Throws ValidationError for alpha outside (0, 1].
ConstantRateSteadyState steady_state_delta_const(double alpha, double p);

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, MomentState last) : std::runtime_error(what), last_(last) {}
  const MomentState& last_iterate() const { return last_; }

 private:
  MomentState last_;
};

/// Quadratic a D^2 + b D + c = 0 satisfied by the steady-state Delta of the
/// closed moment system, obtained by eliminating <Q1> and <Q1 Q2>.
struct DeltaQuadratic {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  /// Real roots in ascending order.
  std::vector<double> roots() const;
  /// The root in [0, 1/4] closest to `hint`; nullopt if none is admissible.
  std::optional<double> admissible_root(double hint = 0.0) const;
};

DeltaQuadratic steady_state_quadratic(const RateQuad& rates, double p, double beta);

struct SteadyState {
  MomentState moments;
  double delta = 0.0;
  int iterations = 0;
  /// Admissible root of the quadratic, when one exists.
  std::optional<double> quadratic_delta;
};

struct SteadyStateOptions {
  double damping = 0.5;
  double tolerance = 1e-12;
  int max_iterations = 1'000'000;
};

/// Fixed point of the closed moment system by damped iteration from the point
/// mass at (1/2, 1/2). Throws ConvergenceError on failure, ValidationError if
/// every rate is zero.
SteadyState steady_state_delta(const RateQuad& rates, double p, double beta,
                               const SteadyStateOptions& opts = {});

/// Normalized confirmation index (a+c - a-c - a+u + a-u) / (sum of rates).
double confirmation_index(const RateQuad& rates);

/// One-parameter family a+c = a-u = 0.1 x, a+u = a-c = 0.2 - 0.1 x. x = 1 is
/// unbiased and the confirmation index along it is x - 1.
RateQuad x_curve_rates(double x);

struct BiasSensitivity {
  double d_delta_d_c = 0.0;
  double d2_delta_d_beta_d_c = 0.0;
};

/// Central finite differences of the steady-state Delta along the x-curve
/// (step 1e-4 in x; step `beta_step` in beta). Throws ValidationError when
/// p (1 - p) = 0.
BiasSensitivity bias_sensitivity(double x, double p, double beta, double beta_step = 1e-2);

}  // namespace tabb
