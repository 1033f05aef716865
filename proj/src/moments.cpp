#include "tabb/moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace tabb {

namespace {

bool is_probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

/// E[Q'^2] coefficients for the update Q+ = Q + a+(1-Q) w.p. p, Q- = (1 - a-)Q otherwise.
MomentCoefficients::Square square_coefficients(double plus, double minus, double p) {
  return {p * (1 - plus) * (1 - plus) + (1 - p) * (1 - minus) * (1 - minus),
          2 * p * plus * (1 - plus), p * plus * plus};
}

}  // namespace

MomentCoefficients compute_coefficients(const RateQuad& r, double p) {
  const double q = 1.0 - p;
  MomentCoefficients c;

  c.mean.decay = p * p * (1 - r.plus_u) + q * q * (1 - r.minus_u) + p * q * (2 - r.plus_u - r.minus_u);
  c.mean.policy_slope = p * p * (r.plus_u - r.plus_c) + q * q * (r.minus_u - r.minus_c) +
                        p * q * (r.plus_u + r.minus_u - r.minus_c - r.plus_c);
  c.mean.policy_offset = p * (r.plus_c - r.plus_u);
  c.mean.offset = p * r.plus_u;

  c.cross.decay = p * p * (1 - r.plus_u) * (1 - r.plus_c) +
                  p * q * ((1 - r.minus_u) * (1 - r.plus_c) + (1 - r.plus_u) * (1 - r.minus_c)) +
                  q * q * (1 - r.minus_u) * (1 - r.minus_c);
  c.cross.unchosen_linear = r.plus_c * (1 - r.plus_u) * p * p + r.plus_c * (1 - r.minus_u) * q * p;
  c.cross.chosen_linear = r.plus_u * (1 - r.plus_c) * p * p + r.plus_u * (1 - r.minus_c) * q * p;
  c.cross.offset = p * p * r.plus_c * r.plus_u;

  c.square_unchosen = square_coefficients(r.plus_u, r.minus_u, p);
  c.square_chosen = square_coefficients(r.plus_c, r.minus_c, p);
  return c;
}

MomentState step_moments_exact(const MomentState& m, const MomentCoefficients& c,
                               const PolicyMoments& pm) {
  MomentState next;
  next.m1 = c.mean.decay * m.m1 + c.mean.policy_offset * pm.pi + c.mean.policy_slope * pm.pi_q1 +
            c.mean.offset;

  // Symmetry gives <pi Q2> = <Q1> - <pi Q1>, which folds the policy terms into one.
  const double lin_sum = c.cross.unchosen_linear + c.cross.chosen_linear;
  const double lin_diff = c.cross.chosen_linear - c.cross.unchosen_linear;
  next.m12 = c.cross.decay * m.m12 + lin_sum * m.m1 + c.cross.offset +
             lin_diff * (2.0 * pm.pi_q1 - m.m1);

  const auto& u = c.square_unchosen;
  const auto& h = c.square_chosen;
  next.m11 = u.decay * m.m11 + u.linear * m.m1 + u.offset + (h.decay - u.decay) * pm.pi_q1sq +
             (h.linear - u.linear) * pm.pi_q1 + (h.offset - u.offset) * pm.pi;
  return next;
}

PolicyMoments closure_policy_moments(const MomentState& m, double beta) {
  const double d = m.delta();
  return {0.5, 0.5 * m.m1 + 0.25 * beta * d, 0.5 * m.m11 + 0.5 * beta * m.m1 * d};
}

MomentState step_moments(const MomentState& m, const RateQuad& rates, double p, double beta) {
  return step_moments_exact(m, compute_coefficients(rates, p), closure_policy_moments(m, beta));
}

MomentState step_moments_bayes(const MomentState& m, double a, double p) {
  const double keep = 1.0 - a;
  return {keep * m.m1 + p * a,
          keep * keep * m.m11 + 2 * p * a * keep * m.m1 + p * a * a,
          keep * keep * m.m12 + 2 * p * a * keep * m.m1 + p * p * a * a};
}

double step_delta(double delta, double a, double p) {
  return (1.0 - a) * (1.0 - a) * delta + p * (1.0 - p) * a * a;
}

std::vector<MomentState> propagate_moments(const LearningRateSet& rates, double p, double beta,
                                           int steps, MomentState m0) {
  std::vector<MomentState> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  out.push_back(m0);
  for (int t = 0; t < steps; ++t) {
    if (rates.schedule.kind == Schedule::Kind::bayes)
      m0 = step_moments_bayes(m0, effective_rate(t), p);
    else
      m0 = step_moments(m0, rates.at(t), p, beta);
    out.push_back(m0);
  }
  return out;
}

ConstantRateSteadyState steady_state_delta_const(double alpha, double p) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw ValidationError("constant-rate steady state needs alpha in (0, 1]");
  return {p * (1 - p) * alpha / (2 - alpha), 1.0 / (alpha * (2 - alpha))};
}

std::vector<double> DeltaQuadratic::roots() const {
  const double scale = std::max({std::abs(a), std::abs(b), std::abs(c)});
  if (scale == 0.0) return {};
  if (std::abs(a) <= 1e-14 * scale) {
    if (b == 0.0) return {};
    return {-c / b};
  }
  const double disc = b * b - 4 * a * c;
  if (disc < 0) return {};
  // Numerically stable pair.
  const double s = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  std::vector<double> r{s / a, s != 0.0 ? c / s : s / a};
  std::sort(r.begin(), r.end());
  return r;
}

std::optional<double> DeltaQuadratic::admissible_root(double hint) const {
  constexpr double slack = 1e-12;
  std::optional<double> best;
  for (double r : roots()) {
    if (r < -slack || r > 0.25 + slack) continue;
    if (!best || std::abs(r - hint) < std::abs(*best - hint)) best = r;
  }
  return best;
}

namespace {

/// Polynomial in Delta of degree <= 2, coefficients in ascending order.
using Poly = std::array<double, 3>;

Poly operator+(Poly x, const Poly& y) {
  for (int i = 0; i < 3; ++i) x[i] += y[i];
  return x;
}
Poly operator*(double s, Poly x) {
  for (double& v : x) v *= s;
  return x;
}
/// Product of two polynomials of degree <= 1.
Poly mul_linear(const Poly& x, const Poly& y) {
  return {x[0] * y[0], x[0] * y[1] + x[1] * y[0], x[1] * y[1]};
}

double nonzero(double d, const char* what) {
  if (std::abs(d) < 1e-15)
    throw ValidationError(std::string("degenerate steady state: ") + what + " vanishes");
  return d;
}

}  // namespace

DeltaQuadratic steady_state_quadratic(const RateQuad& rates, double p, double beta) {
  const MomentCoefficients c = compute_coefficients(rates, p);
  const Poly delta{0.0, 1.0, 0.0};

  // <Q1>* from the mean equation, linear in Delta.
  const double mean_den = nonzero(1.0 - c.mean.decay - 0.5 * c.mean.policy_slope, "mean relaxation");
  const Poly m1 = (1.0 / mean_den) * Poly{c.mean.offset + 0.5 * c.mean.policy_offset,
                                          0.25 * beta * c.mean.policy_slope, 0.0};

  const double lin_sum = c.cross.unchosen_linear + c.cross.chosen_linear;
  const double lin_diff = c.cross.chosen_linear - c.cross.unchosen_linear;
  const Poly m12 = (1.0 / nonzero(1.0 - c.cross.decay, "cross-moment relaxation")) *
                   (lin_sum * m1 + Poly{c.cross.offset, 0.5 * beta * lin_diff, 0.0});

  const auto& u = c.square_unchosen;
  const auto& h = c.square_chosen;
  const Poly m11_num = (0.5 * (h.linear + u.linear)) * m1 +
                       Poly{0.5 * (h.offset + u.offset), 0.25 * beta * (h.linear - u.linear), 0.0} +
                       (0.5 * beta * (h.decay - u.decay)) * mul_linear(m1, delta);
  const Poly m11 =
      (1.0 / nonzero(1.0 - 0.5 * (h.decay + u.decay), "second-moment relaxation")) * m11_num;

  const Poly residual = m11 + (-1.0) * m12 + (-1.0) * delta;
  return {residual[2], residual[1], residual[0]};
}

SteadyState steady_state_delta(const RateQuad& rates, double p, double beta,
                               const SteadyStateOptions& opts) {
  if (!is_probability(p)) throw ValidationError("p must lie in [0, 1]");
  if (rates.plus_c + rates.minus_c + rates.plus_u + rates.minus_u <= 0.0)
    throw ValidationError("steady state needs at least one nonzero learning rate");

  const MomentCoefficients c = compute_coefficients(rates, p);
  MomentState m = MomentState::point_mass(0.5);
  SteadyState out;
  double prev_change = 0.0;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    const MomentState f = step_moments_exact(m, c, closure_policy_moments(m, beta));
    const MomentState next{(1 - opts.damping) * f.m1 + opts.damping * m.m1,
                           (1 - opts.damping) * f.m11 + opts.damping * m.m11,
                           (1 - opts.damping) * f.m12 + opts.damping * m.m12};
    const double change = std::max({std::abs(next.m1 - m.m1), std::abs(next.m11 - m.m11),
                                    std::abs(next.m12 - m.m12)});
    m = next;
    // Moments of values confined to [0, 1] cannot leave [0, 1].
    if (!std::isfinite(change) || std::abs(m.m1 - 0.5) > 1.0 || std::abs(m.m11 - 0.5) > 1.0 ||
        std::abs(m.m12 - 0.5) > 1.0)
      throw ConvergenceError("steady-state iteration diverged: the closed system has no admissible fixed point", m);

    // Geometric tail estimate of the remaining distance to the fixed point.
    bool done = false;
    if (change <= opts.tolerance) {
      const double ratio = prev_change > 0.0 ? change / prev_change : 1.0;
      done = ratio < 1.0 ? change * ratio / (1.0 - ratio) <= opts.tolerance
                         : change <= 4 * std::numeric_limits<double>::epsilon();
    }
    prev_change = change;
    if (done) {
      out.moments = m;
      out.delta = m.delta();
      out.iterations = it;
      try {
        out.quadratic_delta = steady_state_quadratic(rates, p, beta).admissible_root(out.delta);
      } catch (const ValidationError&) {
        out.quadratic_delta.reset();
      }
      return out;
    }
  }
  throw ConvergenceError("steady-state iteration did not converge in " +
                             std::to_string(opts.max_iterations) + " iterations",
                         m);
}

double confirmation_index(const RateQuad& r) {
  const double sum = r.plus_c + r.minus_c + r.plus_u + r.minus_u;
  if (!(sum > 0.0)) throw ValidationError("confirmation index undefined when all rates are zero");
  return (r.plus_c - r.minus_c - r.plus_u + r.minus_u) / sum;
}

RateQuad x_curve_rates(double x) {
  const double confirming = 0.1 * x;
  const double disconfirming = 0.2 - 0.1 * x;
  return {confirming, disconfirming, disconfirming, confirming};
}

BiasSensitivity bias_sensitivity(double x, double p, double beta, double beta_step) {
  if (!(p > 0.0 && p < 1.0))
    throw ValidationError("bias sensitivity undefined without reward variance (p in {0, 1})");
  constexpr double hx = 1e-4;
  const SteadyStateOptions tight{0.5, 1e-15, 10'000'000};
  auto delta_at = [&](double xv, double b) {
    return steady_state_delta(x_curve_rates(xv), p, b, tight).delta;
  };
  // dC/dx = 1 along the curve.
  auto slope = [&](double b) { return (delta_at(x + hx, b) - delta_at(x - hx, b)) / (2 * hx); };
  BiasSensitivity s;
  s.d_delta_d_c = slope(beta);
  s.d2_delta_d_beta_d_c = (slope(beta + beta_step) - slope(beta - beta_step)) / (2 * beta_step);
  return s;
}

}  // namespace tabb
