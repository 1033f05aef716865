#include "doctest.h"

#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "tabb/moments.hpp"

using namespace tabb;

namespace {

// Exchangeable distribution over (Q1, Q2), stored as a weighted point set.
using Dist = std::map<std::pair<double, double>, double>;

Dist symmetrize(const Dist& d) {
  Dist out;
  for (const auto& [q, w] : d) {
    out[q] += 0.5 * w;
    out[{q.second, q.first}] += 0.5 * w;
  }
  return out;
}

struct Raw {
  double m1 = 0, m11 = 0, m12 = 0, pi = 0, pi_q1 = 0, pi_q1sq = 0;
};

Raw raw_moments(const Dist& d, double beta) {
  Raw r;
  for (const auto& [q, w] : d) {
    const double pi = 1.0 / (1.0 + std::exp(-beta * (q.first - q.second)));
    r.m1 += w * q.first;
    r.m11 += w * q.first * q.first;
    r.m12 += w * q.first * q.second;
    r.pi += w * pi;
    r.pi_q1 += w * pi * q.first;
    r.pi_q1sq += w * pi * q.first * q.first;
  }
  return r;
}

// One exact step of the softmax Q-learner over the full distribution.
Dist evolve(const Dist& d, const RateQuad& rates, double p, double beta) {
  Dist out;
  for (const auto& [q, w] : d) {
    const QState s{q.first, q.second};
    const double pi1 = softmax_policy(s, Policy{beta});
    for (Arm a : {Arm::first, Arm::second}) {
      const double pa = a == Arm::first ? pi1 : 1 - pi1;
      for (int r1 : {0, 1})
        for (int r2 : {0, 1}) {
          const double pr = (r1 ? p : 1 - p) * (r2 ? p : 1 - p);
          const QState n = q_update(s, a, {r1, r2}, rates, true);
          out[{n.q1, n.q2}] += w * pa * pr;
        }
    }
  }
  return out;
}

MomentState as_state(const Raw& r) { return {r.m1, r.m11, r.m12}; }

}  // namespace

TEST_CASE("coefficients at zero rates") {
  const MomentCoefficients c = compute_coefficients(RateQuad{}, 0.37);
  CHECK(c.mean.decay == doctest::Approx(1.0));
  CHECK(c.mean.policy_slope == 0.0);
  CHECK(c.mean.policy_offset == 0.0);
  CHECK(c.mean.offset == 0.0);
  CHECK(c.cross.decay == doctest::Approx(1.0));
  CHECK(c.cross.unchosen_linear == 0.0);
  CHECK(c.cross.chosen_linear == 0.0);
  CHECK(c.square_unchosen.decay == doctest::Approx(1.0));
}

TEST_CASE("coefficients cancel for unbiased rates") {
  for (double a : {0.05, 0.1, 0.5, 0.9})
    for (double p : {0.1, 0.5, 0.8}) {
      const MomentCoefficients c = compute_coefficients(RateQuad::uniform(a), p);
      CHECK(c.mean.policy_slope == doctest::Approx(0.0));
      CHECK(c.mean.policy_offset == doctest::Approx(0.0));
      CHECK(c.cross.unchosen_linear == doctest::Approx(c.cross.chosen_linear));
      CHECK(c.square_chosen.decay == doctest::Approx(c.square_unchosen.decay));
      CHECK(c.square_chosen.linear == doctest::Approx(c.square_unchosen.linear));
      CHECK(c.square_chosen.offset == doctest::Approx(c.square_unchosen.offset));
    }
}

TEST_CASE("exact recursions reproduce an enumerated distribution") {
  // Exact policy expectations fed into the recursions must give the exact next
  // moments for any rates, including biased ones.
  const std::vector<std::pair<RateQuad, double>> cases{
      {{0.15, 0.05, 0.05, 0.15}, 0.3},
      {{0.4, 0.1, 0.25, 0.6}, 0.5},
      {{0.9, 0.3, 0.0, 0.7}, 0.8},
      {{0.2, 0.2, 0.2, 0.2}, 0.45},
  };
  for (const auto& [rates, p] : cases) {
    for (double beta : {0.0, 2.0, 7.5}) {
      Dist d = symmetrize({{{0.5, 0.5}, 0.25}, {{0.2, 0.9}, 0.4}, {{0.7, 0.1}, 0.35}});
      const MomentCoefficients c = compute_coefficients(rates, p);
      for (int t = 0; t < 5; ++t) {
        const Raw now = raw_moments(d, beta);
        const MomentState predicted =
            step_moments_exact(as_state(now), c, {now.pi, now.pi_q1, now.pi_q1sq});
        d = evolve(d, rates, p, beta);
        const Raw next = raw_moments(d, beta);
        REQUIRE(predicted.m1 == doctest::Approx(next.m1).epsilon(1e-12));
        REQUIRE(predicted.m11 == doctest::Approx(next.m11).epsilon(1e-12));
        REQUIRE(predicted.m12 == doctest::Approx(next.m12).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("coefficients against the transcribed polynomials") {
  const RateQuad r{0.15, 0.05, 0.05, 0.15};
  const double p = 0.3, q = 0.7;
  const MomentCoefficients c = compute_coefficients(r, p);
  // Evaluated by hand at a+c = 3/20, a-c = a+u = 1/20, a-u = 3/20, p = 3/10.
  CHECK(c.mean.decay == doctest::Approx(0.09 * 0.95 + 0.49 * 0.85 + 0.21 * 1.8).epsilon(1e-14));
  CHECK(c.mean.decay == doctest::Approx(0.88).epsilon(1e-14));
  CHECK(c.mean.policy_offset == doctest::Approx(0.03).epsilon(1e-14));
  CHECK(c.mean.offset == doctest::Approx(0.015).epsilon(1e-14));
  CHECK(c.mean.policy_slope == doctest::Approx(0.09 * -0.1 + 0.49 * 0.1 + 0.21 * 0.0).epsilon(1e-14));
  CHECK(c.cross.offset == doctest::Approx(p * p * 0.15 * 0.05).epsilon(1e-14));
  CHECK(c.cross.unchosen_linear == doctest::Approx(0.15 * 0.95 * 0.09 + 0.15 * 0.85 * 0.21).epsilon(1e-14));
  CHECK(c.cross.chosen_linear == doctest::Approx(0.05 * 0.85 * 0.09 + 0.05 * 0.95 * 0.21).epsilon(1e-14));
  CHECK(c.cross.decay == doctest::Approx(0.09 * 0.95 * 0.85 + p * q * (0.85 * 0.85 + 0.95 * 0.95) +
                                         0.49 * 0.85 * 0.95).epsilon(1e-14));
  CHECK(c.square_unchosen.decay == doctest::Approx(0.3 * 0.95 * 0.95 + 0.7 * 0.85 * 0.85).epsilon(1e-14));
  CHECK(c.square_chosen.linear == doctest::Approx(2 * 0.3 * 0.15 * 0.85).epsilon(1e-14));
  CHECK(c.square_chosen.offset == doctest::Approx(0.3 * 0.15 * 0.15).epsilon(1e-14));
}

TEST_CASE("closure is exact when the policy is constant") {
  // At beta = 0 the policy moments are exactly (1/2, m1/2, m11/2).
  const RateQuad rates{0.4, 0.1, 0.25, 0.6};
  Dist d{{{0.5, 0.5}, 1.0}};
  MomentState m = MomentState::point_mass(0.5);
  for (int t = 0; t < 7; ++t) {
    d = evolve(d, rates, 0.35, 0.0);
    m = step_moments(m, rates, 0.35, 0.0);
    const Raw r = raw_moments(d, 0.0);
    REQUIRE(m.m1 == doctest::Approx(r.m1).epsilon(1e-12));
    REQUIRE(m.m11 == doctest::Approx(r.m11).epsilon(1e-12));
    REQUIRE(m.m12 == doctest::Approx(r.m12).epsilon(1e-12));
  }
}

TEST_CASE("unbiased closed dynamics reduce to the Bayes form") {
  for (double a : {0.01, 0.1, 0.3, 0.7})
    for (double p : {0.2, 0.5, 0.9})
      for (double beta : {0.0, 1.0, 5.0, 20.0}) {
        MomentState x = MomentState::point_mass(0.5), y = x;
        for (int t = 0; t < 30; ++t) {
          x = step_moments(x, RateQuad::uniform(a), p, beta);
          y = step_moments_bayes(y, a, p);
          REQUIRE(std::abs(x.m1 - y.m1) <= 1e-12);
          REQUIRE(std::abs(x.m11 - y.m11) <= 1e-12);
          REQUIRE(std::abs(x.m12 - y.m12) <= 1e-12);
        }
      }
}

TEST_CASE("step_moments examples") {
  const MomentState m{0.3, 0.2, 0.1};
  const MomentState same = step_moments(m, RateQuad{}, 0.4, 3.0);
  CHECK(same.m1 == doctest::Approx(m.m1).epsilon(1e-15));
  CHECK(same.m11 == doctest::Approx(m.m11).epsilon(1e-15));
  CHECK(same.m12 == doctest::Approx(m.m12).epsilon(1e-15));

  const MomentState one = step_moments(MomentState::point_mass(0.5), RateQuad::uniform(0.1), 0.5, 4.0);
  CHECK(one.m1 == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(one.delta() == doctest::Approx(0.0025).epsilon(1e-12));
}

TEST_CASE("Bayes moment step examples") {
  const MomentState m = step_moments_bayes(MomentState::point_mass(0.5), 1.0 / 3, 0.5);
  CHECK(m.m1 == doctest::Approx(0.5));
  CHECK(m.delta() == doctest::Approx(1.0 / 36).epsilon(1e-14));

  const MomentState start{0.4, 0.3, 0.1};
  for (double p : {0.0, 1.0}) {
    const MomentState n = step_moments_bayes(start, 0.2, p);
    CHECK(n.delta() == doctest::Approx(0.64 * start.delta()).epsilon(1e-14));
  }
}

TEST_CASE("Bayes moments match exhaustive enumeration") {
  // With counterfactual feedback both posterior means update every trial, so
  // the value distribution is independent of the actions taken.
  for (double p : {0.5, 0.3, 0.85}) {
    const std::vector<MomentState> rec =
        propagate_moments({RateQuad{}, Schedule::bayes()}, p, 0.0, 8);
    for (int t = 0; t <= 8; ++t) {
      double m1 = 0, m11 = 0, m12 = 0;
      const long leaves = 1L << (2 * t);
      for (long path = 0; path < leaves; ++path) {
        BeliefState b;
        double w = 1.0;
        for (int k = 0; k < t; ++k) {
          const int r1 = (path >> (2 * k)) & 1, r2 = (path >> (2 * k + 1)) & 1;
          w *= (r1 ? p : 1 - p) * (r2 ? p : 1 - p);
          b = belief_update(b, Arm::first, {r1, r2}, true);
        }
        const QState q = posterior_means(b);
        m1 += w * q.q1;
        m11 += w * q.q1 * q.q1;
        m12 += w * q.q1 * q.q2;
      }
      REQUIRE(std::abs(rec[t].m1 - m1) <= 1e-12);
      REQUIRE(std::abs(rec[t].m11 - m11) <= 1e-12);
      REQUIRE(std::abs(rec[t].m12 - m12) <= 1e-12);
    }
  }
}

TEST_CASE("Delta recursion is consistent with the moment recursion") {
  MomentState m{0.45, 0.3, 0.15};
  double d = m.delta();
  for (int t = 0; t < 200; ++t) {
    const double a = effective_rate(t);
    m = step_moments_bayes(m, a, 0.35);
    d = step_delta(d, a, 0.35);
    REQUIRE(std::abs(m.delta() - d) <= 1e-12);
  }
}

TEST_CASE("step_delta examples") {
  CHECK(step_delta(0.0, 1.0 / 3, 0.5) == doctest::Approx(1.0 / 36));
  CHECK(step_delta(0.1, 0.3, 0.0) == doctest::Approx(0.049));
  CHECK(step_delta(0.1, 0.3, 1.0) == doctest::Approx(0.049));
  CHECK(step_delta(0.123, 0.0, 0.5) == 0.123);
}

TEST_CASE("constant-rate steady state") {
  const auto s = steady_state_delta_const(0.1, 0.5);
  CHECK(s.delta == doctest::Approx(0.025 / 1.9).epsilon(1e-15));
  CHECK(s.delta == doctest::Approx(0.0131579).epsilon(1e-5));
  CHECK(s.relaxation_time == doctest::Approx(1.0 / 0.19));
  CHECK(steady_state_delta_const(1.0, 0.5).delta == doctest::Approx(0.25));
  CHECK_THROWS_AS(steady_state_delta_const(0.0, 0.5), ValidationError);

  double d = 0.0;
  for (int i = 0; i < 1000; ++i) d = step_delta(d, 0.1, 0.5);
  CHECK(std::abs(d - s.delta) <= 1e-10);
}

TEST_CASE("propagated moments stay admissible") {
  for (double x : {0.6, 1.0, 1.4}) {
    const auto traj = propagate_moments({x_curve_rates(x), Schedule::constant()}, 0.5, 3.0, 300);
    for (const auto& m : traj) {
      REQUIRE(m.delta() >= -1e-12);
      REQUIRE(m.variance() >= -1e-12);
    }
  }
}

TEST_CASE("steady state for unbiased rates is beta independent") {
  for (double a : {0.05, 0.1, 0.4})
    for (double p : {0.2, 0.5, 0.7}) {
      const double exact = steady_state_delta_const(a, p).delta;
      for (double beta : {0.0, 1.0, 5.0, 10.0}) {
        const SteadyState s = steady_state_delta(RateQuad::uniform(a), p, beta);
        REQUIRE(std::abs(s.delta - exact) <= 1e-10);
        REQUIRE(s.quadratic_delta.has_value());
        REQUIRE(std::abs(*s.quadratic_delta - exact) <= 1e-10);
      }
    }
}

TEST_CASE("x = 1 steady state is shared by every beta") {
  const double ref = steady_state_delta(x_curve_rates(1.0), 0.5, 1.0).delta;
  for (double beta : {3.0, 5.0})
    CHECK(std::abs(steady_state_delta(x_curve_rates(1.0), 0.5, beta).delta - ref) <= 1e-10);
}

TEST_CASE("quadratic cross-check on the x-curve") {
  for (double x : {0.6, 0.8, 1.2, 1.4})
    for (double p : {0.3, 0.5, 0.7}) {
      const SteadyState s = steady_state_delta(x_curve_rates(x), p, 3.0);
      REQUIRE(s.quadratic_delta.has_value());
      CHECK(std::abs(*s.quadratic_delta - s.delta) <= 1e-10);
    }
}

TEST_CASE("inverse temperature amplifies confirmation bias") {
  const double low = steady_state_delta(x_curve_rates(1.5), 0.5, 1.0).delta;
  const double high = steady_state_delta(x_curve_rates(1.5), 0.5, 3.0).delta;
  CHECK(high > low);
}

TEST_CASE("strong bias at high beta has no admissible fixed point") {
  CHECK_THROWS_AS(steady_state_delta(x_curve_rates(1.6), 0.5, 5.0), ConvergenceError);
  try {
    steady_state_delta(x_curve_rates(1.6), 0.5, 5.0);
  } catch (const ConvergenceError& e) {
    CHECK(std::isfinite(e.last_iterate().m1));
  }
}

TEST_CASE("steady state input checks") {
  CHECK_THROWS_AS(steady_state_delta(RateQuad{}, 0.5, 1.0), ValidationError);
  CHECK_THROWS_AS(steady_state_delta(RateQuad::uniform(0.1), 1.5, 1.0), ValidationError);
  SteadyStateOptions few;
  few.max_iterations = 3;
  CHECK_THROWS_AS(steady_state_delta(RateQuad::uniform(0.1), 0.5, 1.0, few), ConvergenceError);
}

TEST_CASE("Delta* increases with x") {
  double prev = -1.0;
  for (int i = 0; i <= 8; ++i) {
    const double x = 0.8 + 0.1 * i;
    const double d = steady_state_delta(x_curve_rates(x), 0.5, 3.0).delta;
    CHECK(d > prev);
    prev = d;
  }
}

TEST_CASE("bias sensitivity signs") {
  const BiasSensitivity s = bias_sensitivity(1.2, 0.5, 3.0);
  CHECK(s.d_delta_d_c > 0.0);
  CHECK(s.d2_delta_d_beta_d_c > 0.0);
  CHECK_THROWS_AS(bias_sensitivity(1.2, 0.0, 3.0), ValidationError);
  CHECK_THROWS_AS(bias_sensitivity(1.2, 1.0, 3.0), ValidationError);
}

TEST_CASE("confirmation index") {
  CHECK(confirmation_index({0.15, 0.05, 0.05, 0.15}) == doctest::Approx(0.5));
  CHECK(confirmation_index(RateQuad::uniform(0.3)) == 0.0);
  CHECK_THROWS_AS(confirmation_index(RateQuad{}), ValidationError);
  for (double x = 0.0; x <= 2.0; x += 0.125) CHECK(confirmation_index(x_curve_rates(x)) == doctest::Approx(x - 1.0).epsilon(1e-12));
  const RateQuad r = x_curve_rates(1.5);
  CHECK(r.plus_c == doctest::Approx(0.15));
  CHECK(r.minus_c == doctest::Approx(0.05));
  CHECK(r.plus_u == doctest::Approx(0.05));
  CHECK(r.minus_u == doctest::Approx(0.15));
}
