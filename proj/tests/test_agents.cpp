#include "doctest.h"

#include <cmath>
#include <sstream>

#include "tabb/agents.hpp"

using namespace tabb;

TEST_CASE("q_update arithmetic") {
  const RateQuad rates{0.2, 0.7, 0.9, 0.3};
  const QState q = q_update({0.5, 0.5}, Arm::first, {1, 0}, rates, true);
  CHECK(q.q1 == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(q.q2 == doctest::Approx(0.35).epsilon(1e-15));

  // Zero prediction error leaves the chosen value alone.
  const QState top = q_update({1.0, 0.2}, Arm::first, {1, 1}, RateQuad::uniform(0.37), true);
  CHECK(top.q1 == 1.0);

  const QState frozen = q_update({0.4, 0.7}, Arm::second, {1, 1}, RateQuad{}, true);
  CHECK(frozen.q1 == 0.4);
  CHECK(frozen.q2 == 0.7);
}

TEST_CASE("q_update picks the branch by the sign of the error") {
  const RateQuad rates{0.1, 0.2, 0.3, 0.4};
  // chosen arm 2 rewarded 0, unchosen arm 1 rewarded 1
  const QState q = q_update({0.5, 0.5}, Arm::second, {1, 0}, rates, true);
  CHECK(q.q2 == doctest::Approx(0.5 - 0.2 * 0.5));
  CHECK(q.q1 == doctest::Approx(0.5 + 0.3 * 0.5));

  const QState hidden = q_update({0.5, 0.5}, Arm::second, {1, 0}, rates, false);
  CHECK(hidden.q1 == 0.5);
}

TEST_CASE("q values stay in the unit square") {
  RngStream rng(3, 0);
  for (int trial = 0; trial < 20000; ++trial) {
    QState q{rng.uniform(), rng.uniform()};
    const RateQuad rates{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
    if (trial % 7 == 0) q = {1.0, 0.0};
    const Arm a = rng.uniform() < 0.5 ? Arm::first : Arm::second;
    const RewardPair r{rng.bernoulli(0.5), rng.bernoulli(0.5)};
    const QState n = q_update(q, a, r, rates, true);
    REQUIRE(n.q1 >= 0.0);
    REQUIRE(n.q1 <= 1.0);
    REQUIRE(n.q2 >= 0.0);
    REQUIRE(n.q2 <= 1.0);
  }
}

TEST_CASE("rate schedules") {
  LearningRateSet step{RateQuad::uniform(0.5), Schedule::step(0.1, 0.01, 25)};
  CHECK(step.at(24).plus_c == 0.1);
  CHECK(step.at(25).minus_u == 0.01);

  LearningRateSet bayes{RateQuad{}, Schedule::bayes()};
  CHECK(bayes.at(0).plus_u == doctest::Approx(1.0 / 3));
  CHECK(bayes.at(7).minus_c == doctest::Approx(0.1));
  CHECK(bayes.at(7, false).plus_u == 0.0);

  LearningRateSet bad{{0.1, 0.1, 1.3, 0.1}, Schedule::constant()};
  CHECK_THROWS_AS(bad.validate(true), ValidationError);
  LearningRateSet leaky{{0.1, 0.1, 0.1, 0.0}, Schedule::constant()};
  CHECK_NOTHROW(leaky.validate(true));
  CHECK_THROWS_AS(leaky.validate(false), ValidationError);
}

TEST_CASE("softmax policy") {
  const Policy p5{5.0};
  CHECK(softmax_policy({0.3, 0.3}, p5) == 0.5);
  CHECK(softmax_policy({0.9, 0.1}, Policy{0.0}) == 0.5);
  CHECK(softmax_policy({0.8, 0.2}, p5) == doctest::Approx(1.0 / (1.0 + std::exp(-3.0))).epsilon(1e-14));
  CHECK(softmax_policy({0.8, 0.2}, p5) == doctest::Approx(0.952574).epsilon(1e-6));
}

TEST_CASE("softmax swap symmetry is exact") {
  RngStream rng(11, 0);
  for (int i = 0; i < 10000; ++i) {
    const QState q{rng.uniform(), rng.uniform()};
    const Policy pol{30.0 * rng.uniform()};
    REQUIRE(softmax_policy(q, pol) + softmax_policy(q.swapped(), pol) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("greedy mode") {
  const Policy g{1.0, Policy::Mode::greedy};
  CHECK(softmax_policy({0.6, 0.4}, g) == 1.0);
  CHECK(softmax_policy({0.4, 0.6}, g) == 0.0);
  CHECK(softmax_policy({0.5, 0.5}, g) == 1.0);
  CHECK(choose_action({0.5, 0.5}, g, 0.999) == Arm::first);

  Policy coin = g;
  coin.random_tie_break = true;
  CHECK(choose_action({0.5, 0.5}, coin, 0.25) == Arm::first);
  CHECK(choose_action({0.5, 0.5}, coin, 0.75) == Arm::second);

  // Invariance under a strictly increasing transform of both values.
  RngStream rng(5, 0);
  for (int i = 0; i < 5000; ++i) {
    const QState q{rng.uniform(), rng.uniform()};
    const QState t{std::exp(3 * q.q1) - 2.0, std::exp(3 * q.q2) - 2.0};
    REQUIRE(softmax_policy(q, g) == softmax_policy(t, g));
  }
}

TEST_CASE("belief updates") {
  CHECK(belief_update({}, Arm::first, {1, 0}, false) == BeliefState{1, 0, 0, 0});
  CHECK(belief_update({}, Arm::first, {0, 1}, true) == BeliefState{0, 1, 1, 0});
  CHECK(belief_update({3, 2, 1, 1}, Arm::second, {1, 0}, false) == BeliefState{3, 2, 1, 2});
}

TEST_CASE("posterior means and effective rates") {
  CHECK(posterior_mean({0, 0, 0, 0}, Arm::first) == 0.5);
  CHECK(posterior_mean({2, 1, 0, 0}, Arm::first) == doctest::Approx(0.6));
  CHECK(posterior_mean({0, 0, 9, 0}, Arm::second) == doctest::Approx(10.0 / 11));
  CHECK(effective_rate(0) == doctest::Approx(1.0 / 3));
  CHECK(effective_rate(7) == doctest::Approx(0.1));
  CHECK(effective_rate(BeliefState{4, 3, 0, 0}, Arm::first) == doctest::Approx(0.1));
}

TEST_CASE("bayes greedy action") {
  const Policy g{1.0, Policy::Mode::greedy};
  CHECK(bayes_greedy_arm({2, 0, 0, 1}) == Arm::first);
  CHECK(bayes_greedy_arm({}) == Arm::first);
  CHECK(bayes_greedy_arm({0, 5, 3, 0}) == Arm::second);
  CHECK(bayes_greedy_action({}, Policy{4.0}) == 0.5);
  CHECK(bayes_greedy_action({}, g) == 1.0);
  CHECK(bayes_greedy_action({0, 5, 3, 0}, g) == 0.0);
}

TEST_CASE("zero-rate agent keeps its values") {
  const Environment env = make_environment(0.7, 0.2, true, 50);
  RngStream rng(1, 0);
  const QAgentSpec spec{{RateQuad{}, Schedule::constant()}, Policy{3.0}, {0.3, 0.6}};
  const Trajectory traj = run_trajectory(spec, env, rng);
  REQUIRE(traj.trials.size() == 50);
  for (const auto& rec : traj.trials) {
    CHECK(rec.values.q1 == 0.3);
    CHECK(rec.values.q2 == 0.6);
  }
}

TEST_CASE("zero inverse temperature picks each arm half the time") {
  const Environment env = make_environment(0.9, 0.1, true, 1);
  const QAgentSpec spec{{RateQuad::uniform(0.2), Schedule::constant()}, Policy{0.0}};
  const int n = 100000;
  int first = 0;
  for (int i = 0; i < n; ++i) {
    RngStream rng(2024, i);
    first += run_trajectory(spec, env, rng).trials[0].action == Arm::first;
  }
  CHECK(std::abs(first / double(n) - 0.5) < 0.005);
}

TEST_CASE("bayes trajectories respect the count invariant") {
  for (bool cf : {true, false}) {
    const Environment env = make_environment(0.6, 0.4, cf, 40);
    RngStream rng(8, 1);
    const Trajectory traj = run_trajectory(BayesAgentSpec{Policy{5.0}}, env, rng);
    REQUIRE(traj.beliefs.size() == 41);
    int pulls1 = 0;
    for (int t = 0; t <= 40; ++t) {
      const BeliefState& b = traj.beliefs[t];
      if (cf) {
        CHECK(b.pulls(Arm::first) == t);
        CHECK(b.pulls(Arm::second) == t);
      } else {
        CHECK(b.total() == t);
        CHECK(b.pulls(Arm::first) == pulls1);
        if (t < 40) pulls1 += traj.trials[t].action == Arm::first;
      }
    }
  }
}

TEST_CASE("bayes agent equals a Q agent with the 1/(t+3) schedule") {
  for (bool cf : {true, false}) {
    for (int seed = 0; seed < 20; ++seed) {
      const Environment env = make_environment(0.7, 0.35, cf, 150);
      const Policy pol{6.0};
      RngStream r1(seed, 0), r2(seed, 0);
      const Trajectory bayes = run_trajectory(BayesAgentSpec{pol}, env, r1);
      const Trajectory q = run_trajectory(QAgentSpec{{RateQuad{}, Schedule::bayes()}, pol}, env, r2);
      for (int t = 0; t < env.horizon; ++t) {
        REQUIRE(bayes.trials[t].action == q.trials[t].action);
        REQUIRE(std::abs(bayes.trials[t].values.q1 - q.trials[t].values.q1) <= 1e-12);
        REQUIRE(std::abs(bayes.trials[t].values.q2 - q.trials[t].values.q2) <= 1e-12);
      }
    }
  }
}

TEST_CASE("trajectory csv") {
  const Environment env = make_environment(0.5, 0.5, false, 2);
  RngStream rng(4, 9);
  const Trajectory traj = run_trajectory(QAgentSpec{{RateQuad{0.5, 0.5, 0, 0}, {}}, Policy{1.0}}, env, rng);
  std::ostringstream out;
  write_trajectory_csv(out, std::span(&traj, 1));
  const std::string s = out.str();
  CHECK(s.rfind("replica,t,action,r_chosen,r_unchosen,q1,q2\n", 0) == 0);
  CHECK(s.find("\n9,0,") != std::string::npos);
  CHECK(s.find(",,") != std::string::npos);
}
