#include "doctest.h"

#include <cmath>
#include <vector>

#include "tabb/bandit_env.hpp"

using namespace tabb;

TEST_CASE("make_environment accepts valid inputs") {
  const Environment e = make_environment(0.5, 0.5, true, 24);
  CHECK(e.symmetric());
  CHECK(e.counterfactual);
  CHECK(e.horizon == 24);

  const Environment d = make_environment(0.0, 1.0, false, 1);
  CHECK_FALSE(d.symmetric());
  CHECK(d.p(Arm::second) == 1.0);

  const Environment s = make_environment(0.3, 0.3, true, 100);
  CHECK(s.symmetric());
  CHECK(s.p1 == 0.3);
}

TEST_CASE("make_environment rejects bad inputs") {
  CHECK_THROWS_AS(make_environment(-0.1, 0.5, true, 10), ValidationError);
  CHECK_THROWS_AS(make_environment(0.5, 1.5, true, 10), ValidationError);
  CHECK_THROWS_AS(make_environment(0.5, 0.5, true, 0), ValidationError);
  CHECK_THROWS_AS(make_environment(std::nan(""), 0.5, true, 5), ValidationError);
}

TEST_CASE("degenerate Bernoulli arms") {
  RngStream rng(7, 0);
  const Environment e = make_environment(1.0, 0.0, true, 1);
  for (int i = 0; i < 1000; ++i) {
    const RewardPair r = sample_rewards(e, rng);
    CHECK(r.r1 == 1);
    CHECK(r.r2 == 0);
  }
}

TEST_CASE("empirical reward mean") {
  RngStream rng(12345, 3);
  const Environment e = make_environment(0.5, 0.2, true, 1);
  const int n = 1'000'000;
  long s1 = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const RewardPair r = sample_rewards(e, rng);
    s1 += r.r1;
    s2 += r.r2;
  }
  CHECK(std::abs(s1 / double(n) - 0.5) < 0.002);
  CHECK(std::abs(s2 / double(n) - 0.2) < 4 * std::sqrt(0.2 * 0.8 / n));
}

TEST_CASE("streams replay and decorrelate") {
  RngStream a(99, 5), b(99, 5), c(99, 6), d(100, 5);
  std::vector<double> xa, xb, xc, xd;
  for (int i = 0; i < 100; ++i) {
    xa.push_back(a.uniform());
    xb.push_back(b.uniform());
    xc.push_back(c.uniform());
    xd.push_back(d.uniform());
  }
  CHECK(xa == xb);
  CHECK(xa != xc);
  CHECK(xa != xd);
  CHECK(a.seed() == 99);
  CHECK(a.replica_index() == 5);

  RngStream e(1, 0);
  e.uniform();
  RngStream copy = e;
  CHECK(copy.uniform() == e.uniform());
}

TEST_CASE("uniform stays in the unit interval") {
  RngStream rng(0, 0);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("arm labels") {
  CHECK(label(Arm::first) == 1);
  CHECK(arm_from_label(2) == Arm::second);
  CHECK(other(Arm::first) == Arm::second);
  CHECK_THROWS_AS(arm_from_label(3), ValidationError);
}
