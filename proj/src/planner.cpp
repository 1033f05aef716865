#include "tabb/planner.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tabb {

namespace {

std::size_t choose2(std::size_t n) { return n < 2 ? 0 : n * (n - 1) / 2; }
std::size_t choose3(std::size_t n) { return n < 3 ? 0 : n * (n - 1) * (n - 2) / 6; }

Arm better_arm(double v1, double v2) {
  const double tol = 1e-12 * std::max({1.0, std::abs(v1), std::abs(v2)});
  return v2 > v1 + tol ? Arm::second : Arm::first;
}

}  // namespace

std::size_t BayesPlan::shell_size(int depth, bool counterfactual) {
  const auto t = static_cast<std::size_t>(depth);
  return counterfactual ? (t + 1) * (t + 1) : choose3(t + 3);
}

std::size_t BayesPlan::shell_rank(const BeliefState& b, bool counterfactual) {
  if (counterfactual) {
    const auto t = static_cast<std::size_t>(b.a1 + b.b1);
    return static_cast<std::size_t>(b.a1) * (t + 1) + static_cast<std::size_t>(b.a2);
  }
  const auto t = static_cast<std::size_t>(b.total());
  const auto a1 = static_cast<std::size_t>(b.a1);
  const auto b1 = static_cast<std::size_t>(b.b1);
  const std::size_t s = t - a1;
  // Beliefs with a smaller first count, then a smaller second count, precede b.
  const std::size_t before_a1 = choose3(t + 3) - choose3(t - a1 + 3);
  const std::size_t before_b1 = choose2(s + 2) - choose2(s - b1 + 2);
  return before_a1 + before_b1 + static_cast<std::size_t>(b.a2);
}

int BayesPlan::depth(const BeliefState& b) const {
  if (b.a1 < 0 || b.b1 < 0 || b.a2 < 0 || b.b2 < 0)
    throw ValidationError("belief counts must be nonnegative");
  int t = b.total();
  if (counterfactual_) {
    if (b.pulls(Arm::first) != b.pulls(Arm::second))
      throw ValidationError("counterfactual beliefs observe both arms equally often");
    t = b.pulls(Arm::first);
  }
  if (t > horizon_) throw ValidationError("belief lies beyond the planning horizon");
  return t;
}

double BayesPlan::value(const BeliefState& b) const {
  const int t = depth(b);
  return values_[t][shell_rank(b, counterfactual_)];
}

Arm BayesPlan::action(const BeliefState& b) const {
  const int t = depth(b);
  if (t == horizon_) throw ValidationError("no decision is taken at the horizon");
  return static_cast<Arm>(actions_[t][shell_rank(b, counterfactual_)]);
}

std::size_t BayesPlan::size() const {
  std::size_t n = 0;
  for (const auto& shell : values_) n += shell.size();
  return n;
}

BayesPlan bayes_optimal_plan(int horizon, bool counterfactual, std::size_t memory_limit_bytes) {
  if (horizon < 1) throw ValidationError("planning horizon must be >= 1");
  std::size_t states = 0;
  for (int t = 0; t <= horizon; ++t) states += BayesPlan::shell_size(t, counterfactual);
  const std::size_t bytes = states * (sizeof(double) + sizeof(std::uint8_t));
  if (bytes > memory_limit_bytes)
    throw ResourceError("planning horizon " + std::to_string(horizon) + " needs " +
                        std::to_string(bytes) + " bytes, limit is " +
                        std::to_string(memory_limit_bytes));

  BayesPlan plan;
  plan.horizon_ = horizon;
  plan.counterfactual_ = counterfactual;
  plan.values_.resize(horizon + 1);
  plan.actions_.resize(horizon);
  plan.values_[horizon].assign(BayesPlan::shell_size(horizon, counterfactual), 0.0);

  for (int t = horizon - 1; t >= 0; --t) {
    auto& vals = plan.values_[t];
    auto& acts = plan.actions_[t];
    vals.resize(BayesPlan::shell_size(t, counterfactual));
    acts.resize(vals.size());
    const auto& next = plan.values_[t + 1];
    auto next_value = [&](const BeliefState& b) { return next[BayesPlan::shell_rank(b, counterfactual)]; };

    auto decide = [&](const BeliefState& b, double q1, double q2) {
      const std::size_t k = BayesPlan::shell_rank(b, counterfactual);
      const Arm a = better_arm(q1, q2);
      acts[k] = static_cast<std::uint8_t>(a);
      vals[k] = a == Arm::first ? q1 : q2;
    };

    if (counterfactual) {
      for (int a1 = 0; a1 <= t; ++a1) {
        for (int a2 = 0; a2 <= t; ++a2) {
          const BeliefState b{a1, t - a1, a2, t - a2};
          const double p1 = posterior_mean(b, Arm::first);
          const double p2 = posterior_mean(b, Arm::second);
          // Both outcomes are observed whatever the action, so the future term is shared.
          double future = 0.0;
          for (int r1 = 0; r1 <= 1; ++r1) {
            for (int r2 = 0; r2 <= 1; ++r2) {
              const double w = (r1 ? p1 : 1.0 - p1) * (r2 ? p2 : 1.0 - p2);
              future += w * next_value(belief_update(b, Arm::first, {r1, r2}, true));
            }
          }
          decide(b, p1 + future, p2 + future);
        }
      }
      continue;
    }

    for (int a1 = 0; a1 <= t; ++a1) {
      for (int b1 = 0; b1 <= t - a1; ++b1) {
        for (int a2 = 0; a2 <= t - a1 - b1; ++a2) {
          const BeliefState b{a1, b1, a2, t - a1 - b1 - a2};
          auto arm_value = [&](Arm arm) {
            const double p = posterior_mean(b, arm);
            BeliefState win = b;
            BeliefState loss = b;
            if (arm == Arm::first) {
              ++win.a1;
              ++loss.b1;
            } else {
              ++win.a2;
              ++loss.b2;
            }
            return p * (1.0 + next_value(win)) + (1.0 - p) * next_value(loss);
          };
          decide(b, arm_value(Arm::first), arm_value(Arm::second));
        }
      }
    }
  }
  return plan;
}

}  // namespace tabb
