#include "tabb/agents.hpp"

#include <array>
#include <cmath>
#include <ostream>

#include "tabb/io.hpp"

namespace tabb {

namespace {

bool is_rate(double a) { return std::isfinite(a) && a >= 0.0 && a <= 1.0; }

double update_value(double q, int r, double plus, double minus) {
  const double err = r - q;
  if (err > 0.0) return q + plus * err;
  if (err < 0.0) return q + minus * err;
  return q;
}

}  // namespace

RateQuad LearningRateSet::at(int t, bool counterfactual) const {
  RateQuad r = base;
  switch (schedule.kind) {
    case Schedule::Kind::constant:
      break;
    case Schedule::Kind::step:
      r = RateQuad::uniform(t < schedule.tau_c ? schedule.alpha1 : schedule.alpha2);
      break;
    case Schedule::Kind::bayes:
      r = RateQuad::uniform(effective_rate(t));
      break;
  }
  if (!counterfactual) r.plus_u = r.minus_u = 0.0;
  return r;
}

void LearningRateSet::validate(bool counterfactual) const {
  if (!is_rate(base.plus_c)) throw ValidationError("a_plus_c must lie in [0, 1]");
  if (!is_rate(base.minus_c)) throw ValidationError("a_minus_c must lie in [0, 1]");
  if (!is_rate(base.plus_u)) throw ValidationError("a_plus_u must lie in [0, 1]");
  if (!is_rate(base.minus_u)) throw ValidationError("a_minus_u must lie in [0, 1]");
  if (schedule.kind == Schedule::Kind::step) {
    if (!is_rate(schedule.alpha1) || !is_rate(schedule.alpha2))
      throw ValidationError("step schedule rates must lie in [0, 1]");
    if (schedule.tau_c < 0) throw ValidationError("step schedule tau_c must be >= 0");
  }
  if (!counterfactual && schedule.kind == Schedule::Kind::constant &&
      (base.plus_u != 0.0 || base.minus_u != 0.0))
    throw ValidationError(
        "without counterfactual feedback the unchosen-arm rates a_plus_u and a_minus_u must be 0");
}

double softmax_policy(QState q, const Policy& policy) {
  if (policy.mode == Policy::Mode::greedy) {
    if (q.q1 > q.q2) return 1.0;
    if (q.q1 < q.q2) return 0.0;
    return policy.random_tie_break ? 0.5 : 1.0;
  }
  return 1.0 / (1.0 + std::exp(-policy.beta * (q.q1 - q.q2)));
}

Arm choose_action(QState q, const Policy& policy, double u) {
  return u < softmax_policy(q, policy) ? Arm::first : Arm::second;
}

QState q_update(QState q, Arm chosen, RewardPair rewards, const RateQuad& rates,
                bool counterfactual) {
  const Arm unchosen = other(chosen);
  q.of(chosen) = update_value(q.of(chosen), rewards.of(chosen), rates.plus_c, rates.minus_c);
  if (counterfactual)
    q.of(unchosen) =
        update_value(q.of(unchosen), rewards.of(unchosen), rates.plus_u, rates.minus_u);
  return q;
}

QState q_update(QState q, Arm chosen, RewardPair rewards, const LearningRateSet& rates, int t,
                bool counterfactual) {
  return q_update(q, chosen, rewards, rates.at(t, counterfactual), counterfactual);
}

BeliefState belief_update(BeliefState b, Arm chosen, RewardPair rewards, bool counterfactual) {
  auto observe = [&b](Arm arm, int r) {
    int& count = arm == Arm::first ? (r ? b.a1 : b.b1) : (r ? b.a2 : b.b2);
    ++count;
  };
  observe(chosen, rewards.of(chosen));
  if (counterfactual) observe(other(chosen), rewards.of(other(chosen)));
  return b;
}

double posterior_mean(const BeliefState& b, Arm arm) {
  return (b.successes(arm) + 1.0) / (b.pulls(arm) + 2.0);
}

QState posterior_means(const BeliefState& b) {
  return {posterior_mean(b, Arm::first), posterior_mean(b, Arm::second)};
}

double effective_rate(int t) { return 1.0 / (t + 3.0); }

double effective_rate(const BeliefState& b, Arm arm) { return 1.0 / (b.pulls(arm) + 3.0); }

double bayes_greedy_action(const BeliefState& b, const Policy& policy) {
  return softmax_policy(posterior_means(b), policy);
}

Arm bayes_greedy_arm(const BeliefState& b) {
  const QState m = posterior_means(b);
  return m.q2 > m.q1 ? Arm::second : Arm::first;
}

namespace {

struct QRunner {
  const QAgentSpec& spec;
  const Environment& env;

  Trajectory operator()(RngStream& rng) const {
    spec.rates.validate(env.counterfactual);
    Trajectory traj;
    traj.replica = rng.replica_index();
    traj.initial = spec.q0;
    traj.trials.reserve(env.horizon);
    QState q = spec.q0;
    std::array<int, 2> pulls{0, 0};
    for (int t = 0; t < env.horizon; ++t) {
      const Arm a = choose_action(q, spec.policy, rng.uniform());
      const RewardPair r = sample_rewards(env, rng);
      // Per-arm clock for the Bayes schedule when only the chosen arm is observed.
      const int clock = (!env.counterfactual && spec.rates.schedule.kind == Schedule::Kind::bayes)
                            ? pulls[index(a)]
                            : t;
      q = q_update(q, a, r, spec.rates, clock, env.counterfactual);
      ++pulls[index(a)];
      TrialRecord rec{t, a, r.of(a), std::nullopt, q};
      if (env.counterfactual) rec.r_unchosen = r.of(other(a));
      traj.trials.push_back(rec);
    }
    return traj;
  }
};

struct BayesRunner {
  const BayesAgentSpec& spec;
  const Environment& env;

  Trajectory operator()(RngStream& rng) const {
    Trajectory traj;
    traj.replica = rng.replica_index();
    BeliefState b;
    traj.initial = posterior_means(b);
    traj.trials.reserve(env.horizon);
    traj.beliefs.reserve(env.horizon + 1);
    traj.beliefs.push_back(b);
    for (int t = 0; t < env.horizon; ++t) {
      const Arm a = choose_action(posterior_means(b), spec.policy, rng.uniform());
      const RewardPair r = sample_rewards(env, rng);
      b = belief_update(b, a, r, env.counterfactual);
      traj.beliefs.push_back(b);
      TrialRecord rec{t, a, r.of(a), std::nullopt, posterior_means(b)};
      if (env.counterfactual) rec.r_unchosen = r.of(other(a));
      traj.trials.push_back(rec);
    }
    return traj;
  }
};

}  // namespace

Trajectory run_trajectory(const AgentSpec& agent, const Environment& env, RngStream& rng) {
  if (const auto* q = std::get_if<QAgentSpec>(&agent)) return QRunner{*q, env}(rng);
  return BayesRunner{std::get<BayesAgentSpec>(agent), env}(rng);
}

void write_trajectory_csv(std::ostream& out, std::span<const Trajectory> trajectories) {
  out << "replica,t,action,r_chosen,r_unchosen,q1,q2\n";
  for (const auto& traj : trajectories) {
    for (const auto& rec : traj.trials) {
      out << traj.replica << ',' << rec.t << ',' << label(rec.action) << ',' << rec.r_chosen
          << ',';
      if (rec.r_unchosen) out << *rec.r_unchosen;
      out << ',' << format_double(rec.values.q1) << ',' << format_double(rec.values.q2) << '\n';
    }
  }
}

}  // namespace tabb
