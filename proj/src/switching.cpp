#include "tabb/switching.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <utility>

#include "tabb/parallel.hpp"

namespace tabb {

double switch_prob(QState q, const RateQuad& rates, double p1, double p2, double beta) {
  return switch_prob(q, {rates, rates}, p1, p2, Policy{beta, Policy::Mode::softmax, false});
}

double switch_prob(QState q, const std::array<RateQuad, 2>& rates_if_chosen, double p1, double p2,
                   const Policy& policy) {
  const double pi1 = softmax_policy(q, policy);
  double k = 0.0;
  for (Arm chosen : {Arm::first, Arm::second}) {
    const double p_choose = chosen == Arm::first ? pi1 : 1.0 - pi1;
    if (p_choose == 0.0) continue;
    const double pc = chosen == Arm::first ? p1 : p2;
    const double pu = chosen == Arm::first ? p2 : p1;
    double stay = 0.0;
    for (int rc = 0; rc <= 1; ++rc) {
      for (int ru = 0; ru <= 1; ++ru) {
        const double w = (rc ? pc : 1.0 - pc) * (ru ? pu : 1.0 - pu);
        if (w == 0.0) continue;
        const RewardPair r = chosen == Arm::first ? RewardPair{rc, ru} : RewardPair{ru, rc};
        const QState next = q_update(q, chosen, r, rates_if_chosen[index(chosen)], true);
        const double pi1_next = softmax_policy(next, policy);
        stay += w * (chosen == Arm::first ? 1.0 - pi1_next : pi1_next);
      }
    }
    k += p_choose * stay;
  }
  return k;
}

namespace {

constexpr std::size_t kChunk = 64;

struct ChunkSums {
  std::vector<double> k, k2, e, e2;
  explicit ChunkSums(std::size_t horizon) : k(horizon), k2(horizon), e(horizon), e2(horizon) {}
};

/// Learner state shared by both agent kinds: the current values plus the
/// information needed for the rates in force at the next update.
class Learner {
 public:
  Learner(const AgentSpec& agent, const Environment& env) : agent_(agent), env_(env) {
    if (const auto* q = std::get_if<QAgentSpec>(&agent_)) {
      q->rates.validate(env.counterfactual);
      values_ = q->q0;
    } else {
      values_ = posterior_means(belief_);
    }
  }

  QState values() const { return values_; }
  const Policy& policy() const {
    if (const auto* q = std::get_if<QAgentSpec>(&agent_)) return q->policy;
    return std::get<BayesAgentSpec>(agent_).policy;
  }

  std::array<RateQuad, 2> rates_if_chosen(int t) const {
    const bool cf = env_.counterfactual;
    if (const auto* q = std::get_if<QAgentSpec>(&agent_)) {
      if (!cf && q->rates.schedule.kind == Schedule::Kind::bayes)
        return {q->rates.at(pulls_[0], false), q->rates.at(pulls_[1], false)};
      const RateQuad r = q->rates.at(t, cf);
      return {r, r};
    }
    if (cf) return {RateQuad::uniform(effective_rate(t)), RateQuad::uniform(effective_rate(t))};
    auto chosen_only = [](double a) { return RateQuad{a, a, 0.0, 0.0}; };
    return {chosen_only(effective_rate(belief_, Arm::first)),
            chosen_only(effective_rate(belief_, Arm::second))};
  }

  void update(Arm a, RewardPair r, int t) {
    if (std::holds_alternative<QAgentSpec>(agent_)) {
      values_ = q_update(values_, a, r, rates_if_chosen(t)[index(a)], env_.counterfactual);
    } else {
      belief_ = belief_update(belief_, a, r, env_.counterfactual);
      values_ = posterior_means(belief_);
    }
    ++pulls_[index(a)];
  }

 private:
  const AgentSpec& agent_;
  const Environment& env_;
  QState values_;
  BeliefState belief_;
  std::array<int, 2> pulls_{0, 0};
};

void accumulate_replica(const AgentSpec& agent, const Environment& env, std::uint64_t seed,
                        std::size_t replica, ChunkSums& sums) {
  RngStream rng(seed, replica);
  Learner learner(agent, env);
  Arm a = choose_action(learner.values(), learner.policy(), rng.uniform());
  for (int t = 0; t < env.horizon; ++t) {
    const double k = switch_prob(learner.values(), learner.rates_if_chosen(t), env.p1, env.p2,
                                 learner.policy());
    const RewardPair r = sample_rewards(env, rng);
    learner.update(a, r, t);
    const Arm next = choose_action(learner.values(), learner.policy(), rng.uniform());
    const double e = next != a ? 1.0 : 0.0;
    sums.k[t] += k;
    sums.k2[t] += k * k;
    sums.e[t] += e;
    sums.e2[t] += e;
    a = next;
  }
}

}  // namespace

SwitchSeries ensemble_switch_rate(const AgentSpec& agent, const Environment& env,
                                  const EnsembleOptions& opts) {
  if (opts.replicas < 1) throw ValidationError("ensemble needs at least one replica");
  const auto horizon = static_cast<std::size_t>(env.horizon);
  const std::size_t n_chunks = (opts.replicas + kChunk - 1) / kChunk;
  std::vector<ChunkSums> chunks(n_chunks, ChunkSums(horizon));
  parallel_for(n_chunks, opts.threads, [&](std::size_t c) {
    const std::size_t end = std::min(opts.replicas, (c + 1) * kChunk);
    for (std::size_t r = c * kChunk; r < end; ++r)
      accumulate_replica(agent, env, opts.seed, r, chunks[c]);
  });

  const double m = static_cast<double>(opts.replicas);
  SwitchSeries out;
  out.analytic.resize(horizon);
  out.analytic_se.resize(horizon);
  out.empirical.resize(horizon);
  out.empirical_se.resize(horizon);
  std::vector<double> buf(n_chunks);
  auto reduce = [&](std::vector<double> ChunkSums::*field, std::size_t t) {
    for (std::size_t c = 0; c < n_chunks; ++c) buf[c] = (chunks[c].*field)[t];
    return pairwise_sum(buf.begin(), buf.end());
  };
  auto mean_and_se = [m](double s, double s2) {
    const double mean = s / m;
    if (m < 2) return std::pair{mean, 0.0};
    const double var = std::max(0.0, (s2 - m * mean * mean) / (m - 1));
    return std::pair{mean, std::sqrt(var / m)};
  };
  for (std::size_t t = 0; t < horizon; ++t) {
    std::tie(out.analytic[t], out.analytic_se[t]) =
        mean_and_se(reduce(&ChunkSums::k, t), reduce(&ChunkSums::k2, t));
    std::tie(out.empirical[t], out.empirical_se[t]) =
        mean_and_se(reduce(&ChunkSums::e, t), reduce(&ChunkSums::e2, t));
  }
  return out;
}

std::vector<MinSwitchRow> min_switch_vs_taucut(std::span<const double> alpha1s, double alpha2,
                                               std::span<const int> tau_cs, double p, double beta,
                                               int horizon, const EnsembleOptions& opts) {
  const Environment env = make_environment(p, p, true, horizon);
  std::vector<MinSwitchRow> rows;
  for (double a1 : alpha1s) {
    for (int tau : tau_cs) {
      QAgentSpec agent{{RateQuad{}, Schedule::step(a1, alpha2, tau)},
                       Policy{beta, Policy::Mode::softmax, false}};
      const SwitchSeries s = ensemble_switch_rate(agent, env, opts);
      std::size_t best = 0;
      for (std::size_t t = 1; t < s.analytic.size(); ++t)
        if (s.analytic[t] < s.analytic[best]) best = t;
      rows.push_back({a1, tau, s.analytic[best], static_cast<int>(best), s.analytic_se[best]});
    }
  }
  return rows;
}

}  // namespace tabb
