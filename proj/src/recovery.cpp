#include "tabb/recovery.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/binomial.hpp>

#include "tabb/parallel.hpp"

namespace tabb {

SignTest sign_test(std::span<const double> differences) {
  SignTest out;
  for (double d : differences) {
    if (d > 0) ++out.positive;
    if (d < 0) ++out.negative;
  }
  const int n = out.positive + out.negative;
  if (n == 0) return out;
  const boost::math::binomial_distribution<double> dist(n, 0.5);
  const double tail = boost::math::cdf(dist, std::min(out.positive, out.negative));
  out.p_value = std::min(1.0, 2.0 * tail);
  return out;
}

namespace {

AgentSpec generator_agent(const RecoveryGenerator& g) {
  switch (g.kind) {
    case RecoveryGenerator::Kind::bayes_softmax:
      return BayesAgentSpec{Policy{g.beta, Policy::Mode::softmax, false}};
    case RecoveryGenerator::Kind::bayes_greedy:
      return BayesAgentSpec{Policy{g.beta, Policy::Mode::greedy, false}};
    case RecoveryGenerator::Kind::q_learner:
      return QAgentSpec{{g.rates, Schedule::constant()}, Policy{g.beta, Policy::Mode::softmax, false}};
  }
  return BayesAgentSpec{};
}

double mean(const std::vector<double>& v) { return pairwise_sum(v.begin(), v.end()) / v.size(); }

double std_error(const std::vector<double>& v, double m) {
  if (v.size() < 2) return 0.0;
  std::vector<double> sq(v.size());
  std::transform(v.begin(), v.end(), sq.begin(), [m](double x) { return (x - m) * (x - m); });
  return std::sqrt(pairwise_sum(sq.begin(), sq.end()) / (v.size() - 1) / v.size());
}

}  // namespace

RecoveryReport recover_bias(const Environment& env, const RecoveryOptions& opts) {
  if (opts.n_agents < 1) throw ValidationError("recovery needs at least one agent");
  const AgentSpec agent = generator_agent(opts.generator);
  const auto n = static_cast<std::size_t>(opts.n_agents);

  std::vector<FitResult> fits(n);
  std::vector<char> failed(n, 0);
  parallel_for(n, opts.threads, [&](std::size_t i) {
    RngStream rng(opts.seed, i);
    const Trajectory traj = run_trajectory(agent, env, rng);
    const SessionData session =
        session_from_trajectory(traj, "agent" + std::to_string(i), env.counterfactual);
    try {
      fits[i] = fit_subject(ModelFamily::full, session, opts.fit);
    } catch (const FitError& e) {
      fits[i] = e.best_so_far();
      failed[i] = 1;
    }
  });

  RecoveryReport rep;
  rep.n_agents = opts.n_agents;
  rep.failed_fits = static_cast<int>(std::count(failed.begin(), failed.end(), 1));
  std::vector<std::vector<double>> cols(5, std::vector<double>(n));
  std::vector<double> pos_diff(n), unc_diff(n);
  int n_pos = 0, n_conf = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = fits[i].params;
    for (int j = 0; j < 5; ++j) cols[j][i] = p[j];
    pos_diff[i] = p[0] - p[1];
    unc_diff[i] = p[3] - p[2];
    const bool positivity = p[0] > p[1];
    n_pos += positivity;
    n_conf += positivity && p[3] > p[2];
  }
  double means[5];
  for (int j = 0; j < 5; ++j) means[j] = mean(cols[j]);
  rep.mean_rates = {means[0], means[1], means[2], means[3]};
  rep.se_rates = {std_error(cols[0], means[0]), std_error(cols[1], means[1]),
                  std_error(cols[2], means[2]), std_error(cols[3], means[3])};
  rep.mean_beta = means[4];
  rep.frac_positivity = static_cast<double>(n_pos) / n;
  rep.frac_confirmation = static_cast<double>(n_conf) / n;
  if (n >= 2) {
    rep.positivity_test = sign_test(pos_diff);
    rep.unchosen_test = sign_test(unc_diff);
  }
  rep.fits = std::move(fits);
  return rep;
}

std::vector<NewArmRow> new_arm_curve(const FitResult& fit_bayes, const FitResult& fit_q,
                                     const SessionData& session, std::span<const double> p3_grid,
                                     const NewArmOptions& opts) {
  if (fit_bayes.family != ModelFamily::bayes) throw ValidationError("first fit must be the Bayes model");
  if (fit_q.family == ModelFamily::bayes) throw ValidationError("second fit must be a Q-learning model");
  if (opts.reps < 1 || opts.training_trials < 0) throw ValidationError("new-arm protocol needs reps >= 1");

  const ModelSpec bayes_model{ModelFamily::bayes};
  const ModelSpec q_model{fit_q.family};
  const double v1_bayes = replay_values(bayes_model, fit_bayes.params, session).q1;
  const double v1_q = replay_values(q_model, fit_q.params, session).q1;
  const double beta_bayes = fit_bayes.params.back();
  const double beta_q = fit_q.params.back();
  const RateQuad rates = q_model.rates(fit_q.params);

  const auto reps = static_cast<std::size_t>(opts.reps);
  const auto n3 = static_cast<std::size_t>(opts.training_trials);
  std::vector<double> uniforms(reps * n3);
  for (std::size_t r = 0; r < reps; ++r) {
    RngStream rng(opts.seed, r);
    for (std::size_t k = 0; k < n3; ++k) uniforms[r * n3 + k] = rng.uniform();
  }

  std::vector<NewArmRow> rows;
  std::vector<double> pb(reps), pq(reps);
  for (double p3 : p3_grid) {
    if (!(p3 >= 0.0 && p3 <= 1.0)) throw ValidationError("p3 must lie in [0, 1]");
    for (std::size_t r = 0; r < reps; ++r) {
      int wins = 0;
      double q3 = 0.5;
      for (std::size_t k = 0; k < n3; ++k) {
        const int reward = uniforms[r * n3 + k] < p3 ? 1 : 0;
        wins += reward;
        const double err = reward - q3;
        q3 += (err > 0 ? rates.plus_c : rates.minus_c) * err;
      }
      const double v3_bayes = (wins + 1.0) / (n3 + 2.0);
      pb[r] = 1.0 / (1.0 + std::exp(-beta_bayes * (v3_bayes - v1_bayes)));
      pq[r] = 1.0 / (1.0 + std::exp(-beta_q * (q3 - v1_q)));
    }
    rows.push_back({p3, mean(pb), mean(pq)});
  }
  return rows;
}

}  // namespace tabb
