#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "tabb/agents.hpp"

namespace tabb {

/// One-step probability that the next action differs from the current one,
/// starting from values q. The update kernel is a sum of point masses, so the
/// marginalisation over next states is a finite sum over the four
/// (chosen, unchosen) reward outcomes per action.
double switch_prob(QState q, const RateQuad& rates, double p1, double p2, double beta);

/// General form: `rates_if_chosen[i]` are the rates in force when arm i is
/// chosen (they differ only under per-arm schedules).
double switch_prob(QState q, const std::array<RateQuad, 2>& rates_if_chosen, double p1, double p2,
                   const Policy& policy);

struct EnsembleOptions {
  std::size_t replicas = 10'000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// <K>_t for t = 0..T-1 with standard errors, by two estimators: the mean of
/// the analytic per-state K, and the realised fraction of replicas whose
/// action at t + 1 differs from the action at t.
struct SwitchSeries {
  std::vector<double> analytic;
  std::vector<double> analytic_se;
  std::vector<double> empirical;
  std::vector<double> empirical_se;
};

/// Monte-Carlo ensemble over `opts.replicas` trajectories of length env.horizon.
/// Replica r draws from RngStream(opts.seed, r) in the same order as
/// run_trajectory. Results do not depend on opts.threads.
SwitchSeries ensemble_switch_rate(const AgentSpec& agent, const Environment& env,
                                  const EnsembleOptions& opts);

struct MinSwitchRow {
  double alpha1 = 0.0;
  int tau_c = 0;
  double k_min = 0.0;
  int t_min = 0;
  double k_min_se = 0.0;
};

/// Minimum over t of the analytic <K>_t for the unbiased step schedule
/// alpha1 -> alpha2 at tau_c, for every (alpha1, tau_c) pair. Every grid point
/// reuses the same replica streams.
std::vector<MinSwitchRow> min_switch_vs_taucut(std::span<const double> alpha1s, double alpha2,
                                               std::span<const int> tau_cs, double p, double beta,
                                               int horizon, const EnsembleOptions& opts);

}  // namespace tabb
