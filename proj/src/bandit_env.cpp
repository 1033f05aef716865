#include "tabb/bandit_env.hpp"

#include <array>
#include <cmath>

namespace tabb {

Arm arm_from_label(int label) {
  if (label == 1) return Arm::first;
  if (label == 2) return Arm::second;
  throw ValidationError("arm label must be 1 or 2, got " + std::to_string(label));
}

namespace {

bool is_probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t replica) {
  std::array<std::uint32_t, 5> words{
      static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
      static_cast<std::uint32_t>(replica), static_cast<std::uint32_t>(replica >> 32),
      0x7ab8u};
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace

Environment make_environment(double p1, double p2, bool counterfactual, int horizon) {
  if (!is_probability(p1)) throw ValidationError("p1 must lie in [0, 1]");
  if (!is_probability(p2)) throw ValidationError("p2 must lie in [0, 1]");
  if (horizon < 1) throw ValidationError("horizon must be >= 1");
  return Environment{p1, p2, counterfactual, horizon};
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t replica_index)
    : seed_(seed), replica_(replica_index), engine_(seeded_engine(seed, replica_index)) {}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

RewardPair sample_rewards(const Environment& env, RngStream& rng) {
  RewardPair r;
  r.r1 = rng.bernoulli(env.p1);
  r.r2 = rng.bernoulli(env.p2);
  return r;
}

}  // namespace tabb
