#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tabb/agents.hpp"

namespace tabb {

struct SessionTrial {
  int t = 0;
  Arm action = Arm::first;
  int r_chosen = 0;
  std::optional<int> r_unchosen;
};

/// One subject's recorded choices and outcomes.
struct SessionData {
  std::string subject_id;
  std::vector<SessionTrial> trials;
  bool counterfactual = true;

  std::size_t size() const { return trials.size(); }
  /// Both rewards of trial k, with the hidden one reported as 0.
  RewardPair rewards(std::size_t k) const;

  /// Throws ValidationError unless trial indices run 0, 1, ... and
  /// r_unchosen is present exactly when the session is counterfactual.
  void validate() const;
};

SessionData session_from_trajectory(const Trajectory& traj, std::string subject_id,
                                    bool counterfactual);

/// Reads subject_id,trial,action,r_chosen,r_unchosen rows (header required,
/// optionally preceded by "#" comment lines).
/// Rows of one subject must be contiguous. Errors name the offending line.
std::vector<SessionData> read_sessions_csv(std::istream& in);
void write_sessions_csv(std::ostream& out, const std::vector<SessionData>& sessions);

}  // namespace tabb
