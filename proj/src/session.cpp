#include "tabb/session.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

namespace tabb {

RewardPair SessionData::rewards(std::size_t k) const {
  const SessionTrial& tr = trials[k];
  const int hidden = tr.r_unchosen.value_or(0);
  return tr.action == Arm::first ? RewardPair{tr.r_chosen, hidden} : RewardPair{hidden, tr.r_chosen};
}

void SessionData::validate() const {
  for (std::size_t k = 0; k < trials.size(); ++k) {
    const auto& tr = trials[k];
    const std::string where = "subject " + subject_id + " trial " + std::to_string(k);
    if (tr.t != static_cast<int>(k)) throw ValidationError(where + ": trial indices must run 0, 1, 2, ...");
    if (tr.r_chosen != 0 && tr.r_chosen != 1) throw ValidationError(where + ": r_chosen must be 0 or 1");
    if (tr.r_unchosen.has_value() != counterfactual)
      throw ValidationError(where + ": r_unchosen must be present exactly when feedback is counterfactual");
    if (tr.r_unchosen && *tr.r_unchosen != 0 && *tr.r_unchosen != 1)
      throw ValidationError(where + ": r_unchosen must be 0 or 1");
  }
}

SessionData session_from_trajectory(const Trajectory& traj, std::string subject_id,
                                    bool counterfactual) {
  SessionData s{std::move(subject_id), {}, counterfactual};
  s.trials.reserve(traj.trials.size());
  for (const auto& rec : traj.trials) {
    SessionTrial tr{rec.t, rec.action, rec.r_chosen, std::nullopt};
    if (counterfactual) tr.r_unchosen = rec.r_unchosen;
    s.trials.push_back(tr);
  }
  return s;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

int parse_int(const std::string& s, const std::string& where) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ValidationError(where + ": expected an integer, got '" + s + "'");
  return v;
}

}  // namespace

std::vector<SessionData> read_sessions_csv(std::istream& in) {
  std::string line;
  int line_no = 0;
  // Leading '#' lines (such as the seed comment of simulator output) are skipped.
  do {
    if (!std::getline(in, line)) throw ValidationError("session CSV is empty");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  } while (!line.empty() && line.front() == '#');
  if (split_fields(line) != std::vector<std::string>{"subject_id", "trial", "action", "r_chosen", "r_unchosen"})
    throw ValidationError("line " + std::to_string(line_no) +
                          ": header must be subject_id,trial,action,r_chosen,r_unchosen");

  std::vector<SessionData> sessions;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    const auto f = split_fields(line);
    if (f.size() != 5) throw ValidationError(where + ": expected 5 fields");
    SessionTrial tr;
    tr.t = parse_int(f[1], where);
    try {
      tr.action = arm_from_label(parse_int(f[2], where));
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    tr.r_chosen = parse_int(f[3], where);
    if (!f[4].empty()) tr.r_unchosen = parse_int(f[4], where);

    if (sessions.empty() || sessions.back().subject_id != f[0]) {
      for (const auto& s : sessions)
        if (s.subject_id == f[0]) throw ValidationError(where + ": rows of subject " + f[0] + " are not contiguous");
      sessions.push_back({f[0], {}, tr.r_unchosen.has_value()});
    }
    sessions.back().trials.push_back(tr);
  }
  for (const auto& s : sessions) s.validate();
  return sessions;
}

void write_sessions_csv(std::ostream& out, const std::vector<SessionData>& sessions) {
  out << "subject_id,trial,action,r_chosen,r_unchosen\n";
  for (const auto& s : sessions) {
    for (const auto& tr : s.trials) {
      out << s.subject_id << ',' << tr.t << ',' << label(tr.action) << ',' << tr.r_chosen << ',';
      if (tr.r_unchosen) out << *tr.r_unchosen;
      out << '\n';
    }
  }
}

}  // namespace tabb
