#include "doctest.h"

#include <sstream>

#include "tabb/session.hpp"

using namespace tabb;

namespace {

std::vector<SessionData> parse(const std::string& text) {
  std::istringstream in(text);
  return read_sessions_csv(in);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("read a two-subject file") {
  const auto s = parse(
      "subject_id,trial,action,r_chosen,r_unchosen\n"
      "s1,0,1,1,0\n"
      "s1,1,2,0,1\n"
      "s2,0,2,1,\n");
  REQUIRE(s.size() == 2);
  CHECK(s[0].subject_id == "s1");
  CHECK(s[0].counterfactual);
  CHECK(s[0].trials[1].action == Arm::second);
  CHECK(s[0].rewards(1).r1 == 1);
  CHECK(s[0].rewards(1).r2 == 0);
  CHECK_FALSE(s[1].counterfactual);
  CHECK_FALSE(s[1].trials[0].r_unchosen.has_value());
}

TEST_CASE("byte order mark and CRLF are tolerated") {
  const auto s = parse("\xEF\xBB\xBFsubject_id,trial,action,r_chosen,r_unchosen\r\na,0,1,1,1\r\n");
  REQUIRE(s.size() == 1);
  CHECK(s[0].trials.size() == 1);
}

TEST_CASE("malformed files name the line") {
  const std::string head = "subject_id,trial,action,r_chosen,r_unchosen\n";
  CHECK(error_of("") == "session CSV is empty");
  CHECK(error_of("id,trial\n").find("line 1") != std::string::npos);
  CHECK(error_of(head + "a,0,1,1\n").find("line 2") != std::string::npos);
  CHECK(error_of(head + "a,0,3,1,0\n").find("line 2") != std::string::npos);
  CHECK(error_of(head + "a,0,1,x,0\n").find("line 2") != std::string::npos);
  CHECK(error_of(head + "a,0,1,1,0\nb,0,1,1,0\na,1,1,1,0\n").find("line 4") != std::string::npos);
  CHECK(error_of(head + "a,0,1,1,0\na,2,1,1,0\n").find("trial indices") != std::string::npos);
  CHECK(error_of(head + "a,0,1,1,0\na,1,1,1,\n").find("r_unchosen") != std::string::npos);
  CHECK(error_of(head + "a,0,1,2,0\n").find("r_chosen") != std::string::npos);
}

TEST_CASE("write and read back") {
  const Environment env = make_environment(0.6, 0.4, false, 30);
  RngStream rng(3, 0);
  const Trajectory traj = run_trajectory(BayesAgentSpec{Policy{3.0}}, env, rng);
  const std::vector<SessionData> sessions{session_from_trajectory(traj, "x", false)};
  std::ostringstream out;
  write_sessions_csv(out, sessions);
  const auto back = parse(out.str());
  REQUIRE(back.size() == 1);
  REQUIRE(back[0].size() == 30);
  for (std::size_t k = 0; k < 30; ++k) {
    CHECK(back[0].trials[k].action == traj.trials[k].action);
    CHECK(back[0].trials[k].r_chosen == traj.trials[k].r_chosen);
  }
  std::ostringstream again;
  write_sessions_csv(again, back);
  CHECK(again.str() == out.str());
}
