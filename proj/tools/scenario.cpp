#include "scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "tabb/moments.hpp"

namespace tabb::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr ScenarioKind kKinds[] = {ScenarioKind::simulate,    ScenarioKind::propagate,
                                   ScenarioKind::sweep_delta, ScenarioKind::switch_rate,
                                   ScenarioKind::fit,         ScenarioKind::recover,
                                   ScenarioKind::new_arm};

}  // namespace

std::string kind_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::simulate: return "simulate";
    case ScenarioKind::propagate: return "propagate";
    case ScenarioKind::sweep_delta: return "sweep-delta";
    case ScenarioKind::switch_rate: return "switch-rate";
    case ScenarioKind::fit: return "fit";
    case ScenarioKind::recover: return "recover";
    case ScenarioKind::new_arm: return "new-arm";
  }
  return "?";
}

std::optional<ScenarioKind> kind_from_name(const std::string& name) {
  for (ScenarioKind k : kKinds)
    if (kind_name(k) == name) return k;
  return std::nullopt;
}

AgentSpec AgentBlock::spec() const {
  if (type == Type::bayes) return BayesAgentSpec{policy};
  return QAgentSpec{rates, policy, q0};
}

std::string Diagnostic::format(const std::string& file) const {
  std::string out = file;
  if (line > 0) out += ":" + std::to_string(line);
  out += ": ";
  if (!field.empty()) out += field + ": ";
  return out + message;
}

namespace {

std::string show(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// Line of the innermost key of a dotted path, found by scanning for each
/// key in turn. Returns 0 when a key cannot be found.
int locate(const std::string& text, const std::string& path) {
  std::size_t pos = 0;
  bool found = false;
  std::istringstream parts(path);
  std::string key;
  while (std::getline(parts, key, '.')) {
    const auto bracket = key.find('[');
    if (bracket != std::string::npos) key.erase(bracket);
    if (key.empty()) continue;
    const std::size_t at = text.find("\"" + key + "\"", pos);
    if (at == std::string::npos) break;
    pos = at + key.size() + 2;
    found = true;
  }
  if (!found) return 0;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

class Reader {
 public:
  Reader(const std::string& text, std::vector<Diagnostic>& diags) : text_(text), diags_(diags) {}

  void error(const std::string& path, const std::string& msg) {
    diags_.push_back({locate(text_, path), path, msg});
  }

  /// Reports keys of `obj` that are not in `allowed`.
  void only(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    for (const auto& [k, v] : obj.items()) {
      if (std::none_of(allowed.begin(), allowed.end(), [&k](const char* a) { return k == a; }))
        error(join(path, k), "unknown field");
    }
  }

  const json* object(const json& parent, const std::string& path, const char* key, bool required) {
    const std::string p = join(path, key);
    if (!parent.contains(key)) {
      if (required) error(p, "required block is missing");
      return nullptr;
    }
    const json& v = parent.at(key);
    if (!v.is_object()) {
      error(p, "expected an object");
      return nullptr;
    }
    return &v;
  }

  std::optional<double> number(const json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj.at(key);
    if (!v.is_number()) {
      error(join(path, key), "expected a number");
      return std::nullopt;
    }
    return v.get<double>();
  }

  double number_in(const json& obj, const std::string& path, const char* key, double def, double lo,
                   double hi) {
    const auto v = number(obj, path, key);
    if (!v) return def;
    if (!(std::isfinite(*v) && *v >= lo && *v <= hi)) {
      error(join(path, key), "must lie in [" + show(lo) + ", " + show(hi) + "] (got " + show(*v) + ")");
      return def;
    }
    return *v;
  }

  double rate(const json& obj, const std::string& path, const char* key, double def) {
    return number_in(obj, path, key, def, 0.0, 1.0);
  }

  long long integer(const json& obj, const std::string& path, const char* key, long long def,
                    long long lo, long long hi = std::numeric_limits<int>::max()) {
    if (!obj.contains(key)) return def;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) {
      error(join(path, key), "expected an integer");
      return def;
    }
    const long long x = v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(hi)
                            ? hi + 1
                            : v.get<long long>();
    if (x < lo || x > hi) {
      error(join(path, key), "must be between " + std::to_string(lo) + " and " + std::to_string(hi) +
                                 " (got " + v.dump() + ")");
      return def;
    }
    return x;
  }

  bool boolean(const json& obj, const std::string& path, const char* key, bool def) {
    if (!obj.contains(key)) return def;
    if (!obj.at(key).is_boolean()) {
      error(join(path, key), "expected true or false");
      return def;
    }
    return obj.at(key).get<bool>();
  }

  std::string string(const json& obj, const std::string& path, const char* key, const std::string& def) {
    if (!obj.contains(key)) return def;
    if (!obj.at(key).is_string()) {
      error(join(path, key), "expected a string");
      return def;
    }
    return obj.at(key).get<std::string>();
  }

  /// Either an explicit array of numbers or {"from", "to", "step"}.
  std::vector<double> grid(const json& obj, const std::string& path, const char* key, double lo, double hi,
                           bool required) {
    const std::string p = join(path, key);
    if (!obj.contains(key)) {
      if (required) error(p, "required grid is missing");
      return {};
    }
    const json& v = obj.at(key);
    std::vector<double> out;
    if (v.is_number()) {
      out.push_back(v.get<double>());
    } else if (v.is_array()) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) {
          error(p + "[" + std::to_string(i) + "]", "expected a number");
          return {};
        }
        out.push_back(v[i].get<double>());
      }
    } else if (v.is_object()) {
      only(v, p, {"from", "to", "step"});
      const auto from = number(v, p, "from"), to = number(v, p, "to"), step = number(v, p, "step");
      if (!from || !to || !step) {
        error(p, "a range needs numeric from, to and step");
        return {};
      }
      if (!(*step > 0.0) || *to < *from) {
        error(p, "a range needs step > 0 and to >= from");
        return {};
      }
      const auto n = static_cast<long long>(std::floor((*to - *from) / *step + 1e-9)) + 1;
      if (n > 1'000'000) {
        error(p, "range has more than 10^6 points");
        return {};
      }
      for (long long i = 0; i < n; ++i) out.push_back(std::stod(show(*from + static_cast<double>(i) * *step)));
    } else {
      error(p, "expected a number, an array or a {from, to, step} range");
      return {};
    }
    if (out.empty()) error(p, "grid is empty");
    for (double x : out)
      if (!(std::isfinite(x) && x >= lo && x <= hi)) {
        error(p, "values must lie in [" + show(lo) + ", " + show(hi) + "] (got " + show(x) + ")");
        return {};
      }
    return out;
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

 private:
  const std::string& text_;
  std::vector<Diagnostic>& diags_;
};

RateQuad read_rates(Reader& r, const json& block, const std::string& path, RateQuad def) {
  const int forms = block.contains("rates") + block.contains("alpha") + block.contains("x");
  if (forms > 1) r.error(path, "give only one of rates, alpha and x");
  if (block.contains("alpha")) return RateQuad::uniform(r.rate(block, path, "alpha", def.plus_c));
  if (block.contains("x")) return x_curve_rates(r.number_in(block, path, "x", 1.0, 0.0, 2.0));
  if (const json* rates = r.object(block, path, "rates", false)) {
    const std::string p = Reader::join(path, "rates");
    r.only(*rates, p, {"a_plus_c", "a_minus_c", "a_plus_u", "a_minus_u"});
    return {r.rate(*rates, p, "a_plus_c", def.plus_c), r.rate(*rates, p, "a_minus_c", def.minus_c),
            r.rate(*rates, p, "a_plus_u", def.plus_u), r.rate(*rates, p, "a_minus_u", def.minus_u)};
  }
  return def;
}

Policy read_policy(Reader& r, const json& block, const std::string& path, Policy def) {
  Policy p = def;
  p.beta = r.number_in(block, path, "beta", def.beta, 0.0, 1e6);
  const std::string mode = r.string(block, path, "policy", def.mode == Policy::Mode::greedy ? "greedy" : "softmax");
  if (mode == "greedy") {
    p.mode = Policy::Mode::greedy;
  } else if (mode == "softmax") {
    p.mode = Policy::Mode::softmax;
  } else {
    r.error(Reader::join(path, "policy"), "expected softmax or greedy (got '" + mode + "')");
  }
  p.random_tie_break = r.boolean(block, path, "random_tie_break", def.random_tie_break);
  return p;
}

AgentBlock read_agent(Reader& r, const json& a, bool counterfactual) {
  const std::string path = "agent";
  r.only(a, path, {"type", "rates", "alpha", "x", "schedule", "beta", "policy", "random_tie_break", "q0"});
  AgentBlock out;
  const std::string type = r.string(a, path, "type", "q");
  if (type == "bayes") {
    out.type = AgentBlock::Type::bayes;
    for (const char* k : {"rates", "alpha", "x", "schedule", "q0"})
      if (a.contains(k)) r.error(Reader::join(path, k), "not used by a bayes agent");
  } else if (type != "q") {
    r.error("agent.type", "expected q or bayes (got '" + type + "')");
  }
  out.rates.base = read_rates(r, a, path, RateQuad{});
  out.policy = read_policy(r, a, path, Policy{1.0});

  if (const json* s = r.object(a, path, "schedule", false)) {
    const std::string sp = "agent.schedule";
    r.only(*s, sp, {"kind", "alpha1", "alpha2", "tau_c"});
    const std::string kind = r.string(*s, sp, "kind", "constant");
    if (kind == "constant") {
      for (const char* k : {"alpha1", "alpha2", "tau_c"})
        if (s->contains(k)) r.error(Reader::join(sp, k), "not used by a constant schedule");
    } else if (kind == "step") {
      out.rates.schedule = Schedule::step(r.rate(*s, sp, "alpha1", 0.1), r.rate(*s, sp, "alpha2", 0.01),
                                          static_cast<int>(r.integer(*s, sp, "tau_c", 25, 0)));
    } else if (kind == "bayes") {
      out.rates.schedule = Schedule::bayes();
      for (const char* k : {"alpha1", "alpha2", "tau_c"})
        if (s->contains(k)) r.error(Reader::join(sp, k), "not used by the bayes schedule");
    } else {
      r.error("agent.schedule.kind", "expected constant, step or bayes (got '" + kind + "')");
    }
  }

  if (a.contains("q0")) {
    const json& q = a.at("q0");
    if (!q.is_array() || q.size() != 2 || !q[0].is_number() || !q[1].is_number()) {
      r.error("agent.q0", "expected an array of two numbers");
    } else {
      out.q0 = {q[0].get<double>(), q[1].get<double>()};
      if (!(out.q0.q1 >= 0 && out.q0.q1 <= 1 && out.q0.q2 >= 0 && out.q0.q2 <= 1))
        r.error("agent.q0", "values must lie in [0, 1]");
    }
  }

  if (!counterfactual && out.type == AgentBlock::Type::q &&
      out.rates.schedule.kind == Schedule::Kind::constant) {
    for (auto [name, v] : {std::pair{"a_plus_u", out.rates.base.plus_u}, std::pair{"a_minus_u", out.rates.base.minus_u}})
      if (v != 0.0)
        r.error(std::string("agent.rates.") + name,
                "environment.counterfactual is false, so unchosen-arm learning rates must be 0 "
                "(the unchosen arm's outcome is never observed; got " + show(v) + ")");
  }
  return out;
}

std::vector<ModelFamily> read_models(Reader& r, const json& f, const std::string& path) {
  if (!f.contains("models")) return {kAllFamilies.begin(), kAllFamilies.end()};
  const json& v = f.at("models");
  const std::string p = Reader::join(path, "models");
  if (!v.is_array() || v.empty()) {
    r.error(p, "expected a non-empty array of model names");
    return {kAllFamilies.begin(), kAllFamilies.end()};
  }
  std::set<ModelFamily> seen;
  for (const auto& m : v) {
    if (!m.is_string()) {
      r.error(p, "model names must be strings");
      continue;
    }
    try {
      seen.insert(family_from_name(m.get<std::string>()));
    } catch (const ValidationError& e) {
      r.error(p, e.what());
    }
  }
  std::vector<ModelFamily> out;
  for (ModelFamily fam : kAllFamilies)
    if (seen.count(fam)) out.push_back(fam);
  if (out.size() != v.size()) r.error(p, "model names must be unique");
  return out;
}

FitBlock read_fit(Reader& r, const json& f, bool needs_sessions) {
  FitBlock out;
  const std::string path = "fit";
  r.only(f, path, {"sessions", "models", "restarts", "tolerance", "beta_max"});
  out.sessions = r.string(f, path, "sessions", "");
  if (needs_sessions && out.sessions.empty()) r.error("fit.sessions", "a session CSV path is required");
  if (!needs_sessions && f.contains("sessions")) r.error("fit.sessions", "not used by this scenario kind");
  out.models = read_models(r, f, path);
  out.restarts = static_cast<int>(r.integer(f, path, "restarts", out.restarts, 1, 10'000));
  out.tolerance = r.number_in(f, path, "tolerance", out.tolerance, 1e-15, 1.0);
  out.beta_max = r.number_in(f, path, "beta_max", out.beta_max, 1e-3, 1e6);
  return out;
}

Environment read_environment(Reader& r, const json& e) {
  const std::string path = "environment";
  r.only(e, path, {"p", "p1", "p2", "counterfactual", "horizon"});
  Environment env;
  if (e.contains("p") && (e.contains("p1") || e.contains("p2")))
    r.error("environment.p", "give either p or p1/p2");
  const double p = r.rate(e, path, "p", 0.5);
  env.p1 = r.rate(e, path, "p1", p);
  env.p2 = r.rate(e, path, "p2", p);
  env.counterfactual = r.boolean(e, path, "counterfactual", true);
  env.horizon = static_cast<int>(r.integer(e, path, "horizon", 24, 1, 100'000'000));
  return env;
}

}  // namespace

ParseResult parse_config(const std::string& text) {
  ParseResult res;
  auto& diags = res.diagnostics;
  json root;
  try {
    root = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    const auto byte = std::min<std::size_t>(e.byte, text.size());
    const auto nl = std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte > 0 ? byte - 1 : 0), '\n');
    std::string msg = e.what();
    if (const auto at = msg.find("syntax error"); at != std::string::npos) msg = msg.substr(at);
    diags.push_back({static_cast<int>(nl) + 1, "", msg});
    return res;
  }
  if (!root.is_object()) {
    diags.push_back({1, "", "the config must be a JSON object"});
    return res;
  }

  Reader r(text, diags);
  r.only(root, "", {"kind", "seed", "environment", "agent", "ensemble", "output", "propagate", "sweep",
                    "min_switch", "fit", "recover", "new_arm"});
  ScenarioConfig c;

  const std::string kind = r.string(root, "", "kind", "");
  if (kind.empty()) {
    r.error("kind", "required; one of simulate, propagate, sweep-delta, switch-rate, fit, recover, new-arm");
    return res;
  }
  const auto k = kind_from_name(kind);
  if (!k) {
    r.error("kind", "unknown scenario kind '" + kind + "'");
    return res;
  }
  c.kind = *k;

  if (root.contains("seed")) {
    const json& s = root.at("seed");
    if (s.is_number_unsigned())
      c.seed = s.get<std::uint64_t>();
    else if (s.is_number_integer() && s.get<long long>() >= 0)
      c.seed = static_cast<std::uint64_t>(s.get<long long>());
    else
      r.error("seed", "expected a nonnegative integer");
  }

  // Blocks each kind reads; anything else present is reported as unused.
  std::set<std::string> used{"kind", "seed", "output"};
  auto use = [&used](std::initializer_list<const char*> names) { used.insert(names.begin(), names.end()); };
  switch (c.kind) {
    case ScenarioKind::simulate: use({"environment", "agent", "ensemble"}); break;
    case ScenarioKind::propagate: use({"environment", "agent", "propagate"}); break;
    case ScenarioKind::sweep_delta: use({"sweep"}); break;
    case ScenarioKind::switch_rate: use({"environment", "agent", "ensemble", "min_switch"}); break;
    case ScenarioKind::fit: use({"fit", "ensemble"}); break;
    case ScenarioKind::recover: use({"environment", "recover", "fit", "ensemble"}); break;
    case ScenarioKind::new_arm: use({"new_arm", "fit"}); break;
  }
  static const std::set<std::string> blocks{"environment", "agent", "ensemble", "propagate", "sweep",
                                            "min_switch", "fit", "recover", "new_arm"};
  for (const auto& [key, v] : root.items())
    if (blocks.count(key) && !used.count(key)) r.error(key, "block is not used by a " + kind + " scenario");

  if (const json* o = r.object(root, "", "output", false)) {
    r.only(*o, "output", {"directory"});
    c.output_directory = r.string(*o, "output", "directory", "");
  }

  const bool needs_env = used.count("environment") > 0;
  if (needs_env) {
    if (const json* e = r.object(root, "", "environment", true)) c.environment = read_environment(r, *e);
  }

  if (used.count("agent")) {
    if (const json* a = r.object(root, "", "agent", true)) c.agent = read_agent(r, *a, c.environment.counterfactual);
  }

  if (used.count("ensemble")) {
    const bool replicas_used = c.kind == ScenarioKind::simulate || c.kind == ScenarioKind::switch_rate;
    if (const json* e = r.object(root, "", "ensemble", false)) {
      r.only(*e, "ensemble", {"replicas", "threads"});
      if (!replicas_used && e->contains("replicas"))
        r.error("ensemble.replicas", "not used by a " + kind + " scenario");
      c.ensemble.replicas = static_cast<int>(r.integer(*e, "ensemble", "replicas", c.ensemble.replicas, 1));
      c.ensemble.threads = static_cast<unsigned>(r.integer(*e, "ensemble", "threads", 1, 1, 1024));
    }
  }

  switch (c.kind) {
    case ScenarioKind::simulate:
    case ScenarioKind::switch_rate:
      break;
    case ScenarioKind::propagate: {
      if (!c.environment.symmetric())
        r.error("environment.p2", "moment propagation needs a symmetric environment (p1 == p2)");
      if (!c.environment.counterfactual)
        r.error("environment.counterfactual", "moment propagation covers the counterfactual task only");
      if (c.agent && c.agent->policy.mode == Policy::Mode::greedy)
        r.error("agent.policy", "the moment closure expands the softmax policy; greedy is not supported");
      if (const json* p = r.object(root, "", "propagate", false)) {
        r.only(*p, "propagate", {"steps"});
        c.steps = static_cast<int>(r.integer(*p, "propagate", "steps", 0, 0, 100'000'000));
      }
      break;
    }
    case ScenarioKind::sweep_delta: {
      if (const json* s = r.object(root, "", "sweep", true)) {
        r.only(*s, "sweep", {"x", "beta", "p"});
        c.sweep.x = r.grid(*s, "sweep", "x", 0.0, 2.0, true);
        c.sweep.beta = r.grid(*s, "sweep", "beta", 0.0, 1e6, true);
        c.sweep.p = r.grid(*s, "sweep", "p", 0.0, 1.0, true);
      }
      break;
    }
    case ScenarioKind::fit: {
      if (const json* f = r.object(root, "", "fit", true)) c.fit = read_fit(r, *f, true);
      break;
    }
    case ScenarioKind::recover: {
      if (!c.environment.counterfactual)
        r.error("environment.counterfactual", "the recovery experiment needs counterfactual feedback");
      if (const json* f = r.object(root, "", "fit", false)) {
        c.fit = read_fit(r, *f, false);
        if (f->contains("models")) r.error("fit.models", "recovery always fits the full model");
      }
      if (const json* rb = r.object(root, "", "recover", false)) {
        const std::string path = "recover";
        r.only(*rb, path, {"n_agents", "generator"});
        c.recover.n_agents = static_cast<int>(r.integer(*rb, path, "n_agents", 500, 1));
        if (const json* g = r.object(*rb, path, "generator", false)) {
          const std::string gp = "recover.generator";
          r.only(*g, gp, {"kind", "beta", "rates", "alpha", "x"});
          const std::string gk = r.string(*g, gp, "kind", "bayes_softmax");
          if (gk == "bayes_softmax")
            c.recover.generator.kind = RecoveryGenerator::Kind::bayes_softmax;
          else if (gk == "bayes_greedy")
            c.recover.generator.kind = RecoveryGenerator::Kind::bayes_greedy;
          else if (gk == "q")
            c.recover.generator.kind = RecoveryGenerator::Kind::q_learner;
          else
            r.error("recover.generator.kind", "expected bayes_softmax, bayes_greedy or q (got '" + gk + "')");
          c.recover.generator.beta = r.number_in(*g, gp, "beta", 10.0, 0.0, 1e6);
          const bool has_rates = g->contains("rates") || g->contains("alpha") || g->contains("x");
          if (has_rates && c.recover.generator.kind != RecoveryGenerator::Kind::q_learner)
            r.error(gp, "learning rates apply to the q generator only");
          c.recover.generator.rates = read_rates(r, *g, gp, RateQuad::uniform(0.3));
        }
      }
      break;
    }
    case ScenarioKind::new_arm: {
      if (const json* f = r.object(root, "", "fit", false)) {
        c.fit = read_fit(r, *f, false);
        if (f->contains("models")) r.error("fit.models", "use new_arm.q_model to choose the Q-learning model");
      }
      if (const json* n = r.object(root, "", "new_arm", true)) {
        const std::string path = "new_arm";
        r.only(*n, path, {"sessions", "subject", "q_model", "p3", "training_trials", "reps"});
        c.new_arm.sessions = r.string(*n, path, "sessions", "");
        if (c.new_arm.sessions.empty()) r.error("new_arm.sessions", "a session CSV path is required");
        c.new_arm.subject = r.string(*n, path, "subject", "");
        const std::string qm = r.string(*n, path, "q_model", "full");
        try {
          c.new_arm.q_model = family_from_name(qm);
          if (c.new_arm.q_model == ModelFamily::bayes) r.error("new_arm.q_model", "must be a Q-learning model");
        } catch (const ValidationError& e) {
          r.error("new_arm.q_model", e.what());
        }
        c.new_arm.p3 = r.grid(*n, path, "p3", 0.0, 1.0, true);
        c.new_arm.training_trials = static_cast<int>(r.integer(*n, path, "training_trials", 24, 0));
        c.new_arm.reps = static_cast<int>(r.integer(*n, path, "reps", 10'000, 1));
      }
      break;
    }
  }

  if (c.kind == ScenarioKind::switch_rate && root.contains("min_switch")) {
    if (!c.environment.symmetric())
      r.error("min_switch", "the tau_c scan needs a symmetric environment (p1 == p2)");
    if (const json* m = r.object(root, "", "min_switch", false)) {
      const std::string path = "min_switch";
      r.only(*m, path, {"alpha1", "alpha2", "tau_c"});
      MinSwitchBlock ms;
      ms.alpha1 = r.grid(*m, path, "alpha1", 0.0, 1.0, true);
      ms.alpha2 = r.rate(*m, path, "alpha2", 0.01);
      for (double t : r.grid(*m, path, "tau_c", 0.0, 1e8, true)) {
        if (t != std::floor(t)) {
          r.error("min_switch.tau_c", "values must be integers");
          break;
        }
        ms.tau_c.push_back(static_cast<int>(t));
      }
      c.min_switch = ms;
    }
  }

  if (diags.empty()) res.config = c;
  return res;
}

namespace {

ordered_json rates_json(const RateQuad& r) {
  return {{"a_plus_c", r.plus_c}, {"a_minus_c", r.minus_c}, {"a_plus_u", r.plus_u}, {"a_minus_u", r.minus_u}};
}

ordered_json fit_options_json(const FitBlock& f, bool with_sessions) {
  ordered_json j;
  if (with_sessions) {
    j["sessions"] = f.sessions;
    ordered_json models = ordered_json::array();
    for (ModelFamily m : f.models) models.push_back(family_name(m));
    j["models"] = models;
  }
  j["restarts"] = f.restarts;
  j["tolerance"] = f.tolerance;
  j["beta_max"] = f.beta_max;
  return j;
}

}  // namespace

ordered_json to_json(const ScenarioConfig& c) {
  ordered_json j;
  j["kind"] = kind_name(c.kind);
  j["seed"] = c.seed;
  const bool env = c.kind == ScenarioKind::simulate || c.kind == ScenarioKind::propagate ||
                   c.kind == ScenarioKind::switch_rate || c.kind == ScenarioKind::recover;
  if (env) {
    j["environment"] = {{"p1", c.environment.p1},
                        {"p2", c.environment.p2},
                        {"counterfactual", c.environment.counterfactual},
                        {"horizon", c.environment.horizon}};
  }
  if (c.agent) {
    const AgentBlock& a = *c.agent;
    ordered_json aj;
    aj["type"] = a.type == AgentBlock::Type::bayes ? "bayes" : "q";
    if (a.type == AgentBlock::Type::q) {
      aj["rates"] = rates_json(a.rates.base);
      const Schedule& s = a.rates.schedule;
      switch (s.kind) {
        case Schedule::Kind::constant: aj["schedule"] = {{"kind", "constant"}}; break;
        case Schedule::Kind::step:
          aj["schedule"] = {{"kind", "step"}, {"alpha1", s.alpha1}, {"alpha2", s.alpha2}, {"tau_c", s.tau_c}};
          break;
        case Schedule::Kind::bayes: aj["schedule"] = {{"kind", "bayes"}}; break;
      }
      aj["q0"] = {a.q0.q1, a.q0.q2};
    }
    aj["beta"] = a.policy.beta;
    aj["policy"] = a.policy.mode == Policy::Mode::greedy ? "greedy" : "softmax";
    aj["random_tie_break"] = a.policy.random_tie_break;
    j["agent"] = aj;
  }
  switch (c.kind) {
    case ScenarioKind::simulate:
    case ScenarioKind::switch_rate:
      j["ensemble"] = {{"replicas", c.ensemble.replicas}, {"threads", c.ensemble.threads}};
      if (c.min_switch) {
        ordered_json taus = ordered_json::array();
        for (int t : c.min_switch->tau_c) taus.push_back(t);
        j["min_switch"] = {{"alpha1", c.min_switch->alpha1}, {"alpha2", c.min_switch->alpha2}, {"tau_c", taus}};
      }
      break;
    case ScenarioKind::propagate:
      j["propagate"] = {{"steps", c.steps}};
      break;
    case ScenarioKind::sweep_delta:
      j["sweep"] = {{"x", c.sweep.x}, {"beta", c.sweep.beta}, {"p", c.sweep.p}};
      break;
    case ScenarioKind::fit:
      j["ensemble"] = {{"threads", c.ensemble.threads}};
      j["fit"] = fit_options_json(c.fit, true);
      break;
    case ScenarioKind::recover: {
      j["ensemble"] = {{"threads", c.ensemble.threads}};
      j["fit"] = fit_options_json(c.fit, false);
      ordered_json g;
      switch (c.recover.generator.kind) {
        case RecoveryGenerator::Kind::bayes_softmax: g["kind"] = "bayes_softmax"; break;
        case RecoveryGenerator::Kind::bayes_greedy: g["kind"] = "bayes_greedy"; break;
        case RecoveryGenerator::Kind::q_learner: g["kind"] = "q"; break;
      }
      g["beta"] = c.recover.generator.beta;
      if (c.recover.generator.kind == RecoveryGenerator::Kind::q_learner)
        g["rates"] = rates_json(c.recover.generator.rates);
      j["recover"] = {{"n_agents", c.recover.n_agents}, {"generator", g}};
      break;
    }
    case ScenarioKind::new_arm:
      j["fit"] = fit_options_json(c.fit, false);
      j["new_arm"] = {{"sessions", c.new_arm.sessions},
                      {"subject", c.new_arm.subject},
                      {"q_model", family_name(c.new_arm.q_model)},
                      {"p3", c.new_arm.p3},
                      {"training_trials", c.new_arm.training_trials},
                      {"reps", c.new_arm.reps}};
      break;
  }
  if (!c.output_directory.empty()) j["output"] = {{"directory", c.output_directory}};
  return j;
}

std::string serialize_config(const ScenarioConfig& c) { return to_json(c).dump(2) + "\n"; }

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace tabb::cli
