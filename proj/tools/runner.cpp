#include "runner.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "tabb/io.hpp"
#include "tabb/moments.hpp"
#include "tabb/parallel.hpp"
#include "tabb/session.hpp"
#include "tabb/switching.hpp"

#ifndef TABB_VERSION
#define TABB_VERSION "0.0.0"
#endif

namespace tabb::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Collects the files of one run; CSV files open with a "# seed=" line.
class Artifacts {
 public:
  Artifacts(fs::path dir, std::uint64_t seed) : dir_(std::move(dir)), seed_(seed) {}

  std::ostringstream& csv(const std::string& header) {
    buf_.str("");
    buf_.clear();
    buf_ << "# seed=" << seed_ << '\n' << header << '\n';
    return buf_;
  }

  void finish_csv(const std::string& name) {
    const std::string text = buf_.str();
    // Data rows exclude the seed comment and the header.
    std::size_t lines = 0;
    for (char ch : text) lines += ch == '\n';
    write(name, text, lines - 2);
  }

  void json(const std::string& name, ordered_json doc, std::size_t rows) {
    doc["seed"] = seed_;
    write(name, doc.dump(2) + "\n", rows);
  }

  const std::vector<ArtifactEntry>& entries() const { return entries_; }
  const fs::path& dir() const { return dir_; }

 private:
  void write(const std::string& name, const std::string& text, std::size_t rows) {
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
    entries_.push_back({name, rows});
  }

  fs::path dir_;
  std::uint64_t seed_;
  std::ostringstream buf_;
  std::vector<ArtifactEntry> entries_;
};

const std::string& d(const std::string& s) { return s; }
std::string d(double v) { return format_double(v); }

unsigned thread_count(const ScenarioConfig& c, const RunOptions& o) {
  return o.threads.value_or(c.ensemble.threads);
}

FitOptions fit_options(const ScenarioConfig& c) {
  FitOptions f;
  f.restarts = c.fit.restarts;
  f.tolerance = c.fit.tolerance;
  f.beta_max = c.fit.beta_max;
  f.seed = c.seed;
  return f;
}

ordered_json fit_record(const FitResult& f) {
  ordered_json params = ordered_json::object();
  const auto names = parameter_names(f.family);
  for (std::size_t i = 0; i < names.size() && i < f.params.size(); ++i) params[names[i]] = f.params[i];
  return {{"subject_id", f.subject_id}, {"model", family_name(f.family)}, {"params", params},
          {"nll", f.nll},               {"bic", f.bic},                   {"converged", f.converged},
          {"restarts_used", f.restarts_used}, {"n_trials", f.n_trials},   {"clamped_trials", f.clamped}};
}

std::vector<SessionData> load_sessions(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open session file " + path.string());
  try {
    return read_sessions_csv(in);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

FitResult fit_or_best(ModelFamily family, const SessionData& s, const FitOptions& opts) {
  try {
    return fit_subject(family, s, opts);
  } catch (const FitError& e) {
    std::cerr << "warning: " << e.what() << "; keeping the best point found\n";
    return e.best_so_far();
  }
}

void run_simulate(const ScenarioConfig& c, const RunOptions& o, Artifacts& out) {
  const AgentSpec agent = c.agent->spec();
  const auto m = static_cast<std::size_t>(c.ensemble.replicas);
  std::vector<Trajectory> trajs(m);
  parallel_for(m, thread_count(c, o), [&](std::size_t r) {
    RngStream rng(c.seed, r);
    trajs[r] = run_trajectory(agent, c.environment, rng);
  });

  auto& t = out.csv("replica,t,action,r_chosen,r_unchosen,q1,q2");
  std::ostringstream body;
  write_trajectory_csv(body, trajs);
  const std::string text = body.str();
  t << text.substr(text.find('\n') + 1);
  out.finish_csv("trajectories.csv");

  std::vector<SessionData> sessions;
  sessions.reserve(m);
  for (const auto& tr : trajs)
    sessions.push_back(session_from_trajectory(tr, "r" + std::to_string(tr.replica), c.environment.counterfactual));
  auto& s = out.csv("subject_id,trial,action,r_chosen,r_unchosen");
  std::ostringstream sb;
  write_sessions_csv(sb, sessions);
  const std::string st = sb.str();
  s << st.substr(st.find('\n') + 1);
  out.finish_csv("sessions.csv");
}

void run_propagate(const ScenarioConfig& c, Artifacts& out) {
  LearningRateSet rates = c.agent->rates;
  if (c.agent->type == AgentBlock::Type::bayes) rates = {RateQuad{}, Schedule::bayes()};
  const int steps = c.steps > 0 ? c.steps : c.environment.horizon;
  const auto traj = propagate_moments(rates, c.environment.p1, c.agent->policy.beta, steps);

  auto& m = out.csv("t,m1,m11,m12,delta");
  for (std::size_t t = 0; t < traj.size(); ++t)
    m << t << ',' << d(traj[t].m1) << ',' << d(traj[t].m11) << ',' << d(traj[t].m12) << ','
      << d(traj[t].delta()) << '\n';
  out.finish_csv("moments.csv");

  auto& s = out.csv("t,value,stderr");
  for (std::size_t t = 0; t < traj.size(); ++t) s << t << ',' << d(traj[t].delta()) << ",0\n";
  out.finish_csv("delta.csv");
}

void run_sweep(const ScenarioConfig& c, Artifacts& out) {
  auto& s = out.csv("x,beta,p,delta_star");
  int failures = 0;
  for (double p : c.sweep.p)
    for (double beta : c.sweep.beta)
      for (double x : c.sweep.x) {
        double delta = std::nan("");
        try {
          delta = steady_state_delta(x_curve_rates(x), p, beta).delta;
        } catch (const ConvergenceError& e) {
          ++failures;
          std::cerr << "warning: x=" << x << " beta=" << beta << " p=" << p << ": " << e.what() << '\n';
        } catch (const ValidationError& e) {
          ++failures;
          std::cerr << "warning: x=" << x << " beta=" << beta << " p=" << p << ": " << e.what() << '\n';
        }
        s << d(x) << ',' << d(beta) << ',' << d(p) << ',' << d(delta) << '\n';
      }
  out.finish_csv("sweep.csv");
  if (failures) std::cerr << "warning: " << failures << " sweep point(s) written as nan\n";
}

void run_switch_rate(const ScenarioConfig& c, const RunOptions& o, Artifacts& out) {
  const EnsembleOptions eo{static_cast<std::size_t>(c.ensemble.replicas), c.seed, thread_count(c, o)};
  const SwitchSeries k = ensemble_switch_rate(c.agent->spec(), c.environment, eo);
  auto& a = out.csv("t,value,stderr");
  for (std::size_t t = 0; t < k.analytic.size(); ++t) a << t << ',' << d(k.analytic[t]) << ',' << d(k.analytic_se[t]) << '\n';
  out.finish_csv("switch_rate.csv");
  auto& e = out.csv("t,value,stderr");
  for (std::size_t t = 0; t < k.empirical.size(); ++t)
    e << t << ',' << d(k.empirical[t]) << ',' << d(k.empirical_se[t]) << '\n';
  out.finish_csv("switch_rate_empirical.csv");

  if (c.min_switch) {
    const auto rows = min_switch_vs_taucut(c.min_switch->alpha1, c.min_switch->alpha2, c.min_switch->tau_c,
                                           c.environment.p1, c.agent->policy.beta, c.environment.horizon, eo);
    auto& m = out.csv("alpha1,tau_c,k_min,t_min,stderr");
    for (const auto& r : rows)
      m << d(r.alpha1) << ',' << r.tau_c << ',' << d(r.k_min) << ',' << r.t_min << ',' << d(r.k_min_se) << '\n';
    out.finish_csv("min_switch.csv");
  }
}

void run_fit(const ScenarioConfig& c, const RunOptions& o, Artifacts& out) {
  const auto sessions = load_sessions(resolve(o.config_dir, c.fit.sessions));
  const FitOptions fo = fit_options(c);
  const auto& models = c.fit.models;
  const bool chained = std::find(models.begin(), models.end(), ModelFamily::confirmation) != models.end() ||
                       std::find(models.begin(), models.end(), ModelFamily::full) != models.end();

  std::vector<std::vector<FitResult>> fits(sessions.size());
  parallel_for(sessions.size(), thread_count(c, o), [&](std::size_t i) {
    if (chained) {
      std::vector<FitResult> all;
      try {
        all = fit_all_models(sessions[i], fo);
      } catch (const FitError& e) {
        std::cerr << "warning: " << e.what() << "; refitting models separately\n";
        for (ModelFamily f : kAllFamilies) all.push_back(fit_or_best(f, sessions[i], fo));
      }
      for (const auto& f : all)
        if (std::find(models.begin(), models.end(), f.family) != models.end()) fits[i].push_back(f);
    } else {
      for (ModelFamily f : models) fits[i].push_back(fit_or_best(f, sessions[i], fo));
    }
  });

  ordered_json records = ordered_json::array();
  for (const auto& subject : fits)
    for (const auto& f : subject) records.push_back(fit_record(f));
  const std::size_t n_records = records.size();
  out.json("fits.json", {{"records", std::move(records)}}, n_records);

  std::string header = "subject_id,best_model";
  for (ModelFamily m : models) header += ",bic_" + family_name(m);
  auto& b = out.csv(header);
  std::vector<int> wins(models.size(), 0);
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    const ModelFamily best = best_model(fits[i]);
    ++wins[std::find(models.begin(), models.end(), best) - models.begin()];
    b << sessions[i].subject_id << ',' << family_name(best);
    for (const auto& f : fits[i]) b << ',' << d(f.bic);
    b << '\n';
  }
  out.finish_csv("best_models.csv");

  auto& s = out.csv("model,n_best,mean_nll,mean_bic");
  for (std::size_t j = 0; j < models.size(); ++j) {
    std::vector<double> nll, bic;
    for (const auto& subject : fits) {
      nll.push_back(subject[j].nll);
      bic.push_back(subject[j].bic);
    }
    const double n = static_cast<double>(nll.size());
    s << family_name(models[j]) << ',' << wins[j] << ',' << d(pairwise_sum(nll.begin(), nll.end()) / n) << ','
      << d(pairwise_sum(bic.begin(), bic.end()) / n) << '\n';
  }
  out.finish_csv("summary.csv");
}

ordered_json sign_json(const std::optional<SignTest>& t) {
  if (!t) return nullptr;
  return {{"positive", t->positive}, {"negative", t->negative}, {"p_value", t->p_value}};
}

ordered_json rates_obj(const RateQuad& r) {
  return {{"a_plus_c", r.plus_c}, {"a_minus_c", r.minus_c}, {"a_plus_u", r.plus_u}, {"a_minus_u", r.minus_u}};
}

void run_recover(const ScenarioConfig& c, const RunOptions& o, Artifacts& out) {
  RecoveryOptions ro;
  ro.n_agents = c.recover.n_agents;
  ro.generator = c.recover.generator;
  ro.fit = fit_options(c);
  ro.seed = c.seed;
  ro.threads = thread_count(c, o);
  const RecoveryReport rep = recover_bias(c.environment, ro);
  if (rep.failed_fits > 0) std::cerr << "warning: " << rep.failed_fits << " fit(s) did not converge\n";

  ordered_json doc;
  doc["n_agents"] = rep.n_agents;
  doc["generator"] = to_json(c)["recover"]["generator"];
  doc["mean_rates"] = rates_obj(rep.mean_rates);
  doc["se_rates"] = rates_obj(rep.se_rates);
  doc["mean_beta"] = rep.mean_beta;
  doc["frac_positivity"] = rep.frac_positivity;
  doc["frac_confirmation"] = rep.frac_confirmation;
  doc["positivity_test"] = sign_json(rep.positivity_test);
  doc["unchosen_test"] = sign_json(rep.unchosen_test);
  doc["failed_fits"] = rep.failed_fits;
  out.json("recovery.json", doc, 1);

  auto& f = out.csv("agent,a_plus_c,a_minus_c,a_plus_u,a_minus_u,beta,nll,converged");
  for (std::size_t i = 0; i < rep.fits.size(); ++i) {
    const auto& r = rep.fits[i];
    f << i;
    for (double v : r.params) f << ',' << d(v);
    f << ',' << d(r.nll) << ',' << (r.converged ? 1 : 0) << '\n';
  }
  out.finish_csv("recovery_fits.csv");
}

void run_new_arm(const ScenarioConfig& c, const RunOptions& o, Artifacts& out) {
  const auto sessions = load_sessions(resolve(o.config_dir, c.new_arm.sessions));
  if (sessions.empty()) throw ValidationError("session file has no subjects");
  const SessionData* s = &sessions.front();
  if (!c.new_arm.subject.empty()) {
    const auto it = std::find_if(sessions.begin(), sessions.end(),
                                 [&](const SessionData& x) { return x.subject_id == c.new_arm.subject; });
    if (it == sessions.end()) throw ValidationError("subject '" + c.new_arm.subject + "' not found in the session file");
    s = &*it;
  }
  const FitOptions fo = fit_options(c);
  const FitResult fb = fit_or_best(ModelFamily::bayes, *s, fo);
  const FitResult fq = fit_or_best(c.new_arm.q_model, *s, fo);
  NewArmOptions no;
  no.training_trials = c.new_arm.training_trials;
  no.reps = c.new_arm.reps;
  no.seed = c.seed;
  const auto rows = new_arm_curve(fb, fq, *s, c.new_arm.p3, no);

  auto& a = out.csv("p3,pi3_bayes,pi3_q");
  for (const auto& r : rows) a << d(r.p3) << ',' << d(r.pi3_bayes) << ',' << d(r.pi3_q) << '\n';
  out.finish_csv("new_arm.csv");

  ordered_json recs = ordered_json::array();
  for (const FitResult* f : {&fb, &fq}) {
    ordered_json r = fit_record(*f);
    const QState v = replay_values(ModelSpec{f->family, c.fit.beta_max}, f->params, *s);
    r["terminal_values"] = {v.q1, v.q2};
    recs.push_back(r);
  }
  out.json("new_arm_fits.json", {{"records", recs}}, 2);
}

}  // namespace

fs::path resolve(const fs::path& config_dir, const std::string& path) {
  const fs::path p(path);
  return p.is_absolute() ? p : config_dir / p;
}

RunManifest run_scenario(const ScenarioConfig& config, const RunOptions& opts) {
  RunManifest manifest;
  manifest.version = TABB_VERSION;
  manifest.started_at = utc_now();
  manifest.config_hash = fnv1a_hex(serialize_config(config));

  fs::create_directories(opts.out_dir);
  Artifacts out(opts.out_dir, config.seed);
  switch (config.kind) {
    case ScenarioKind::simulate: run_simulate(config, opts, out); break;
    case ScenarioKind::propagate: run_propagate(config, out); break;
    case ScenarioKind::sweep_delta: run_sweep(config, out); break;
    case ScenarioKind::switch_rate: run_switch_rate(config, opts, out); break;
    case ScenarioKind::fit: run_fit(config, opts, out); break;
    case ScenarioKind::recover: run_recover(config, opts, out); break;
    case ScenarioKind::new_arm: run_new_arm(config, opts, out); break;
  }
  manifest.files = out.entries();
  manifest.finished_at = utc_now();

  ordered_json m;
  m["tool"] = "tabb-cli";
  m["version"] = manifest.version;
  m["kind"] = kind_name(config.kind);
  m["seed"] = config.seed;
  m["config_hash"] = manifest.config_hash;
  m["config"] = to_json(config);
  m["started_at"] = manifest.started_at;
  m["finished_at"] = manifest.finished_at;
  ordered_json files = ordered_json::array();
  for (const auto& f : manifest.files) files.push_back({{"path", f.path}, {"rows", f.rows}});
  m["files"] = files;
  std::ofstream mf(opts.out_dir / "manifest.json", std::ios::binary | std::ios::trunc);
  mf << m.dump(2) << '\n';
  if (!mf) throw std::runtime_error("cannot write " + (opts.out_dir / "manifest.json").string());
  return manifest;
}

}  // namespace tabb::cli
