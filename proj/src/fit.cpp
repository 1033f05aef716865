#include "tabb/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/tools/minima.hpp>

#include "tabb/io.hpp"
#include "tabb/nelder_mead.hpp"

namespace tabb {

int degrees_of_freedom(ModelFamily family) {
  switch (family) {
    case ModelFamily::bayes: return 1;
    case ModelFamily::constant: return 2;
    case ModelFamily::confirmation: return 3;
    case ModelFamily::full: return 5;
  }
  return 0;
}

std::string family_name(ModelFamily family) {
  switch (family) {
    case ModelFamily::bayes: return "bayes";
    case ModelFamily::constant: return "const";
    case ModelFamily::confirmation: return "conf";
    case ModelFamily::full: return "full";
  }
  return "?";
}

ModelFamily family_from_name(const std::string& name) {
  for (ModelFamily f : kAllFamilies)
    if (family_name(f) == name) return f;
  throw ValidationError("unknown model family '" + name + "' (expected bayes, const, conf or full)");
}

std::vector<std::string> parameter_names(ModelFamily family) {
  switch (family) {
    case ModelFamily::bayes: return {"beta"};
    case ModelFamily::constant: return {"alpha", "beta"};
    case ModelFamily::confirmation: return {"alpha_conf", "alpha_disconf", "beta"};
    case ModelFamily::full: return {"a_plus_c", "a_minus_c", "a_plus_u", "a_minus_u", "beta"};
  }
  return {};
}

void ModelSpec::validate(std::span<const double> params) const {
  if (params.size() != static_cast<std::size_t>(degrees_of_freedom(family)))
    throw ValidationError(family_name(family) + " model takes " +
                          std::to_string(degrees_of_freedom(family)) + " parameters");
  for (std::size_t i = 0; i + 1 < params.size(); ++i)
    if (!(params[i] >= 0.0 && params[i] <= 1.0))
      throw ValidationError("learning rate " + parameter_names(family)[i] + " must lie in [0, 1]");
  if (!(params.back() >= 0.0 && params.back() <= beta_max))
    throw ValidationError("beta must lie in [0, " + format_double(beta_max) + "]");
}

RateQuad ModelSpec::rates(std::span<const double> p) const {
  switch (family) {
    case ModelFamily::constant: return RateQuad::uniform(p[0]);
    case ModelFamily::confirmation: return {p[0], p[1], p[1], p[0]};
    case ModelFamily::full: return {p[0], p[1], p[2], p[3]};
    case ModelFamily::bayes: break;
  }
  throw ValidationError("the Bayes model has no constant learning rates");
}

namespace {

constexpr double kProbFloor = 1e-10;
constexpr int kMaxRebuilds = 10;

/// Replays the session, calling on_choice(values, action) before every update.
template <class OnChoice>
QState replay(const ModelSpec& model, std::span<const double> params, const SessionData& s,
              OnChoice&& on_choice) {
  if (model.family == ModelFamily::bayes) {
    BeliefState b;
    for (std::size_t k = 0; k < s.size(); ++k) {
      on_choice(posterior_means(b), s.trials[k].action);
      b = belief_update(b, s.trials[k].action, s.rewards(k), s.counterfactual);
    }
    return posterior_means(b);
  }
  const RateQuad rates = model.rates(params);
  QState q{0.5, 0.5};
  for (std::size_t k = 0; k < s.size(); ++k) {
    on_choice(q, s.trials[k].action);
    q = q_update(q, s.trials[k].action, s.rewards(k), rates, s.counterfactual);
  }
  return q;
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double logit(double a) {
  a = std::clamp(a, 1e-9, 1.0 - 1e-9);
  return std::log(a / (1.0 - a));
}

/// Unbounded search coordinates: logistic rates and a log beta reflected at beta_max.
struct Transform {
  ModelSpec model;

  std::vector<double> to_natural(const std::vector<double>& z) const {
    std::vector<double> x(z.size());
    for (std::size_t i = 0; i + 1 < z.size(); ++i) x[i] = logistic(z[i]);
    const double top = std::log(model.beta_max);
    x.back() = std::min(model.beta_max, std::exp(top - std::abs(top - z.back())));
    return x;
  }
  std::vector<double> to_search(std::span<const double> x) const {
    std::vector<double> z(x.size());
    for (std::size_t i = 0; i + 1 < x.size(); ++i) z[i] = logit(x[i]);
    z.back() = std::log(std::clamp(x.back(), 1e-9, model.beta_max));
    return z;
  }
};

double radical_inverse(unsigned k, unsigned base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  for (; k > 0; k /= base, f *= inv) r += f * (k % base);
  return r;
}

/// Shifted Halton points: rates uniform in logit over [0.01, 0.99], beta log-uniform in [0.5, 30].
std::vector<double> quasi_random_start(ModelFamily family, int k, std::span<const double> shift) {
  constexpr unsigned primes[] = {2, 3, 5, 7, 11};
  const int dim = degrees_of_freedom(family);
  std::vector<double> x(dim);
  for (int j = 0; j < dim; ++j) {
    double u = radical_inverse(static_cast<unsigned>(k + 1), primes[j]) + shift[j];
    u -= std::floor(u);
    constexpr double kLogitSpan = 4.59511985013459;  // logit(0.99)
    x[j] = j + 1 < dim ? logistic(kLogitSpan * (2 * u - 1)) : std::exp(std::log(0.5) + u * std::log(60.0));
  }
  return x;
}

FitResult fit_bayes(const ModelSpec& model, const SessionData& session) {
  std::size_t evals = 0;
  auto objective = [&](double beta) {
    ++evals;
    const double p[] = {beta};
    return nll(model, p, session).value;
  };
  std::vector<double> grid{0.0};
  constexpr int kGrid = 64;
  for (int i = 0; i < kGrid; ++i)
    grid.push_back(std::min(model.beta_max,
                            std::exp(std::log(1e-3) + i * (std::log(model.beta_max) - std::log(1e-3)) / (kGrid - 1))));
  std::vector<double> values(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) values[i] = objective(grid[i]);
  const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
  const double lo = grid[best == 0 ? 0 : best - 1];
  const double hi = grid[std::min(best + 1, grid.size() - 1)];
  std::uintmax_t iters = 200;
  auto [beta, f] = boost::math::tools::brent_find_minima(objective, lo, hi, 40, iters);
  if (values[best] < f) {
    beta = grid[best];
    f = values[best];
  }

  FitResult out;
  out.family = ModelFamily::bayes;
  out.params = {beta};
  out.nll = f;
  out.restarts_used = 1;
  out.converged = true;
  out.evaluations = evals;
  return out;
}

}  // namespace

NllResult nll(const ModelSpec& model, std::span<const double> params, const SessionData& session) {
  model.validate(params);
  const Policy policy{model.beta(params), Policy::Mode::softmax, false};
  NllResult out;
  replay(model, params, session, [&](QState q, Arm action) {
    const double pi1 = softmax_policy(q, policy);
    double prob = action == Arm::first ? pi1 : 1.0 - pi1;
    if (prob < kProbFloor) {
      prob = kProbFloor;
      ++out.clamped;
    }
    out.value -= std::log(prob);
  });
  return out;
}

QState replay_values(const ModelSpec& model, std::span<const double> params,
                     const SessionData& session) {
  model.validate(params);
  return replay(model, params, session, [](QState, Arm) {});
}

double bic(double nll_value, int df, int n_trials) {
  if (n_trials < 1) throw ValidationError("BIC needs at least one trial");
  return df * std::log(static_cast<double>(n_trials)) + 2.0 * nll_value;
}

FitResult fit_subject(ModelFamily family, const SessionData& session, const FitOptions& opts) {
  if (session.size() == 0) throw ValidationError("cannot fit an empty session");
  session.validate();
  const ModelSpec model{family, opts.beta_max};
  const int n = static_cast<int>(session.size());

  FitResult out;
  if (family == ModelFamily::bayes) {
    out = fit_bayes(model, session);
  } else {
    const Transform tr{model};
    auto objective = [&](const std::vector<double>& z) {
      return nll(model, tr.to_natural(z), session).value;
    };
    SimplexOptions nm;
    nm.f_tolerance = opts.tolerance;

    std::vector<std::vector<double>> starts;
    for (const auto& w : opts.warm_starts) {
      model.validate(w);
      starts.push_back(tr.to_search(w));
    }
    RngStream rng(opts.seed, 0);
    std::vector<double> shift(degrees_of_freedom(family));
    for (double& s : shift) s = rng.uniform();
    for (int k = 0; k < opts.restarts; ++k)
      starts.push_back(tr.to_search(quasi_random_start(family, k, shift)));

    SimplexResult best;
    best.f = std::numeric_limits<double>::infinity();
    bool any_converged = false;
    std::size_t evals = 0;
    for (const auto& z0 : starts) {
      SimplexResult r = nelder_mead(objective, z0, nm);
      evals += r.evaluations;
      // A collapsed simplex is rebuilt around its best vertex until that stops paying off.
      for (int again = 0; again < kMaxRebuilds && r.converged; ++again) {
        SimplexResult next = nelder_mead(objective, r.x, nm);
        evals += next.evaluations;
        const bool stalled = r.f - next.f <= opts.tolerance;
        r = std::move(next);
        if (stalled) break;
      }
      any_converged = any_converged || r.converged;
      if (r.f < best.f) best = std::move(r);
    }
    // One polishing pass from the incumbent with a smaller simplex.
    nm.initial_step = 0.1;
    SimplexResult polished = nelder_mead(objective, best.x, nm);
    evals += polished.evaluations;
    if (polished.f <= best.f) best = std::move(polished);

    out.family = family;
    out.params = tr.to_natural(best.x);
    out.nll = best.f;
    out.restarts_used = static_cast<int>(starts.size());
    out.converged = any_converged;
    out.evaluations = evals;
  }
  out.subject_id = session.subject_id;
  out.n_trials = n;
  out.clamped = nll(model, out.params, session).clamped;
  out.bic = bic(out.nll, degrees_of_freedom(family), n);
  if (!out.converged) throw FitError("no simplex search converged for subject " + session.subject_id, out);
  return out;
}

std::vector<FitResult> fit_all_models(const SessionData& session, const FitOptions& opts) {
  const FitResult bayes = fit_subject(ModelFamily::bayes, session, opts);

  const FitResult constant = fit_subject(ModelFamily::constant, session, opts);
  FitOptions conf_opts = opts;
  const auto& c = constant.params;
  conf_opts.warm_starts.push_back({c[0], c[0], c[1]});
  const FitResult conf = fit_subject(ModelFamily::confirmation, session, conf_opts);

  FitOptions full_opts = opts;
  const auto& k = conf.params;
  full_opts.warm_starts.push_back({k[0], k[1], k[1], k[0], k[2]});
  full_opts.warm_starts.push_back({c[0], c[0], c[0], c[0], c[1]});
  const FitResult full = fit_subject(ModelFamily::full, session, full_opts);
  return {bayes, constant, conf, full};
}

ModelFamily best_model(std::span<const FitResult> fits) {
  if (fits.empty()) throw ValidationError("best_model needs at least one fit");
  auto rank = [](ModelFamily f) {
    return static_cast<int>(std::find(kAllFamilies.begin(), kAllFamilies.end(), f) - kAllFamilies.begin());
  };
  const FitResult* best = &fits[0];
  for (const auto& f : fits.subspan(1)) {
    const bool better =
        f.bic < best->bic ||
        (f.bic == best->bic &&
         (degrees_of_freedom(f.family) < degrees_of_freedom(best->family) ||
          (degrees_of_freedom(f.family) == degrees_of_freedom(best->family) && rank(f.family) < rank(best->family))));
    if (better) best = &f;
  }
  return best->family;
}

}  // namespace tabb
