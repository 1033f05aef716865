#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tabb/agents.hpp"
#include "tabb/session.hpp"

namespace tabb {

/// Model families, in the fixed order used to break BIC ties.
enum class ModelFamily { bayes, constant, confirmation, full };

constexpr std::array<ModelFamily, 4> kAllFamilies{ModelFamily::bayes, ModelFamily::constant,
                                                 ModelFamily::confirmation, ModelFamily::full};

/// Number of free parameters: Bayes 1 (beta), Const 2 (alpha, beta),
/// Conf 3 (alpha_conf, alpha_disconf, beta), Full 5 (four rates, beta).
int degrees_of_freedom(ModelFamily family);
std::string family_name(ModelFamily family);
ModelFamily family_from_name(const std::string& name);
/// Parameter names in the order of the parameter vector.
std::vector<std::string> parameter_names(ModelFamily family);

struct ModelSpec {
  ModelFamily family = ModelFamily::full;
  double beta_max = 50.0;

  /// Throws ValidationError if `params` has the wrong length or leaves the bounds.
  void validate(std::span<const double> params) const;
  /// Learning rates implied by a Q-family parameter vector.
  RateQuad rates(std::span<const double> params) const;
  double beta(std::span<const double> params) const { return params.back(); }
};

struct NllResult {
  double value = 0.0;
  /// Trials whose choice probability fell below the 1e-10 floor.
  int clamped = 0;
};

/// Negative log-likelihood of the recorded choices. Values start at (1/2, 1/2)
/// and are updated with the recorded rewards after each choice.
NllResult nll(const ModelSpec& model, std::span<const double> params, const SessionData& session);

/// Values after replaying the whole session (posterior means for Bayes).
QState replay_values(const ModelSpec& model, std::span<const double> params,
                     const SessionData& session);

/// df ln(n) + 2 nll.
double bic(double nll, int df, int n_trials);

struct FitResult {
  std::string subject_id;
  ModelFamily family = ModelFamily::full;
  std::vector<double> params;
  double nll = 0.0;
  double bic = 0.0;
  int n_trials = 0;
  int restarts_used = 0;
  bool converged = false;
  int clamped = 0;
  std::size_t evaluations = 0;
};

struct FitOptions {
  int restarts = 20;
  std::uint64_t seed = 0;
  double tolerance = 1e-8;
  double beta_max = 50.0;
  /// Extra starting points (natural parameters) tried before the quasi-random ones.
  std::vector<std::vector<double>> warm_starts;
};

class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, FitResult best) : std::runtime_error(what), best_(std::move(best)) {}
  const FitResult& best_so_far() const { return best_; }

 private:
  FitResult best_;
};

/// Maximum-likelihood fit. Q families use simplex searches in unbounded
/// coordinates (logistic rates, reflected log beta) from quasi-random starts;
/// the Bayes family uses a log-spaced beta grid refined by Brent's method.
/// Throws FitError if no search converges.
FitResult fit_subject(ModelFamily family, const SessionData& session, const FitOptions& opts = {});

/// Fits all four families in nesting order (Const, Conf, Full, plus Bayes), each
/// Q family warm-started at the embedding of the simpler optimum so the fitted
/// NLLs respect the nesting. Returned in kAllFamilies order.
std::vector<FitResult> fit_all_models(const SessionData& session, const FitOptions& opts = {});

/// Family with the lowest BIC; ties go to fewer parameters, then kAllFamilies order.
ModelFamily best_model(std::span<const FitResult> fits);

}  // namespace tabb
