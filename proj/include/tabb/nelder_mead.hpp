#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

namespace tabb {

struct SimplexOptions {
  /// Stop when max f - min f over the simplex falls to this value.
  double f_tolerance = 1e-8;
  /// ... and the simplex diameter (max coordinate distance to the best vertex) to this.
  double x_tolerance = 1e-6;
  std::size_t max_evaluations = 4000;
  /// Edge length of the initial axis-aligned simplex.
  double initial_step = 0.5;
};

struct SimplexResult {
  std::vector<double> x;
  double f = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

/// Nelder-Mead downhill simplex (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2). The returned point is never worse than x0.
template <class F>
SimplexResult nelder_mead(F&& f, std::vector<double> x0, const SimplexOptions& opts = {}) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> pts(n + 1, x0);
  std::vector<double> vals(n + 1);
  SimplexResult out;
  auto eval = [&](const std::vector<double>& x) {
    ++out.evaluations;
    const double v = f(x);
    return std::isnan(v) ? HUGE_VAL : v;
  };
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += opts.initial_step;
  for (std::size_t i = 0; i <= n; ++i) vals[i] = eval(pts[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);
  auto along = [&](double coef, std::vector<double>& dst) {
    const auto& worst = pts[order[n]];
    for (std::size_t j = 0; j < n; ++j) dst[j] = centroid[j] + coef * (worst[j] - centroid[j]);
  };

  while (true) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order[0];
    const std::size_t worst = order[n];

    double diameter = 0.0;
    for (std::size_t i = 1; i <= n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        diameter = std::max(diameter, std::abs(pts[order[i]][j] - pts[best][j]));
    if (vals[worst] - vals[best] <= opts.f_tolerance && diameter <= opts.x_tolerance) {
      out.converged = true;
      break;
    }
    if (out.evaluations >= opts.max_evaluations) break;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) centroid[j] += pts[order[i]][j] / static_cast<double>(n);

    along(-1.0, trial);
    const double f_reflect = eval(trial);
    if (f_reflect < vals[best]) {
      along(-2.0, trial2);
      const double f_expand = eval(trial2);
      if (f_expand < f_reflect) {
        pts[worst] = trial2;
        vals[worst] = f_expand;
      } else {
        pts[worst] = trial;
        vals[worst] = f_reflect;
      }
      continue;
    }
    if (f_reflect < vals[order[n - 1]]) {
      pts[worst] = trial;
      vals[worst] = f_reflect;
      continue;
    }
    const bool outside = f_reflect < vals[worst];
    along(outside ? -0.5 : 0.5, trial2);
    const double f_contract = eval(trial2);
    if (f_contract < (outside ? f_reflect : vals[worst])) {
      pts[worst] = trial2;
      vals[worst] = f_contract;
      continue;
    }
    for (std::size_t i = 1; i <= n; ++i) {
      auto& p = pts[order[i]];
      for (std::size_t j = 0; j < n; ++j) p[j] = pts[best][j] + 0.5 * (p[j] - pts[best][j]);
      vals[order[i]] = eval(p);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  out.x = pts[best];
  out.f = vals[best];
  return out;
}

}  // namespace tabb
