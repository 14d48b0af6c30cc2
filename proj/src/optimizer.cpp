#include "mixopt/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace mixopt {

namespace {

constexpr double kBoundTol = 1e-9;

struct Bounds {
  std::vector<double> lo;
  std::vector<double> hi;
};

Bounds make_bounds(std::span<const DomainParams> params, const OptimizeOptions& options) {
  Bounds b;
  b.lo.reserve(params.size());
  b.hi.reserve(params.size());
  for (const auto& p : params) {
    b.lo.push_back(p.k == 0.0 ? options.zero_weight_floor : 0.0);
    // With k > 0 the one-sided derivative diverges at w = 1; keep iterates a
    // hair inside so gradients stay finite.
    b.hi.push_back(p.k > 0.0 ? 1.0 - 1e-12 : 1.0);
  }
  return b;
}

double objective_at(std::span<const DomainParams> params, const GammaVector& gamma,
                    std::span<const double> w, double budget) {
  double sum = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double base = detail::term_base(params[i], w[i], budget);
    sum += gamma[i] * (params[i].C * detail::pow_explicit(base, -params[i].beta) + params[i].E);
  }
  return sum;
}

void gradient_at(std::span<const DomainParams> params, const GammaVector& gamma,
                 std::span<const double> w, double budget, std::vector<double>& g) {
  g.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    g[i] = detail::term_gradient_raw(params[i], gamma[i], w[i], budget);
}

/// KKT spread/violation for a feasible point given its raw gradient.
double kkt_from_gradient(std::span<const double> w, std::span<const double> g,
                         std::span<const double> lo) {
  const double inf = std::numeric_limits<double>::infinity();
  double interior_min = inf, interior_max = -inf, interior_sum = 0.0;
  int n_interior = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const bool at_lower = w[i] <= lo[i] + kBoundTol;
    const bool at_upper = w[i] >= 1.0 - kBoundTol;
    if (at_lower || at_upper) continue;
    interior_min = std::min(interior_min, g[i]);
    interior_max = std::max(interior_max, g[i]);
    interior_sum += g[i];
    ++n_interior;
  }
  if (n_interior > 0) {
    const double common = interior_sum / n_interior;
    double residual = interior_max - interior_min;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] <= lo[i] + kBoundTol)
        residual = std::max(residual, std::max(0.0, common - g[i]));
      else if (w[i] >= 1.0 - kBoundTol)
        residual = std::max(residual, std::max(0.0, g[i] - common));
    }
    return residual;
  }
  // Every coordinate sits on a bound; the conditions are consistent iff no
  // saturated coordinate has a larger gradient than some zeroed coordinate.
  double lower_min = inf, upper_max = -inf;
  bool any_lower = false, any_upper = false;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] >= 1.0 - kBoundTol) {
      upper_max = std::max(upper_max, g[i]);
      any_upper = true;
    } else {
      lower_min = std::min(lower_min, g[i]);
      any_lower = true;
    }
  }
  if (!any_lower || !any_upper) return 0.0;
  return std::max(0.0, upper_max - lower_min);
}

/// Exact solution of  min 1/2 sum H_i d_i^2 + g_i d_i  s.t. sum d = 0,
/// lo <= w + d <= hi, by piecewise-linear root finding in the equality
/// multiplier. H must be strictly positive.
std::vector<double> solve_separable_qp(std::span<const double> g, std::span<const double> h,
                                       std::span<const double> w, const Bounds& bounds) {
  const std::size_t n = g.size();
  auto step_at = [&](double lambda, std::vector<double>& d) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double unc = -(g[i] + lambda) / h[i];
      d[i] = std::clamp(unc, bounds.lo[i] - w[i], bounds.hi[i] - w[i]);
      sum += d[i];
    }
    return sum;
  };

  std::vector<double> breaks;
  breaks.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    breaks.push_back(-g[i] - h[i] * (bounds.hi[i] - w[i]));
    breaks.push_back(-g[i] - h[i] * (bounds.lo[i] - w[i]));
  }
  std::sort(breaks.begin(), breaks.end());

  std::vector<double> d(n);
  // s(lambda) is continuous and non-increasing; bracket the root over the
  // sorted breakpoints, then interpolate inside the bracketing segment.
  double left = breaks.front();
  double s_left = step_at(left, d);
  if (s_left <= 0.0) return d;  // root at or below the first breakpoint
  double lambda = breaks.back();
  double s_right = step_at(breaks.back(), d);
  if (s_right >= 0.0) return d;

  std::size_t a = 0, b = breaks.size() - 1;
  while (b - a > 1) {
    const std::size_t mid = (a + b) / 2;
    if (step_at(breaks[mid], d) > 0.0)
      a = mid;
    else
      b = mid;
  }
  left = breaks[a];
  s_left = step_at(left, d);
  const double right = breaks[b];
  s_right = step_at(right, d);
  if (s_left == s_right || left == right) {
    lambda = right;
  } else {
    lambda = left + (0.0 - s_left) * (right - left) / (s_right - s_left);
  }
  const double drift = step_at(lambda, d);
  // Push any floating-point drift in the equality onto a coordinate with slack.
  if (drift != 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      const double adjusted = d[i] - drift;
      if (w[i] + adjusted >= bounds.lo[i] && w[i] + adjusted <= bounds.hi[i]) {
        d[i] = adjusted;
        break;
      }
    }
  }
  return d;
}

}  // namespace

namespace detail {

std::vector<double> project_to_simplex(std::span<const double> v, std::span<const double> lower) {
  const std::size_t n = v.size();
  double mass = 1.0;
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = v[i] - lower[i];
    mass -= lower[i];
  }
  std::vector<double> sorted(z);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    cumulative += sorted[j];
    const double candidate = (cumulative - mass) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0)
      theta = candidate;
    else
      break;
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = lower[i] + std::max(0.0, z[i] - theta);
  return out;
}

}  // namespace detail

double kkt_residual(std::span<const DomainParams> params, const WeightVector& w,
                    TokenCount n0, const GammaVector& gamma) {
  if (params.size() != w.size() || params.size() != gamma.size())
    throw ValidationError("kkt_residual: dimension mismatch");
  w.validate();
  const double budget = static_cast<double>(n0);
  std::vector<double> g;
  gradient_at(params, gamma, w.weights, budget, g);
  std::vector<double> lo(params.size(), 0.0);
  return kkt_from_gradient(w.weights, g, lo);
}

OptimizationReport optimize_weights(std::span<const DomainParams> params, TokenCount n0,
                                    const GammaVector& gamma, const OptimizeOptions& options) {
  if (params.empty()) throw ValidationError("optimize_weights: K must be >= 1");
  for (const auto& p : params) p.validate();
  gamma.validate();
  if (params.size() != gamma.size())
    throw ValidationError("optimize_weights: params/gamma dimension mismatch");
  if (n0 <= 0) throw ValidationError("optimize_weights: budget n0 must be > 0");

  const std::size_t n = params.size();
  const double budget = static_cast<double>(n0);
  OptimizationReport report;

  if (n == 1) {
    report.weights = WeightVector({1.0});
    report.objective = objective_at(params, gamma, report.weights.weights, budget);
    report.kkt_residual = 0.0;
    report.converged = true;
    report.active_bounds = {0};
    return report;
  }

  const Bounds bounds = make_bounds(params, options);
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  double f = objective_at(params, gamma, w, budget);
  std::vector<double> g, h, trial(n);
  // Successful termination is either gradient balance or a vanishing Newton
  // step; exhausting iterations or the line search is reported as
  // non-convergence with the best feasible iterate.
  bool converged = false;
  int iterations = 0;
  double kkt = std::numeric_limits<double>::infinity();
  double gscale = 0.0;

  auto kkt_threshold = [&](double scale) {
    double tol = options.kkt_tol_rel * std::max(scale, std::numeric_limits<double>::min());
    if (options.kkt_tol_abs > 0.0) tol = std::max(tol, options.kkt_tol_abs);
    return tol;
  };

  for (; iterations < options.max_iterations; ++iterations) {
    gradient_at(params, gamma, w, budget, g);
    gscale = 0.0;
    for (double gi : g) gscale += std::abs(gi);
    gscale /= static_cast<double>(n);
    kkt = kkt_from_gradient(w, g, bounds.lo);
    if (kkt <= kkt_threshold(gscale)) {
      converged = true;
      break;
    }

    h.resize(n);
    double h_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      h[i] = detail::term_hessian_raw(params[i], gamma[i], w[i], budget);
      if (std::isfinite(h[i])) h_max = std::max(h_max, h[i]);
    }
    const double h_floor = std::max(1e-12 * std::max(h_max, 1.0), 1e-300);
    for (double& hi : h)
      if (!(std::isfinite(hi) && hi > h_floor)) hi = h_floor;

    std::vector<double> d = solve_separable_qp(g, h, w, bounds);
    double step_norm = 0.0, gd = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      step_norm = std::max(step_norm, std::abs(d[i]));
      gd += g[i] * d[i];
    }
    if (step_norm < options.step_tol) {
      // The quadratic model uses the exact (diagonal) Hessian, so a vanishing
      // step certifies the iterate sits within step_tol of the constrained
      // stationary point even when the gradient scale itself vanishes.
      converged = true;
      break;
    }

    auto try_step = [&](const std::vector<double>& dir, double slope) {
      double t = 1.0;
      while (t > 1e-14) {
        for (std::size_t i = 0; i < n; ++i)
          trial[i] = std::clamp(w[i] + t * dir[i], bounds.lo[i], bounds.hi[i]);
        const double f_trial = objective_at(params, gamma, trial, budget);
        if (f_trial <= f + 1e-4 * t * slope) {
          w = trial;
          f = f_trial;
          return true;
        }
        t *= 0.5;
      }
      return false;
    };

    if (!try_step(d, gd)) {
      // Quadratic step rejected end to end; fall back to a projected
      // gradient direction.
      const double scale = 1.0 / std::max(h_max, h_floor);
      std::vector<double> target(n);
      for (std::size_t i = 0; i < n; ++i) target[i] = w[i] - scale * g[i];
      std::vector<double> projected = detail::project_to_simplex(target, bounds.lo);
      std::vector<double> d_pg(n);
      double gd_pg = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        d_pg[i] = projected[i] - w[i];
        gd_pg += g[i] * d_pg[i];
      }
      if (gd_pg >= 0.0 || !try_step(d_pg, gd_pg)) break;
    }
  }

  report.weights = WeightVector(w);
  report.max_renormalization = report.weights.renormalize();
  report.objective = objective_at(params, gamma, report.weights.weights, budget);
  gradient_at(params, gamma, report.weights.weights, budget, g);
  gscale = 0.0;
  for (double gi : g) gscale += std::abs(gi);
  gscale /= static_cast<double>(n);
  report.kkt_residual = kkt_from_gradient(report.weights.weights, g, bounds.lo);
  report.gradient_scale = gscale;
  report.iterations = iterations;
  report.converged = converged || report.kkt_residual <= kkt_threshold(gscale);
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = report.weights[i];
    if (wi <= kBoundTol || wi >= 1.0 - kBoundTol) report.active_bounds.push_back(static_cast<int>(i));
    if (params[i].k == 0.0 && wi <= options.zero_weight_floor + 1e-15 && wi > 0.0)
      report.floor_clamped.push_back(static_cast<int>(i));
  }
  return report;
}

std::vector<std::pair<TokenCount, OptimizationReport>> budget_sweep(
    std::span<const DomainParams> params, std::span<const TokenCount> budgets,
    const GammaVector& gamma, const OptimizeOptions& options) {
  for (std::size_t i = 1; i < budgets.size(); ++i)
    if (budgets[i] <= budgets[i - 1])
      throw ValidationError("budget_sweep: budgets must be strictly increasing");
  std::vector<std::pair<TokenCount, OptimizationReport>> out;
  out.reserve(budgets.size());
  for (TokenCount b : budgets) out.emplace_back(b, optimize_weights(params, b, gamma, options));
  return out;
}

std::vector<double> sweep_linf_deltas(
    std::span<const std::pair<TokenCount, OptimizationReport>> sweep) {
  std::vector<double> deltas;
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    double d = 0.0;
    const auto& a = sweep[i - 1].second.weights.weights;
    const auto& b = sweep[i].second.weights.weights;
    for (std::size_t j = 0; j < a.size(); ++j) d = std::max(d, std::abs(a[j] - b[j]));
    deltas.push_back(d);
  }
  return deltas;
}

std::vector<GridPoint> grid_search(std::span<const DomainParams> params, TokenCount n0,
                                   const GammaVector& gamma, double grid_step,
                                   std::span<const double> levels) {
  if (params.empty()) throw ValidationError("grid_search: K must be >= 1");
  std::vector<double> level_values(levels.begin(), levels.end());
  if (level_values.empty()) {
    if (!(grid_step > 0.0 && grid_step < 1.0))
      throw ValidationError("grid_search: grid_step must lie in (0,1) when no levels are given");
    for (double v = grid_step; v < 1.0 - 1e-12; v += grid_step) level_values.push_back(v);
  }
  if (level_values.empty()) throw ValidationError("grid_search: empty level set");
  for (double v : level_values)
    if (!(v > 0.0 && v < 1.0)) throw ValidationError("grid_search: levels must lie in (0,1)");
  std::sort(level_values.begin(), level_values.end());

  const std::size_t k = params.size();
  const double lo = level_values.front(), hi = level_values.back();
  std::vector<GridPoint> points;
  std::vector<double> current(k);

  // Depth-first enumeration with partial-sum pruning.
  auto enumerate = [&](auto&& self, std::size_t depth, double partial) -> void {
    const double remaining = static_cast<double>(k - depth);
    if (partial + remaining * lo > 1.0 + 1e-9) return;
    if (partial + remaining * hi < 1.0 - 1e-9) return;
    if (depth == k) {
      if (std::abs(partial - 1.0) <= 1e-9) {
        WeightVector w(current);
        w.renormalize();
        points.push_back({std::move(w), 0.0});
      }
      return;
    }
    for (double v : level_values) {
      current[depth] = v;
      self(self, depth + 1, partial + v);
    }
  };
  enumerate(enumerate, 0, 0.0);

  if (points.empty())
    throw ValidationError("grid_search: no level combination sums to 1");

  for (auto& pt : points) pt.objective = total_objective(params, pt.weights, n0, gamma);
  std::sort(points.begin(), points.end(), [](const GridPoint& a, const GridPoint& b) {
    if (a.objective != b.objective) return a.objective < b.objective;
    return a.weights.weights < b.weights.weights;
  });
  return points;
}

}  // namespace mixopt
