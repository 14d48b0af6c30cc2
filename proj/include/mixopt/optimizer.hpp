#pragma once

#include <span>
#include <utility>
#include <vector>

#include "mixopt/scaling_model.hpp"
#include "mixopt/types.hpp"

namespace mixopt {

struct OptimizeOptions {
  /// Convergence threshold on the KKT residual relative to the mean
  /// gradient magnitude. Relative so the stopping point is invariant to
  /// rescaling gamma; 1e-9 relative lands near 1e-11 absolute for gradients
  /// in the fitted-parameter regime.
  double kkt_tol_rel = 1e-9;
  /// Optional absolute KKT threshold; disabled when 0.
  double kkt_tol_abs = 0.0;
  /// Stop when the step infinity-norm falls below this.
  double step_tol = 1e-12;
  int max_iterations = 1000;
  /// Weights of domains with k = 0 are kept at or above this floor so the
  /// power-law base stays positive during iteration.
  double zero_weight_floor = 1e-9;
};

struct OptimizationReport {
  WeightVector weights;
  double objective = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  /// Domain indices whose weight sits at 0 or 1 in the solution.
  std::vector<int> active_bounds;
  bool converged = false;
  /// Mean absolute gradient at the solution; scale reference for kkt_residual.
  double gradient_scale = 0.0;
  /// Largest adjustment applied when renormalizing the weights at emission.
  double max_renormalization = 0.0;
  /// Indices where the k = 0 floor clamp binds at the solution.
  std::vector<int> floor_clamped;
};

/// Minimizes the gamma-weighted total objective over the probability simplex
/// using sequential quadratic steps (exact separable quadratic model, single
/// linearized equality, box bounds) with a backtracking line search and a
/// projected-gradient fallback. The objective is convex, so the returned
/// weights approximate the unique global minimizer.
OptimizationReport optimize_weights(std::span<const DomainParams> params, TokenCount n0,
                                    const GammaVector& gamma,
                                    const OptimizeOptions& options = {});

/// First-order optimality violation at feasible w: the spread of the
/// objective gradient over interior coordinates, plus any boundary
/// coordinate whose gradient breaks the complementary-slackness inequality
/// (a zero-weight domain whose gradient is below the interior common value,
/// or a saturated domain whose gradient is above it). Zero at the optimum.
/// May return +infinity where the gradient diverges at a boundary.
double kkt_residual(std::span<const DomainParams> params, const WeightVector& w,
                    TokenCount n0, const GammaVector& gamma);

/// Optimal weights for each budget; budgets must be strictly increasing.
std::vector<std::pair<TokenCount, OptimizationReport>> budget_sweep(
    std::span<const DomainParams> params, std::span<const TokenCount> budgets,
    const GammaVector& gamma, const OptimizeOptions& options = {});

/// Successive L-infinity differences between consecutive sweep entries;
/// diagnostic for the weights-vs-budget plateau behavior.
std::vector<double> sweep_linf_deltas(
    std::span<const std::pair<TokenCount, OptimizationReport>> sweep);

struct GridPoint {
  WeightVector weights;
  double objective = 0.0;
};

/// Enumerates every K-tuple over `levels` that sums to 1 within 1e-9 and
/// evaluates the total objective at each, ascending by objective (ties broken
/// lexicographically). When `levels` is empty they are derived as the
/// multiples of grid_step inside (0,1).
std::vector<GridPoint> grid_search(std::span<const DomainParams> params, TokenCount n0,
                                   const GammaVector& gamma, double grid_step,
                                   std::span<const double> levels = {});

namespace detail {

/// Euclidean projection onto {w : sum w = 1, w_i >= lower_i}.
std::vector<double> project_to_simplex(std::span<const double> v,
                                       std::span<const double> lower);

}  // namespace detail

}  // namespace mixopt
