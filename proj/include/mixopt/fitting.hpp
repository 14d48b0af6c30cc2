#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mixopt/types.hpp"

namespace mixopt {

/// One measured (domain, token-count, validation-loss) triple from a
/// perturbation run. All observations feeding one fit share n_other_fixed,
/// the aggregate size of the other domains at the original allocation.
struct LossObservation {
  std::string domain;
  TokenCount n_self = 0;
  TokenCount n_other_fixed = 0;
  double loss = 0.0;
};

struct FitOptions {
  /// Huber transition point on raw loss residuals.
  double delta = 1e-3;
  /// Gradient-infinity-norm tolerance on the scaled problem.
  double tolerance = 1e-10;
  /// Iteration cap per multi-start point.
  int max_iterations = 500;
  /// Token normalization scale; 0 selects the median observed n_self.
  double normalization = 0.0;
  /// Multi-start results whose objective is within best * (1 + near_tie_rel)
  /// + 1e-12 count as tied; the smaller-beta member wins the tie. With five
  /// observations and five unknowns the Huber optimum is a broad ridge, so
  /// near-equal objectives are statistically indistinguishable and the
  /// flattest member extrapolates most conservatively.
  double near_tie_rel = 1.0;
};

struct FitResult {
  DomainParams params;
  double huber_objective = 0.0;
  /// n_other_fixed - k * n_other_fixed^alpha; non-negative when the
  /// transfer-cap constraint holds.
  double constraint_slack = 0.0;
  int n_restarts_used = 0;
  bool converged = false;
};

/// Huber loss of a residual: r^2/2 inside |r| <= delta, the linear
/// continuation delta*(|r| - delta/2) outside.
double huber(double delta, double r);

/// Estimates the five domain parameters from >= 5 observations by minimizing
/// summed Huber residuals of the fixed-transfer loss model, subject to
/// k * n_other_fixed^alpha <= n_other_fixed. Deterministic multi-start
/// damped-Newton iteration in log/logit-transformed coordinates; the best
/// final objective wins, ties broken by smaller beta then lexicographic
/// parameter order.
FitResult fit_domain(std::span<const LossObservation> observations,
                     const FitOptions& options = {});

struct DomainFitOutcome {
  std::string domain;
  std::optional<FitResult> result;
  std::string error;  ///< non-empty iff the fit failed
};

using ObservationGroup = std::pair<std::string, std::vector<LossObservation>>;

/// Independent fits, one per group, in input order. Per-domain failures are
/// captured in the outcome instead of aborting the remaining fits. Groups
/// may be fitted in parallel.
std::vector<DomainFitOutcome> fit_all_domains(std::span<const ObservationGroup> groups,
                                              const FitOptions& options = {});

/// Fitted-model loss prediction at a held-out size, with the same fixed
/// transfer pool the fit used.
double predict_loss(const DomainParams& params, TokenCount n_self, TokenCount n_other_fixed);

}  // namespace mixopt
