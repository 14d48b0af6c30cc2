#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mixopt/planner.hpp"
#include "mixopt/types.hpp"

namespace mixopt {

/// Synthetic-trainer oracle: ground-truth parameters plus multiplicative
/// log-normal observation noise. Stands in for the actual training runs of
/// the perturbation protocol.
struct GroundTruth {
  std::vector<DomainParams> params;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Loss rows for every (run, validation domain) pair: the model loss at the
/// run's token split, times exp(noise_sigma * z). The Gaussian draw comes
/// from a counter-based stream keyed by (seed, run_id, domain), so values
/// are independent of generation order. noise_sigma = 0 reproduces
/// domain_loss bit for bit.
std::vector<LossRecord> simulate_losses(const GroundTruth& truth,
                                        std::span<const SamplingSpec> manifests);

struct RecoveryEntry {
  TokenCount budget = 0;
  WeightVector true_weights;
  WeightVector recovered_weights;
  double weight_error_linf = 0.0;
  /// (true objective at recovered weights - true optimum) / true optimum.
  double objective_regret_rel = 0.0;
};

struct RecoveryReport {
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::vector<DomainFitOutcome> fits;
  std::vector<RecoveryEntry> entries;
};

/// End-to-end self-check: simulate the plan's runs from the ground truth,
/// ingest, fit, optimize at each budget, and score the recovered weights
/// against the optimum computed directly from the true parameters.
RecoveryReport recovery_experiment(const GroundTruth& truth, const MixPlan& plan,
                                   std::span<const TokenCount> budgets,
                                   const FitOptions& fit_options = {},
                                   const OptimizeOptions& optimize_options = {});

namespace detail {

/// Standard normal draw from the counter-based stream for (seed, run, domain).
double gaussian_noise(std::uint64_t seed, const std::string& run_id, const std::string& domain);

}  // namespace detail

}  // namespace mixopt
