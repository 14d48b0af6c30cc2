#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mixopt/fitting.hpp"
#include "mixopt/optimizer.hpp"
#include "mixopt/types.hpp"

namespace mixopt {

struct DomainSource {
  std::string name;
  std::string source_uri;
  TokenCount available_tokens = 0;
};

/// A perturbation-experiment plan: K domains, a small unit sample split
/// evenly across them, the ratios by which each domain is scaled in turn,
/// and the final data budget the optimized mixture targets.
struct MixPlan {
  std::vector<DomainSource> domains;
  TokenCount unit_sample_n = 0;
  std::vector<double> perturbation_ratios;  // defaulted to {1/2, 1/3, 2, 3}
  TokenCount budget_n0 = 0;
  std::uint64_t seed = 0;

  std::size_t domain_count() const { return domains.size(); }
};

struct MakePlanResult {
  MixPlan plan;
  std::vector<std::string> warnings;
};

/// Validates a raw plan configuration and fills defaulted fields. Errors on
/// fewer than two domains, duplicate or unusable domain names, missing
/// source URIs, zero available tokens, and ratios that are non-positive or
/// equal to 1 (which would duplicate the base run). A unit sample above half
/// the budget draws a warning, not an error.
MakePlanResult make_plan(const MixPlan& config);

/// Even split of the unit sample across domains by largest remainder;
/// entries sum to unit_sample_n exactly.
std::vector<TokenCount> base_allocations(const MixPlan& plan);

/// Deterministic run identifier for a perturbation run.
std::string perturbation_run_id(const std::string& domain, double ratio);

/// One training run's sampling targets; repeat_factor > 1 marks domains
/// whose target exceeds the available data and must be upsampled.
struct SamplingSpec {
  std::string run_id;
  std::vector<TokenCount> target_tokens;  // plan domain order
  std::vector<double> repeat_factor;
  TokenCount total_tokens = 0;
};

/// The 4K+1 run manifests of the perturbation protocol: one base run with
/// every domain at unit/K, then one run per (domain, ratio) scaling just
/// that domain.
std::vector<SamplingSpec> emit_run_manifests(const MixPlan& plan);

struct LossRecord {
  std::string run_id;
  std::string domain;
  double loss = 0.0;
};

struct LossRecordSet {
  std::vector<LossRecord> records;
};

struct IngestResult {
  LossRecordSet records;
  /// Per-domain observation groups ready for fitting, in plan domain order:
  /// the base reading plus the four perturbed readings of that domain, all
  /// sharing n_other_fixed = unit_sample_n - base allocation.
  std::vector<ObservationGroup> groups;
  int ignored_rows = 0;
  std::vector<std::string> warnings;
};

IngestResult ingest_losses(const MixPlan& plan, std::istream& csv);
IngestResult ingest_losses_file(const MixPlan& plan, const std::string& csv_path);

enum class BaselineMode { original, equal_tokens, equal_items };

struct ItemStats {
  std::string domain;
  std::int64_t items = 0;
  TokenCount tokens = 0;
};

/// Reference mixtures: original keeps the source token proportions,
/// equal_tokens is uniform, equal_items gives each domain the token mass an
/// equal item count would induce (proportional to mean tokens per item).
WeightVector baseline_weights(const MixPlan& plan, BaselineMode mode,
                              std::span<const ItemStats> item_stats = {});

/// Splits `total` tokens across weights by largest remainder; the returned
/// counts sum to total exactly.
std::vector<TokenCount> tokens_from_weights(const WeightVector& weights, TokenCount total);

struct PipelineReport {
  MixPlan plan;
  std::vector<DomainFitOutcome> fits;
  std::vector<DomainParams> params;
  std::vector<std::pair<TokenCount, OptimizationReport>> sweep;
  std::vector<double> sweep_linf_deltas;
  bool has_final = false;
  OptimizationReport final_report;          // at plan.budget_n0
  SamplingSpec final_spec;                  // weights scaled to the budget
  std::vector<std::string> warnings;
  int ignored_rows = 0;
};

/// Full pipeline: ingest losses, fit every domain, sweep the given budgets,
/// and build the final sampling spec at the plan budget. Empty budgets stop
/// after the fits. Module failures surface as errors labeled with the stage.
PipelineReport run_pipeline(const MixPlan& plan, std::istream& losses_csv,
                            std::span<const TokenCount> budgets, const GammaVector& gamma,
                            const FitOptions& fit_options = {},
                            const OptimizeOptions& optimize_options = {});
PipelineReport run_pipeline_file(const MixPlan& plan, const std::string& losses_csv_path,
                                 std::span<const TokenCount> budgets, const GammaVector& gamma,
                                 const FitOptions& fit_options = {},
                                 const OptimizeOptions& optimize_options = {});

}  // namespace mixopt
