#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mixopt/fitting.hpp"
#include "mixopt/optimizer.hpp"
#include "mixopt/planner.hpp"
#include "mixopt/simulator.hpp"
#include "mixopt/types.hpp"

namespace mixopt {
namespace io {

/// Shortest representation that parses back to the identical double.
std::string format_double(double v);

// ---- JSON documents (UTF-8, stable key order, trailing newline) ----

std::string plan_to_json(const MixPlan& plan);
MixPlan plan_from_json(const std::string& text);

std::string manifest_to_json(const SamplingSpec& spec, std::span<const DomainSource> domains);

std::string params_json(std::span<const DomainFitOutcome> outcomes, double delta);
/// Accepts either the params.json document or a bare array of parameter objects.
std::vector<DomainParams> params_from_json(const std::string& text);

std::string weights_json(const OptimizationReport& report, TokenCount budget,
                         const GammaVector& gamma, std::span<const std::string> domain_names);

std::string truth_to_json(const GroundTruth& truth);
GroundTruth truth_from_json(const std::string& text);

std::string pipeline_report_json(const PipelineReport& report);

std::string recovery_report_json(const RecoveryReport& report);

// ---- CSV documents ----

std::string losses_csv(std::span<const LossRecord> records);

/// Header `domain,ratio,n_self_tokens,n_other_tokens,loss`, grouped by
/// domain in order of first appearance.
std::vector<ObservationGroup> observations_from_csv(const std::string& text);

std::string grid_csv(std::span<const GridPoint> points, std::span<const std::string> names);

std::string sweep_csv(std::span<const std::pair<TokenCount, OptimizationReport>> sweep,
                      std::span<const std::string> names);

// ---- filesystem helpers ----

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace io
}  // namespace mixopt
