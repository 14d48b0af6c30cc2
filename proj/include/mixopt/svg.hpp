#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mixopt/optimizer.hpp"
#include "mixopt/types.hpp"

namespace mixopt {
namespace svg {

/// Weight-vs-budget line chart: one polyline per domain over log10(budget).
std::string weights_vs_budget(std::span<const std::pair<TokenCount, OptimizationReport>> sweep,
                              std::span<const std::string> names);

/// Objective over the 2-simplex projection for K = 3: a shaded lattice on
/// the (w_1, w_2) triangle (the third weight is dependent), the evaluated
/// grid mixtures as dots, and a star at the optimizer's solution.
std::string objective_surface(std::span<const DomainParams> params, TokenCount n0,
                              const GammaVector& gamma, std::span<const GridPoint> grid,
                              const WeightVector& optimum,
                              std::span<const std::string> names);

}  // namespace svg
}  // namespace mixopt
