#include "mixopt/simulator.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "mixopt/scaling_model.hpp"

namespace mixopt {

namespace detail {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double uniform_open(std::uint64_t& state) {
  // 53 random bits shifted into (0,1).
  return (static_cast<double>(splitmix64(state) >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

double gaussian_noise(std::uint64_t seed, const std::string& run_id, const std::string& domain) {
  std::uint64_t state = seed;
  state ^= fnv1a(run_id);
  (void)splitmix64(state);
  state ^= fnv1a(domain);
  const double u1 = uniform_open(state);
  const double u2 = uniform_open(state);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace detail

std::vector<LossRecord> simulate_losses(const GroundTruth& truth,
                                        std::span<const SamplingSpec> manifests) {
  if (truth.params.empty()) throw ValidationError("simulate_losses: no ground-truth domains");
  for (const auto& p : truth.params) p.validate();
  if (!(truth.noise_sigma >= 0.0) || !std::isfinite(truth.noise_sigma))
    throw ValidationError("simulate_losses: noise_sigma must be finite and >= 0");

  std::vector<LossRecord> rows;
  rows.reserve(manifests.size() * truth.params.size());
  for (const auto& spec : manifests) {
    if (spec.target_tokens.size() != truth.params.size())
      throw ValidationError("simulate_losses: manifest '" + spec.run_id + "' has " +
                            std::to_string(spec.target_tokens.size()) +
                            " domains, ground truth has " +
                            std::to_string(truth.params.size()));
    for (std::size_t i = 0; i < truth.params.size(); ++i) {
      const DomainParams& p = truth.params[i];
      const TokenCount n_self = spec.target_tokens[i];
      const TokenCount n_other = spec.total_tokens - n_self;
      double loss = domain_loss(p, n_self, n_other);
      if (truth.noise_sigma > 0.0)
        loss *= std::exp(truth.noise_sigma *
                         detail::gaussian_noise(truth.seed, spec.run_id, p.name));
      rows.push_back({spec.run_id, p.name, loss});
    }
  }
  return rows;
}

RecoveryReport recovery_experiment(const GroundTruth& truth, const MixPlan& plan,
                                   std::span<const TokenCount> budgets,
                                   const FitOptions& fit_options,
                                   const OptimizeOptions& optimize_options) {
  if (truth.params.size() != plan.domains.size())
    throw ValidationError("recovery_experiment: ground truth and plan domain counts differ");
  for (std::size_t i = 0; i < truth.params.size(); ++i)
    if (truth.params[i].name != plan.domains[i].name)
      throw ValidationError("recovery_experiment: ground truth domain '" +
                            truth.params[i].name + "' does not match plan domain '" +
                            plan.domains[i].name + "'");

  RecoveryReport report;
  report.noise_sigma = truth.noise_sigma;
  report.seed = truth.seed;

  const std::vector<SamplingSpec> manifests = emit_run_manifests(plan);
  const std::vector<LossRecord> rows = simulate_losses(truth, manifests);

  // Route the simulated losses through the same CSV ingestion the real
  // pipeline uses.
  std::stringstream csv;
  csv << "run_id,domain,loss\n";
  csv.precision(17);
  for (const auto& r : rows) csv << r.run_id << ',' << r.domain << ',' << r.loss << '\n';

  const IngestResult ingest = ingest_losses(plan, csv);
  report.fits = fit_all_domains(ingest.groups, fit_options);
  std::vector<DomainParams> fitted;
  for (const auto& outcome : report.fits) {
    if (!outcome.error.empty())
      throw Error("recovery fit stage: domain '" + outcome.domain + "': " + outcome.error);
    fitted.push_back(outcome.result->params);
  }

  const GammaVector gamma = GammaVector::ones(truth.params.size());
  for (TokenCount budget : budgets) {
    RecoveryEntry entry;
    entry.budget = budget;
    const OptimizationReport truth_report =
        optimize_weights(truth.params, budget, gamma, optimize_options);
    const OptimizationReport fit_report =
        optimize_weights(fitted, budget, gamma, optimize_options);
    entry.true_weights = truth_report.weights;
    entry.recovered_weights = fit_report.weights;
    for (std::size_t i = 0; i < truth.params.size(); ++i)
      entry.weight_error_linf = std::max(
          entry.weight_error_linf, std::abs(entry.true_weights[i] - entry.recovered_weights[i]));
    const double f_true_at_recovered =
        total_objective(truth.params, entry.recovered_weights, budget, gamma);
    entry.objective_regret_rel =
        (f_true_at_recovered - truth_report.objective) / std::abs(truth_report.objective);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace mixopt
