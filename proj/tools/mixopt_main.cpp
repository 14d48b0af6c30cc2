#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mixopt/io.hpp"
#include "mixopt/optimizer.hpp"
#include "mixopt/planner.hpp"
#include "mixopt/simulator.hpp"
#include "mixopt/svg.hpp"

namespace fs = std::filesystem;
using namespace mixopt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNonConvergence = 3;

struct CommonArgs {
  std::string out_dir = ".";
  bool quiet = false;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--out-dir", args.out_dir, "Directory for emitted artifacts");
  cmd->add_flag("--quiet", args.quiet, "Suppress informational output");
  cmd->add_option("--seed",
                  [&args](const std::vector<std::string>& values) {
                    args.seed = std::stoull(values.front());
                    return true;
                  },
                  "Override the seed carried by the input files");
}

std::vector<double> parse_doubles(const std::string& csv, const char* what) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string field;
  while (std::getline(ss, field, ',')) {
    try {
      out.push_back(std::stod(field));
    } catch (const std::exception&) {
      throw ValidationError(std::string(what) + ": bad number '" + field + "'");
    }
  }
  if (out.empty()) throw ValidationError(std::string(what) + ": empty list");
  return out;
}

std::vector<TokenCount> parse_tokens(const std::string& csv, const char* what) {
  std::vector<TokenCount> out;
  std::stringstream ss(csv);
  std::string field;
  while (std::getline(ss, field, ',')) {
    try {
      out.push_back(static_cast<TokenCount>(std::stoll(field)));
    } catch (const std::exception&) {
      throw ValidationError(std::string(what) + ": bad token count '" + field + "'");
    }
  }
  if (out.empty()) throw ValidationError(std::string(what) + ": empty list");
  return out;
}

GammaVector gamma_for(const std::string& gamma_csv, std::size_t k) {
  if (gamma_csv.empty()) return GammaVector::ones(k);
  GammaVector gamma(parse_doubles(gamma_csv, "--gamma"));
  gamma.validate();
  if (gamma.size() != k)
    throw ValidationError("--gamma: expected " + std::to_string(k) + " entries");
  return gamma;
}

std::vector<std::string> domain_names(std::span<const DomainParams> params) {
  std::vector<std::string> names;
  names.reserve(params.size());
  for (const auto& p : params) names.push_back(p.name);
  return names;
}

void emit(const CommonArgs& common, const std::string& filename, const std::string& content) {
  fs::create_directories(common.out_dir);
  io::write_file((fs::path(common.out_dir) / filename).string(), content);
}

void info(const CommonArgs& common, const std::string& line) {
  if (!common.quiet) std::cout << line << "\n";
}

int cmd_plan(const CommonArgs& common, const std::string& config_path,
             const std::string& ratios_csv) {
  MixPlan config = io::plan_from_json(io::read_file(config_path));
  if (!ratios_csv.empty()) config.perturbation_ratios = parse_doubles(ratios_csv, "--ratios");
  if (common.seed) config.seed = *common.seed;
  const MakePlanResult result = make_plan(config);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";

  emit(common, "plan.json", io::plan_to_json(result.plan));
  const auto manifests = emit_run_manifests(result.plan);
  fs::create_directories(fs::path(common.out_dir) / "manifests");
  for (const auto& spec : manifests)
    io::write_file((fs::path(common.out_dir) / "manifests" / (spec.run_id + ".json")).string(),
                   io::manifest_to_json(spec, result.plan.domains));
  info(common, "wrote plan.json and " + std::to_string(manifests.size()) + " manifests to " +
                   common.out_dir);
  return kExitOk;
}

int cmd_fit(const CommonArgs& common, const std::string& plan_path,
            const std::string& losses_path, const std::string& observations_path, double delta,
            const std::string& budgets_csv) {
  FitOptions options;
  options.delta = delta;

  std::vector<ObservationGroup> groups;
  const bool have_plan = !plan_path.empty() && !losses_path.empty();
  if (!observations_path.empty()) {
    groups = io::observations_from_csv(io::read_file(observations_path));
  } else {
    if (!have_plan)
      throw ValidationError("fit: provide either --observations or both --plan and --losses");
    const MixPlan plan = io::plan_from_json(io::read_file(plan_path));
    const auto ingest = ingest_losses_file(make_plan(plan).plan, losses_path);
    for (const auto& w : ingest.warnings) std::cerr << "warning: " << w << "\n";
    groups = ingest.groups;
  }

  const auto outcomes = fit_all_domains(groups, options);
  emit(common, "params.json", io::params_json(outcomes, options.delta));
  bool any_error = false, all_converged = true;
  for (const auto& outcome : outcomes) {
    if (!outcome.error.empty()) {
      std::cerr << "error: domain '" << outcome.domain << "': " << outcome.error << "\n";
      any_error = true;
    } else if (!outcome.result->converged) {
      all_converged = false;
    }
  }
  info(common, "wrote params.json (" + std::to_string(groups.size()) + " domains)");
  if (any_error) return kExitValidation;

  if (!budgets_csv.empty()) {
    if (!have_plan)
      throw ValidationError("fit: --budgets needs --plan/--losses to run the full pipeline");
    const MixPlan plan = make_plan(io::plan_from_json(io::read_file(plan_path))).plan;
    const auto budgets = parse_tokens(budgets_csv, "--budgets");
    const auto report = run_pipeline_file(plan, losses_path, budgets,
                                          GammaVector::ones(plan.domain_count()), options);
    emit(common, "pipeline_report.json", io::pipeline_report_json(report));
    info(common, "wrote pipeline_report.json (" + std::to_string(budgets.size()) +
                     " sweep budgets)");
  }
  return all_converged ? kExitOk : kExitNonConvergence;
}

int cmd_optimize(const CommonArgs& common, const std::string& params_path, TokenCount budget,
                 const std::string& gamma_csv) {
  const auto params = io::params_from_json(io::read_file(params_path));
  const GammaVector gamma = gamma_for(gamma_csv, params.size());
  const auto report = optimize_weights(params, budget, gamma);
  emit(common, "weights.json", io::weights_json(report, budget, gamma, domain_names(params)));
  info(common, "objective " + io::format_double(report.objective) + ", kkt_residual " +
                   io::format_double(report.kkt_residual));
  return report.converged ? kExitOk : kExitNonConvergence;
}

int cmd_sweep(const CommonArgs& common, const std::string& params_path,
              const std::string& budgets_csv, const std::string& gamma_csv) {
  const auto params = io::params_from_json(io::read_file(params_path));
  const GammaVector gamma = gamma_for(gamma_csv, params.size());
  const auto budgets = parse_tokens(budgets_csv, "--budgets");
  const auto sweep = budget_sweep(params, budgets, gamma);
  const auto names = domain_names(params);
  emit(common, "sweep.csv", io::sweep_csv(sweep, names));
  emit(common, "weights_vs_budget.svg", svg::weights_vs_budget(sweep, names));
  const auto deltas = sweep_linf_deltas(sweep);
  for (std::size_t i = 0; i < deltas.size(); ++i)
    info(common, "linf delta " + std::to_string(sweep[i].first) + " -> " +
                     std::to_string(sweep[i + 1].first) + ": " + io::format_double(deltas[i]));
  bool converged = true;
  for (const auto& [budget, rep] : sweep) converged = converged && rep.converged;
  return converged ? kExitOk : kExitNonConvergence;
}

int cmd_grid(const CommonArgs& common, const std::string& params_path, TokenCount budget,
             double grid_step, const std::string& levels_csv, const std::string& gamma_csv) {
  const auto params = io::params_from_json(io::read_file(params_path));
  const GammaVector gamma = gamma_for(gamma_csv, params.size());
  std::vector<double> levels;
  if (!levels_csv.empty()) levels = parse_doubles(levels_csv, "--levels");
  const auto grid = grid_search(params, budget, gamma, grid_step, levels);
  emit(common, "grid.csv", io::grid_csv(grid, domain_names(params)));
  info(common, std::to_string(grid.size()) + " mixtures; best objective " +
                   io::format_double(grid.front().objective));
  return kExitOk;
}

int cmd_simulate(const CommonArgs& common, const std::string& truth_path,
                 const std::string& plan_path) {
  GroundTruth truth = io::truth_from_json(io::read_file(truth_path));
  if (common.seed) truth.seed = *common.seed;
  const MixPlan plan = make_plan(io::plan_from_json(io::read_file(plan_path))).plan;
  if (truth.params.size() != plan.domains.size())
    throw ValidationError("simulate: ground truth and plan domain counts differ");
  for (std::size_t i = 0; i < truth.params.size(); ++i)
    if (truth.params[i].name != plan.domains[i].name)
      throw ValidationError("simulate: truth domain '" + truth.params[i].name +
                            "' does not match plan domain '" + plan.domains[i].name + "'");
  const auto rows = simulate_losses(truth, emit_run_manifests(plan));
  emit(common, "losses.csv", io::losses_csv(rows));
  info(common, "wrote losses.csv (" + std::to_string(rows.size()) + " rows)");
  return kExitOk;
}

int cmd_recover(const CommonArgs& common, const std::string& truth_path,
                const std::string& plan_path, const std::string& budgets_csv) {
  GroundTruth truth = io::truth_from_json(io::read_file(truth_path));
  if (common.seed) truth.seed = *common.seed;
  const MixPlan plan = make_plan(io::plan_from_json(io::read_file(plan_path))).plan;
  const auto budgets = parse_tokens(budgets_csv, "--budgets");
  const auto report = recovery_experiment(truth, plan, budgets);
  emit(common, "recovery.json", io::recovery_report_json(report));
  for (const auto& entry : report.entries)
    info(common, "budget " + std::to_string(entry.budget) + ": weight error " +
                     io::format_double(entry.weight_error_linf) + ", regret " +
                     io::format_double(entry.objective_regret_rel));
  return kExitOk;
}

int cmd_report(const CommonArgs& common, const std::string& params_path,
               const std::string& budgets_csv, TokenCount surface_budget, double grid_step,
               const std::string& gamma_csv) {
  const auto params = io::params_from_json(io::read_file(params_path));
  const GammaVector gamma = gamma_for(gamma_csv, params.size());
  const auto budgets = parse_tokens(budgets_csv, "--budgets");
  const auto names = domain_names(params);

  const auto sweep = budget_sweep(params, budgets, gamma);
  emit(common, "sweep.csv", io::sweep_csv(sweep, names));
  emit(common, "weights_vs_budget.svg", svg::weights_vs_budget(sweep, names));

  const TokenCount focus = surface_budget > 0 ? surface_budget : budgets.back();
  const auto grid = grid_search(params, focus, gamma, grid_step);
  emit(common, "grid.csv", io::grid_csv(grid, names));

  if (params.size() == 3) {
    const auto best = optimize_weights(params, focus, gamma);
    emit(common, "surface.svg",
         svg::objective_surface(params, focus, gamma, grid, best.weights, names));
  } else {
    info(common, "notice: surface.svg requires exactly 3 domains; emitted grid.csv only");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Training-data mixture optimization: perturbation planning, scaling-law "
               "fitting, and convex weight solving"};
  app.require_subcommand(1);

  CommonArgs common;

  auto* plan_cmd = app.add_subcommand("plan", "Validate a config and emit run manifests");
  std::string plan_config, plan_ratios;
  plan_cmd->add_option("--config", plan_config, "Plan configuration JSON")->required();
  plan_cmd->add_option("--ratios", plan_ratios, "Override perturbation ratios, e.g. 0.5,2");
  add_common(plan_cmd, common);

  auto* fit_cmd = app.add_subcommand("fit", "Fit per-domain loss parameters");
  std::string fit_plan, fit_losses, fit_observations, fit_budgets;
  double fit_delta = 1e-3;
  fit_cmd->add_option("--plan", fit_plan, "plan.json from the plan subcommand");
  fit_cmd->add_option("--losses", fit_losses, "losses.csv with run_id,domain,loss");
  fit_cmd->add_option("--observations", fit_observations,
                      "Observation CSV domain,ratio,n_self_tokens,n_other_tokens,loss");
  fit_cmd->add_option("--delta", fit_delta, "Huber transition point");
  fit_cmd->add_option("--budgets", fit_budgets,
                      "Also run the full pipeline and write pipeline_report.json");
  add_common(fit_cmd, common);

  auto* opt_cmd = app.add_subcommand("optimize", "Solve for optimal mixture weights");
  std::string opt_params, opt_gamma;
  TokenCount opt_budget = 0;
  opt_cmd->add_option("--params", opt_params, "params.json")->required();
  opt_cmd->add_option("--budget", opt_budget, "Data budget in tokens")->required();
  opt_cmd->add_option("--gamma", opt_gamma, "Per-domain objective multipliers, e.g. 1,0");
  add_common(opt_cmd, common);

  auto* sweep_cmd = app.add_subcommand("sweep", "Optimal weights across budgets");
  std::string sweep_params, sweep_budgets, sweep_gamma;
  sweep_cmd->add_option("--params", sweep_params, "params.json")->required();
  sweep_cmd->add_option("--budgets", sweep_budgets, "Comma-separated budgets")->required();
  sweep_cmd->add_option("--gamma", sweep_gamma, "Per-domain objective multipliers");
  add_common(sweep_cmd, common);

  auto* grid_cmd = app.add_subcommand("grid", "Exhaustive lattice baseline");
  std::string grid_params, grid_levels, grid_gamma;
  TokenCount grid_budget = 0;
  double grid_step = 0.125;
  grid_cmd->add_option("--params", grid_params, "params.json")->required();
  grid_cmd->add_option("--budget", grid_budget, "Data budget in tokens")->required();
  grid_cmd->add_option("--grid-step", grid_step, "Lattice step when no levels are given");
  grid_cmd->add_option("--levels", grid_levels, "Explicit lattice levels, e.g. 0.125,0.25");
  grid_cmd->add_option("--gamma", grid_gamma, "Per-domain objective multipliers");
  add_common(grid_cmd, common);

  auto* sim_cmd = app.add_subcommand("simulate", "Generate losses from ground truth");
  std::string sim_truth, sim_plan;
  sim_cmd->add_option("--truth", sim_truth, "truth.json")->required();
  sim_cmd->add_option("--plan", sim_plan, "plan.json")->required();
  add_common(sim_cmd, common);

  auto* rec_cmd = app.add_subcommand("recover", "Simulate, refit and score weight recovery");
  std::string rec_truth, rec_plan, rec_budgets;
  rec_cmd->add_option("--truth", rec_truth, "truth.json")->required();
  rec_cmd->add_option("--plan", rec_plan, "plan.json")->required();
  rec_cmd->add_option("--budgets", rec_budgets, "Comma-separated budgets")->required();
  add_common(rec_cmd, common);

  auto* rep_cmd = app.add_subcommand("report", "Sweep, grid and surface artifacts");
  std::string rep_params, rep_budgets, rep_gamma;
  TokenCount rep_budget = 0;
  double rep_step = 0.125;
  rep_cmd->add_option("--params", rep_params, "params.json")->required();
  rep_cmd->add_option("--budgets", rep_budgets, "Comma-separated budgets")->required();
  rep_cmd->add_option("--budget", rep_budget, "Budget for grid/surface (default: largest)");
  rep_cmd->add_option("--grid-step", rep_step, "Lattice step for the grid baseline");
  rep_cmd->add_option("--gamma", rep_gamma, "Per-domain objective multipliers");
  add_common(rep_cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (plan_cmd->parsed()) return cmd_plan(common, plan_config, plan_ratios);
    if (fit_cmd->parsed())
      return cmd_fit(common, fit_plan, fit_losses, fit_observations, fit_delta, fit_budgets);
    if (opt_cmd->parsed()) return cmd_optimize(common, opt_params, opt_budget, opt_gamma);
    if (sweep_cmd->parsed()) return cmd_sweep(common, sweep_params, sweep_budgets, sweep_gamma);
    if (grid_cmd->parsed())
      return cmd_grid(common, grid_params, grid_budget, grid_step, grid_levels, grid_gamma);
    if (sim_cmd->parsed()) return cmd_simulate(common, sim_truth, sim_plan);
    if (rec_cmd->parsed()) return cmd_recover(common, rec_truth, rec_plan, rec_budgets);
    if (rep_cmd->parsed())
      return cmd_report(common, rep_params, rep_budgets, rep_budget, rep_step, rep_gamma);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
