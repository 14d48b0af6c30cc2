#include "mixopt/planner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "mixopt/scaling_model.hpp"

namespace mixopt {

namespace {

bool usable_domain_name(const std::string& name) {
  if (name.empty()) return false;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

std::string format_double_shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw NumericError("format_double_shortest: conversion failed");
  return std::string(buf, ptr);
}

int find_domain(const MixPlan& plan, const std::string& name) {
  for (std::size_t i = 0; i < plan.domains.size(); ++i)
    if (plan.domains[i].name == name) return static_cast<int>(i);
  return -1;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // Trim surrounding whitespace and stray carriage returns.
    const auto begin = field.find_first_not_of(" \t\r");
    const auto end = field.find_last_not_of(" \t\r");
    fields.push_back(begin == std::string::npos ? "" : field.substr(begin, end - begin + 1));
  }
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

}  // namespace

std::string perturbation_run_id(const std::string& domain, double ratio) {
  return "perturb_" + domain + "_" + format_double_shortest(ratio);
}

MakePlanResult make_plan(const MixPlan& config) {
  MakePlanResult out;
  out.plan = config;
  MixPlan& plan = out.plan;

  if (plan.domains.size() < 2) throw ValidationError("plan: need at least 2 domains");
  std::set<std::string> seen;
  for (const auto& d : plan.domains) {
    if (!usable_domain_name(d.name))
      throw ValidationError("plan: domain name '" + d.name +
                            "' must be non-empty and use only [A-Za-z0-9_.-]");
    if (!seen.insert(d.name).second)
      throw ValidationError("plan: duplicate domain name '" + d.name + "'");
    if (d.source_uri.empty())
      throw ValidationError("plan: domain '" + d.name + "' is missing source_uri");
    if (d.available_tokens <= 0)
      throw ValidationError("plan: domain '" + d.name + "' has no available tokens");
  }
  if (plan.unit_sample_n <= 0) throw ValidationError("plan: unit_sample_n must be > 0");
  if (plan.budget_n0 <= 0) throw ValidationError("plan: budget_n0 must be > 0");

  if (plan.perturbation_ratios.empty())
    plan.perturbation_ratios = {0.5, 1.0 / 3.0, 2.0, 3.0};
  std::set<double> ratio_seen;
  for (double r : plan.perturbation_ratios) {
    if (!(r > 0.0) || !std::isfinite(r))
      throw ValidationError("plan: perturbation ratios must be positive");
    if (r == 1.0)
      throw ValidationError("plan: perturbation ratio 1 duplicates the base run");
    if (!ratio_seen.insert(r).second)
      throw ValidationError("plan: duplicate perturbation ratio " + format_double_shortest(r));
  }

  if (plan.unit_sample_n > plan.budget_n0 / 2)
    out.warnings.push_back("plan: unit_sample_n exceeds budget_n0/2; the perturbation sample "
                           "should be much smaller than the budget");
  return out;
}

std::vector<TokenCount> base_allocations(const MixPlan& plan) {
  const auto k = static_cast<TokenCount>(plan.domains.size());
  const TokenCount quota = plan.unit_sample_n / k;
  const TokenCount remainder = plan.unit_sample_n - quota * k;
  std::vector<TokenCount> alloc(plan.domains.size(), quota);
  // Equal fractional parts: hand the remainder out in domain order.
  for (TokenCount i = 0; i < remainder; ++i) alloc[static_cast<std::size_t>(i)] += 1;
  return alloc;
}

std::vector<SamplingSpec> emit_run_manifests(const MixPlan& plan) {
  const std::vector<TokenCount> base = base_allocations(plan);
  const std::size_t k = plan.domains.size();

  auto build = [&](const std::string& run_id, std::vector<TokenCount> targets) {
    SamplingSpec spec;
    spec.run_id = run_id;
    spec.total_tokens = std::accumulate(targets.begin(), targets.end(), TokenCount{0});
    spec.repeat_factor.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
      const double available = static_cast<double>(plan.domains[i].available_tokens);
      spec.repeat_factor[i] = std::max(1.0, static_cast<double>(targets[i]) / available);
    }
    spec.target_tokens = std::move(targets);
    return spec;
  };

  std::vector<SamplingSpec> specs;
  specs.reserve(1 + k * plan.perturbation_ratios.size());
  specs.push_back(build("base", base));
  for (std::size_t j = 0; j < k; ++j) {
    for (double ratio : plan.perturbation_ratios) {
      std::vector<TokenCount> targets = base;
      targets[j] = static_cast<TokenCount>(std::llround(ratio * static_cast<double>(base[j])));
      specs.push_back(build(perturbation_run_id(plan.domains[j].name, ratio), targets));
    }
  }
  return specs;
}

IngestResult ingest_losses(const MixPlan& plan, std::istream& csv) {
  IngestResult out;
  std::string line;
  if (!std::getline(csv, line)) throw ValidationError("losses csv: empty file");
  {
    const auto header = split_csv_line(line);
    if (header.size() != 3 || header[0] != "run_id" || header[1] != "domain" ||
        header[2] != "loss")
      throw ValidationError("losses csv: expected header 'run_id,domain,loss'");
  }

  const std::vector<SamplingSpec> specs = emit_run_manifests(plan);
  std::set<std::string> known_runs;
  for (const auto& s : specs) known_runs.insert(s.run_id);

  std::map<std::pair<std::string, std::string>, double> losses;
  int line_no = 1;
  while (std::getline(csv, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 3)
      throw ValidationError("losses csv line " + std::to_string(line_no) +
                            ": expected 3 fields");
    const std::string& run_id = fields[0];
    const std::string& domain = fields[1];
    double loss = 0.0;
    try {
      loss = std::stod(fields[2]);
    } catch (const std::exception&) {
      throw ValidationError("losses csv line " + std::to_string(line_no) + ": bad loss value '" +
                            fields[2] + "'");
    }
    if (!known_runs.count(run_id)) {
      ++out.ignored_rows;
      continue;
    }
    if (find_domain(plan, domain) < 0) {
      ++out.ignored_rows;
      continue;
    }
    if (!(loss > 0.0) || !std::isfinite(loss))
      throw ValidationError("losses csv line " + std::to_string(line_no) +
                            ": loss must be positive and finite");
    const auto key = std::make_pair(run_id, domain);
    if (losses.count(key))
      throw ValidationError("losses csv: duplicate entry for run '" + run_id + "', domain '" +
                            domain + "'");
    losses[key] = loss;
    out.records.records.push_back({run_id, domain, loss});
  }
  if (out.ignored_rows > 0)
    out.warnings.push_back("losses csv: ignored " + std::to_string(out.ignored_rows) +
                           " rows with unknown run or domain");

  const std::vector<TokenCount> base = base_allocations(plan);
  auto need = [&](const std::string& run_id, const std::string& domain) {
    const auto it = losses.find(std::make_pair(run_id, domain));
    if (it == losses.end()) {
      bool run_present = false;
      for (const auto& [key, value] : losses)
        if (key.first == run_id) {
          run_present = true;
          break;
  }
      if (!run_present)
        throw ValidationError("losses csv: missing run '" + run_id + "'");
      throw ValidationError("losses csv: run '" + run_id + "' is missing a loss for domain '" +
                            domain + "'");
    }
    return it->second;
  };

  for (std::size_t i = 0; i < plan.domains.size(); ++i) {
    const std::string& name = plan.domains[i].name;
    const TokenCount nof = plan.unit_sample_n - base[i];
    std::vector<LossObservation> group;
    group.push_back({name, base[i], nof, need("base", name)});
    for (double ratio : plan.perturbation_ratios) {
      const auto n_self =
          static_cast<TokenCount>(std::llround(ratio * static_cast<double>(base[i])));
      group.push_back({name, n_self, nof, need(perturbation_run_id(name, ratio), name)});
    }
    out.groups.emplace_back(name, std::move(group));
  }
  return out;
}

IngestResult ingest_losses_file(const MixPlan& plan, const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw ValidationError("cannot open losses csv: " + csv_path);
  return ingest_losses(plan, in);
}

WeightVector baseline_weights(const MixPlan& plan, BaselineMode mode,
                              std::span<const ItemStats> item_stats) {
  const std::size_t k = plan.domains.size();
  std::vector<double> w(k, 0.0);
  switch (mode) {
    case BaselineMode::equal_tokens: {
      std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(k));
      break;
    }
    case BaselineMode::original: {
      double total = 0.0;
      for (const auto& d : plan.domains) total += static_cast<double>(d.available_tokens);
      for (std::size_t i = 0; i < k; ++i)
        w[i] = static_cast<double>(plan.domains[i].available_tokens) / total;
      break;
    }
    case BaselineMode::equal_items: {
      if (item_stats.empty())
        throw ValidationError("baseline_weights: equal_items mode requires item stats");
      double total = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        const auto it =
            std::find_if(item_stats.begin(), item_stats.end(),
                         [&](const ItemStats& s) { return s.domain == plan.domains[i].name; });
        if (it == item_stats.end())
          throw ValidationError("baseline_weights: missing item stats for domain '" +
                                plan.domains[i].name + "'");
        if (it->items <= 0 || it->tokens <= 0)
          throw ValidationError("baseline_weights: item stats for domain '" +
                                plan.domains[i].name + "' must be positive");
        // Equal item counts induce token mass proportional to tokens/item.
        w[i] = static_cast<double>(it->tokens) / static_cast<double>(it->items);
        total += w[i];
      }
      for (double& v : w) v /= total;
      break;
    }
  }
  WeightVector result(std::move(w));
  result.renormalize();
  return result;
}

std::vector<TokenCount> tokens_from_weights(const WeightVector& weights, TokenCount total) {
  weights.validate();
  require_non_negative(total, "tokens_from_weights: total");
  const std::size_t k = weights.size();
  std::vector<TokenCount> out(k);
  std::vector<std::pair<double, std::size_t>> remainders(k);
  TokenCount assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double exact = weights[i] * static_cast<double>(total);
    out[i] = static_cast<TokenCount>(std::floor(exact));
    assigned += out[i];
    remainders[i] = {exact - std::floor(exact), i};
  }
  // Largest remainder first; ties resolve to the lower index.
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  TokenCount leftover = total - assigned;
  for (std::size_t j = 0; leftover > 0 && j < k; ++j, --leftover)
    out[remainders[j].second] += 1;
  return out;
}

PipelineReport run_pipeline(const MixPlan& plan, std::istream& losses_csv,
                            std::span<const TokenCount> budgets, const GammaVector& gamma,
                            const FitOptions& fit_options,
                            const OptimizeOptions& optimize_options) {
  PipelineReport report;
  report.plan = plan;

  IngestResult ingest;
  try {
    ingest = ingest_losses(plan, losses_csv);
  } catch (const Error& e) {
    throw ValidationError(std::string("ingest stage: ") + e.what());
  }
  report.warnings = ingest.warnings;
  report.ignored_rows = ingest.ignored_rows;

  report.fits = fit_all_domains(ingest.groups, fit_options);
  for (const auto& outcome : report.fits) {
    if (!outcome.error.empty())
      throw Error("fit stage: domain '" + outcome.domain + "': " + outcome.error);
    report.params.push_back(outcome.result->params);
  }

  if (budgets.empty()) return report;

  GammaVector effective_gamma = gamma;
  if (effective_gamma.size() == 0) effective_gamma = GammaVector::ones(plan.domains.size());
  if (effective_gamma.size() != plan.domains.size())
    throw ValidationError("pipeline: gamma length must match domain count");

  try {
    report.sweep = budget_sweep(report.params, budgets, effective_gamma, optimize_options);
    report.sweep_linf_deltas = sweep_linf_deltas(report.sweep);
    report.final_report =
        optimize_weights(report.params, plan.budget_n0, effective_gamma, optimize_options);
    report.has_final = true;
  } catch (const Error& e) {
    throw Error(std::string("optimize stage: ") + e.what());
  }

  const std::vector<TokenCount> final_targets =
      tokens_from_weights(report.final_report.weights, plan.budget_n0);
  SamplingSpec final_spec;
  final_spec.run_id = "final";
  final_spec.total_tokens = plan.budget_n0;
  final_spec.target_tokens = final_targets;
  final_spec.repeat_factor.resize(plan.domains.size());
  for (std::size_t i = 0; i < plan.domains.size(); ++i) {
    const double available = static_cast<double>(plan.domains[i].available_tokens);
    final_spec.repeat_factor[i] =
        std::max(1.0, static_cast<double>(final_targets[i]) / available);
  }
  report.final_spec = std::move(final_spec);
  return report;
}

PipelineReport run_pipeline_file(const MixPlan& plan, const std::string& losses_csv_path,
                                 std::span<const TokenCount> budgets, const GammaVector& gamma,
                                 const FitOptions& fit_options,
                                 const OptimizeOptions& optimize_options) {
  std::ifstream in(losses_csv_path);
  if (!in) throw ValidationError("cannot open losses csv: " + losses_csv_path);
  return run_pipeline(plan, in, budgets, gamma, fit_options, optimize_options);
}

}  // namespace mixopt
