#include "mixopt/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

namespace mixopt {
namespace io {

using Json = nlohmann::ordered_json;

namespace {

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json parse(const std::string& text, const char* what) {
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ValidationError(std::string(what) + ": invalid JSON");
  return j;
}

Json params_to_json_obj(const DomainParams& p) {
  return Json{{"name", p.name}, {"C", p.C},       {"k", p.k},
              {"alpha", p.alpha}, {"beta", p.beta}, {"E", p.E}};
}

DomainParams params_from_json_obj(const Json& j) {
  DomainParams p;
  try {
    p.name = j.at("name").get<std::string>();
    p.C = j.at("C").get<double>();
    p.k = j.at("k").get<double>();
    p.alpha = j.at("alpha").get<double>();
    p.beta = j.at("beta").get<double>();
    p.E = j.at("E").get<double>();
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("domain params: ") + e.what());
  }
  p.validate();
  return p;
}

Json weights_array(const WeightVector& w, std::span<const std::string> names) {
  Json arr = Json::array();
  for (std::size_t i = 0; i < w.size(); ++i)
    arr.push_back(Json{{"domain", names[i]}, {"weight", w[i]}});
  return arr;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const auto begin = field.find_first_not_of(" \t\r");
    const auto end = field.find_last_not_of(" \t\r");
    fields.push_back(begin == std::string::npos ? "" : field.substr(begin, end - begin + 1));
  }
  return fields;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw NumericError("format_double: conversion failed");
  return std::string(buf, ptr);
}

std::string plan_to_json(const MixPlan& plan) {
  Json domains = Json::array();
  for (const auto& d : plan.domains)
    domains.push_back(Json{{"name", d.name},
                           {"source_uri", d.source_uri},
                           {"available_tokens", d.available_tokens}});
  Json j{{"domains", std::move(domains)},
         {"unit_sample_n", plan.unit_sample_n},
         {"perturbation_ratios", plan.perturbation_ratios},
         {"budget_n0", plan.budget_n0},
         {"seed", plan.seed}};
  return dump(j);
}

MixPlan plan_from_json(const std::string& text) {
  const Json j = parse(text, "plan");
  MixPlan plan;
  try {
    for (const auto& d : j.at("domains")) {
      DomainSource src;
      src.name = d.value("name", std::string{});
      src.source_uri = d.value("source_uri", std::string{});
      src.available_tokens = d.value("available_tokens", TokenCount{0});
      plan.domains.push_back(std::move(src));
    }
    plan.unit_sample_n = j.at("unit_sample_n").get<TokenCount>();
    plan.budget_n0 = j.at("budget_n0").get<TokenCount>();
    if (j.contains("perturbation_ratios"))
      plan.perturbation_ratios = j.at("perturbation_ratios").get<std::vector<double>>();
    plan.seed = j.value("seed", std::uint64_t{0});
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("plan: ") + e.what());
  }
  return plan;
}

std::string manifest_to_json(const SamplingSpec& spec, std::span<const DomainSource> domains) {
  Json entries = Json::array();
  for (std::size_t i = 0; i < spec.target_tokens.size(); ++i)
    entries.push_back(Json{{"name", domains[i].name},
                           {"target_tokens", spec.target_tokens[i]},
                           {"repeat_factor", spec.repeat_factor[i]}});
  Json j{{"run_id", spec.run_id},
         {"total_tokens", spec.total_tokens},
         {"domains", std::move(entries)}};
  return dump(j);
}

std::string params_json(std::span<const DomainFitOutcome> outcomes, double delta) {
  Json params = Json::array();
  Json fits = Json::array();
  Json errors = Json::array();
  for (const auto& outcome : outcomes) {
    if (outcome.error.empty()) {
      const FitResult& r = *outcome.result;
      params.push_back(params_to_json_obj(r.params));
      fits.push_back(Json{{"domain", outcome.domain},
                          {"huber_objective", r.huber_objective},
                          {"constraint_slack", r.constraint_slack},
                          {"n_restarts_used", r.n_restarts_used},
                          {"converged", r.converged}});
    } else {
      errors.push_back(Json{{"domain", outcome.domain}, {"error", outcome.error}});
    }
  }
  Json diagnostics{{"delta", delta}, {"loss_units", "as ingested"}, {"fits", std::move(fits)}};
  if (!errors.empty()) diagnostics["errors"] = std::move(errors);
  return dump(Json{{"params", std::move(params)}, {"diagnostics", std::move(diagnostics)}});
}

std::vector<DomainParams> params_from_json(const std::string& text) {
  const Json j = parse(text, "params");
  const Json* arr = &j;
  if (j.is_object()) {
    if (!j.contains("params")) throw ValidationError("params: missing 'params' array");
    arr = &j.at("params");
  }
  if (!arr->is_array()) throw ValidationError("params: expected an array");
  std::vector<DomainParams> out;
  for (const auto& item : *arr) out.push_back(params_from_json_obj(item));
  return out;
}

std::string weights_json(const OptimizationReport& report, TokenCount budget,
                         const GammaVector& gamma, std::span<const std::string> domain_names) {
  Json j{{"budget_tokens", budget},
         {"gamma", gamma.gammas},
         {"weights", weights_array(report.weights, domain_names)},
         {"objective", report.objective},
         {"kkt_residual", report.kkt_residual}};
  return dump(j);
}

std::string truth_to_json(const GroundTruth& truth) {
  Json params = Json::array();
  for (const auto& p : truth.params) params.push_back(params_to_json_obj(p));
  Json j{{"params", std::move(params)},
         {"noise_sigma", truth.noise_sigma},
         {"seed", truth.seed}};
  return dump(j);
}

GroundTruth truth_from_json(const std::string& text) {
  const Json j = parse(text, "truth");
  GroundTruth truth;
  try {
    for (const auto& item : j.at("params")) truth.params.push_back(params_from_json_obj(item));
    truth.noise_sigma = j.value("noise_sigma", 0.0);
    truth.seed = j.value("seed", std::uint64_t{0});
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("truth: ") + e.what());
  }
  return truth;
}

std::string pipeline_report_json(const PipelineReport& report) {
  std::vector<std::string> names;
  for (const auto& d : report.plan.domains) names.push_back(d.name);

  Json fits = Json::array();
  for (const auto& outcome : report.fits) {
    const FitResult& r = *outcome.result;
    fits.push_back(Json{{"domain", outcome.domain},
                        {"params", params_to_json_obj(r.params)},
                        {"huber_objective", r.huber_objective},
                        {"constraint_slack", r.constraint_slack},
                        {"n_restarts_used", r.n_restarts_used},
                        {"converged", r.converged}});
  }

  Json sweep = Json::array();
  for (const auto& [budget, rep] : report.sweep)
    sweep.push_back(Json{{"budget_tokens", budget},
                         {"weights", weights_array(rep.weights, names)},
                         {"objective", rep.objective},
                         {"kkt_residual", rep.kkt_residual},
                         {"converged", rep.converged}});

  Json j{{"plan", parse(plan_to_json(report.plan), "plan echo")},
         {"loss_units", "as ingested"},
         {"fits", std::move(fits)},
         {"sweep", std::move(sweep)},
         {"sweep_linf_deltas", report.sweep_linf_deltas}};
  if (report.has_final) {
    Json sampling = Json::array();
    for (std::size_t i = 0; i < names.size(); ++i)
      sampling.push_back(Json{{"domain", names[i]},
                              {"target_tokens", report.final_spec.target_tokens[i]},
                              {"repeat_factor", report.final_spec.repeat_factor[i]}});
    j["final"] = Json{{"budget_tokens", report.plan.budget_n0},
                      {"weights", weights_array(report.final_report.weights, names)},
                      {"objective", report.final_report.objective},
                      {"kkt_residual", report.final_report.kkt_residual},
                      {"converged", report.final_report.converged},
                      {"sampling", std::move(sampling)}};
  }
  j["warnings"] = report.warnings;
  j["ignored_rows"] = report.ignored_rows;
  return dump(j);
}

std::string recovery_report_json(const RecoveryReport& report) {
  Json entries = Json::array();
  for (const auto& e : report.entries)
    entries.push_back(Json{{"budget_tokens", e.budget},
                           {"true_weights", e.true_weights.weights},
                           {"recovered_weights", e.recovered_weights.weights},
                           {"weight_error_linf", e.weight_error_linf},
                           {"objective_regret_rel", e.objective_regret_rel}});
  Json fits = Json::array();
  for (const auto& outcome : report.fits)
    fits.push_back(Json{{"domain", outcome.domain},
                        {"converged", outcome.result.has_value() && outcome.result->converged}});
  Json j{{"noise_sigma", report.noise_sigma},
         {"seed", report.seed},
         {"fits", std::move(fits)},
         {"entries", std::move(entries)}};
  return dump(j);
}

std::string losses_csv(std::span<const LossRecord> records) {
  std::string out = "run_id,domain,loss\n";
  for (const auto& r : records) {
    out += r.run_id;
    out += ',';
    out += r.domain;
    out += ',';
    out += format_double(r.loss);
    out += '\n';
  }
  return out;
}

std::vector<ObservationGroup> observations_from_csv(const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  if (!std::getline(ss, line)) throw ValidationError("observations csv: empty file");
  {
    const auto header = split_fields(line);
    const std::vector<std::string> expected = {"domain", "ratio", "n_self_tokens",
                                               "n_other_tokens", "loss"};
    if (std::vector<std::string>(header.begin(), header.end()) != expected)
      throw ValidationError(
          "observations csv: expected header 'domain,ratio,n_self_tokens,n_other_tokens,loss'");
  }
  std::vector<ObservationGroup> groups;
  int line_no = 1;
  while (std::getline(ss, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_fields(line);
    if (fields.size() != 5)
      throw ValidationError("observations csv line " + std::to_string(line_no) +
                            ": expected 5 fields");
    LossObservation obs;
    obs.domain = fields[0];
    try {
      const double ratio = std::stod(fields[1]);
      if (!(ratio > 0.0)) throw ValidationError("ratio must be positive");
      obs.n_self = static_cast<TokenCount>(std::stoll(fields[2]));
      obs.n_other_fixed = static_cast<TokenCount>(std::stoll(fields[3]));
      obs.loss = std::stod(fields[4]);
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception&) {
      throw ValidationError("observations csv line " + std::to_string(line_no) +
                            ": malformed numeric field");
    }
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const ObservationGroup& g) { return g.first == obs.domain; });
    if (it == groups.end()) {
      groups.emplace_back(obs.domain, std::vector<LossObservation>{});
      it = std::prev(groups.end());
    }
    it->second.push_back(std::move(obs));
  }
  return groups;
}

std::string grid_csv(std::span<const GridPoint> points, std::span<const std::string> names) {
  std::string out;
  for (const auto& name : names) {
    out += "w_" + name + ",";
  }
  out += "objective\n";
  for (const auto& pt : points) {
    for (double w : pt.weights.weights) {
      out += format_double(w);
      out += ',';
    }
    out += format_double(pt.objective);
    out += '\n';
  }
  return out;
}

std::string sweep_csv(std::span<const std::pair<TokenCount, OptimizationReport>> sweep,
                      std::span<const std::string> names) {
  std::string out = "budget_tokens";
  for (const auto& name : names) out += ",w_" + name;
  out += '\n';
  for (const auto& [budget, report] : sweep) {
    out += std::to_string(budget);
    for (double w : report.weights.weights) {
      out += ',';
      out += format_double(w);
    }
    out += '\n';
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << content;
  if (!out) throw ValidationError("write failed: " + path);
}

}  // namespace io
}  // namespace mixopt
