#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mixopt/fitting.hpp"
#include "mixopt/optimizer.hpp"
#include "mixopt/scaling_model.hpp"
#include "mixopt/simulator.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

mixopt::GammaVector gamma_or_ones(const std::vector<double>& gamma, std::size_t k) {
  return gamma.empty() ? mixopt::GammaVector::ones(k) : mixopt::GammaVector(gamma);
}

}  // namespace

PYBIND11_MODULE(_mixopt, m) {
  m.doc() = "Training-data mixture optimization: transfer-augmented scaling-law "
            "fitting and convex weight solving";

  py::register_exception<mixopt::ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<mixopt::NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<mixopt::DomainParams>(m, "DomainParams")
      .def(py::init([](std::string name, double C, double k, double alpha, double beta,
                       double E) {
             mixopt::DomainParams p{std::move(name), C, k, alpha, beta, E};
             p.validate();
             return p;
           }),
           "name"_a, "C"_a, "k"_a, "alpha"_a, "beta"_a, "E"_a)
      .def_readwrite("name", &mixopt::DomainParams::name)
      .def_readwrite("C", &mixopt::DomainParams::C)
      .def_readwrite("k", &mixopt::DomainParams::k)
      .def_readwrite("alpha", &mixopt::DomainParams::alpha)
      .def_readwrite("beta", &mixopt::DomainParams::beta)
      .def_readwrite("E", &mixopt::DomainParams::E)
      .def("__repr__", [](const mixopt::DomainParams& p) {
        return "DomainParams(name='" + p.name + "', C=" + std::to_string(p.C) +
               ", k=" + std::to_string(p.k) + ", alpha=" + std::to_string(p.alpha) +
               ", beta=" + std::to_string(p.beta) + ", E=" + std::to_string(p.E) + ")";
      });

  py::class_<mixopt::OptimizationReport>(m, "OptimizationReport")
      .def_property_readonly("weights",
                             [](const mixopt::OptimizationReport& r) { return r.weights.weights; })
      .def_readonly("objective", &mixopt::OptimizationReport::objective)
      .def_readonly("kkt_residual", &mixopt::OptimizationReport::kkt_residual)
      .def_readonly("iterations", &mixopt::OptimizationReport::iterations)
      .def_readonly("active_bounds", &mixopt::OptimizationReport::active_bounds)
      .def_readonly("converged", &mixopt::OptimizationReport::converged);

  py::class_<mixopt::FitResult>(m, "FitResult")
      .def_readonly("params", &mixopt::FitResult::params)
      .def_readonly("huber_objective", &mixopt::FitResult::huber_objective)
      .def_readonly("constraint_slack", &mixopt::FitResult::constraint_slack)
      .def_readonly("n_restarts_used", &mixopt::FitResult::n_restarts_used)
      .def_readonly("converged", &mixopt::FitResult::converged);

  m.def("effective_transfer", &mixopt::effective_transfer, "k"_a, "alpha"_a, "n_other"_a,
        "Effective tokens transferred from other domains: k * n_other**alpha.");
  m.def("domain_loss", &mixopt::domain_loss, "params"_a, "n_self"_a, "n_other"_a,
        "Predicted validation loss of one domain.");
  m.def("huber", &mixopt::huber, "delta"_a, "r"_a);

  m.def(
      "total_objective",
      [](const std::vector<mixopt::DomainParams>& params, const std::vector<double>& weights,
         mixopt::TokenCount n0, const std::vector<double>& gamma) {
        return mixopt::total_objective(params, mixopt::WeightVector(weights), n0,
                                       gamma_or_ones(gamma, params.size()));
      },
      "params"_a, "weights"_a, "n0"_a, "gamma"_a = std::vector<double>{},
      "Gamma-weighted summed predicted loss at budget n0.");

  m.def(
      "objective_gradient",
      [](const std::vector<mixopt::DomainParams>& params, const std::vector<double>& weights,
         mixopt::TokenCount n0, const std::vector<double>& gamma) {
        return mixopt::objective_gradient(params, mixopt::WeightVector(weights), n0,
                                          gamma_or_ones(gamma, params.size()));
      },
      "params"_a, "weights"_a, "n0"_a, "gamma"_a = std::vector<double>{});

  m.def(
      "kkt_residual",
      [](const std::vector<mixopt::DomainParams>& params, const std::vector<double>& weights,
         mixopt::TokenCount n0, const std::vector<double>& gamma) {
        return mixopt::kkt_residual(params, mixopt::WeightVector(weights), n0,
                                    gamma_or_ones(gamma, params.size()));
      },
      "params"_a, "weights"_a, "n0"_a, "gamma"_a = std::vector<double>{});

  m.def(
      "optimize_weights",
      [](const std::vector<mixopt::DomainParams>& params, mixopt::TokenCount n0,
         const std::vector<double>& gamma) {
        return mixopt::optimize_weights(params, n0, gamma_or_ones(gamma, params.size()));
      },
      "params"_a, "n0"_a, "gamma"_a = std::vector<double>{},
      "Solve for the loss-minimizing mixture weights on the probability simplex.");

  m.def(
      "budget_sweep",
      [](const std::vector<mixopt::DomainParams>& params,
         const std::vector<mixopt::TokenCount>& budgets, const std::vector<double>& gamma) {
        auto sweep =
            mixopt::budget_sweep(params, budgets, gamma_or_ones(gamma, params.size()));
        std::vector<std::pair<mixopt::TokenCount, std::vector<double>>> out;
        out.reserve(sweep.size());
        for (auto& [budget, report] : sweep) out.emplace_back(budget, report.weights.weights);
        return out;
      },
      "params"_a, "budgets"_a, "gamma"_a = std::vector<double>{});

  m.def(
      "grid_search",
      [](const std::vector<mixopt::DomainParams>& params, mixopt::TokenCount n0,
         const std::vector<double>& gamma, double grid_step, const std::vector<double>& levels) {
        auto points = mixopt::grid_search(params, n0, gamma_or_ones(gamma, params.size()),
                                          grid_step, levels);
        std::vector<std::pair<std::vector<double>, double>> out;
        out.reserve(points.size());
        for (auto& pt : points) out.emplace_back(pt.weights.weights, pt.objective);
        return out;
      },
      "params"_a, "n0"_a, "gamma"_a = std::vector<double>{}, "grid_step"_a = 0.125,
      "levels"_a = std::vector<double>{},
      "All level combinations summing to 1, with objectives, best first.");

  m.def(
      "fit_domain",
      [](const std::string& domain,
         const std::vector<std::tuple<mixopt::TokenCount, mixopt::TokenCount, double>>& rows,
         double delta) {
        std::vector<mixopt::LossObservation> observations;
        observations.reserve(rows.size());
        for (const auto& [n_self, n_other_fixed, loss] : rows)
          observations.push_back({domain, n_self, n_other_fixed, loss});
        mixopt::FitOptions options;
        options.delta = delta;
        return mixopt::fit_domain(observations, options);
      },
      "domain"_a, "observations"_a, "delta"_a = 1e-3,
      "Fit the five domain parameters from (n_self, n_other_fixed, loss) rows.");
}
