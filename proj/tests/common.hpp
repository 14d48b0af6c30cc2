#pragma once

// Shared helpers for the unit and acceptance suites: seeded generators for
// valid parameters, simplex points, and gammas in the regime of the fitted
// three-domain example.

#include <cmath>
#include <random>
#include <vector>

#include "mixopt/types.hpp"

namespace testutil {

inline std::vector<mixopt::DomainParams> reference_params() {
  return {
      {"IF", 1.1562, 0.1948, 0.5288, 0.0510, 1.0967},
      {"Math", 0.7512, 0.0401, 0.4467, 0.0430, 1.4934},
      {"Code", 0.9820, 0.1235, 0.5235, 0.0439, 1.2679},
  };
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

/// Valid parameters around the fitted-regime magnitudes; k strictly positive.
inline mixopt::DomainParams random_params(std::mt19937_64& rng, const std::string& name) {
  mixopt::DomainParams p;
  p.name = name;
  p.C = log_uniform(rng, 0.3, 3.0);
  p.k = log_uniform(rng, 0.01, 0.5);
  p.alpha = uniform(rng, 0.15, 0.85);
  p.beta = log_uniform(rng, 0.01, 0.25);
  p.E = uniform(rng, 0.3, 2.0);
  return p;
}

inline std::vector<mixopt::DomainParams> random_params_vec(std::mt19937_64& rng, std::size_t k) {
  std::vector<mixopt::DomainParams> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(random_params(rng, "d" + std::to_string(i)));
  return out;
}

/// Interior simplex point via normalized exponentials.
inline mixopt::WeightVector random_simplex(std::mt19937_64& rng, std::size_t k) {
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> w(k);
  double sum = 0.0;
  for (double& v : w) {
    v = expo(rng) + 1e-6;
    sum += v;
  }
  for (double& v : w) v /= sum;
  mixopt::WeightVector out(std::move(w));
  out.renormalize();
  return out;
}

inline mixopt::GammaVector random_gamma(std::mt19937_64& rng, std::size_t k) {
  std::vector<double> g(k);
  for (double& v : g) v = uniform(rng, 0.0, 4.0);
  // Keep at least one multiplier active.
  if (*std::max_element(g.begin(), g.end()) == 0.0) g[0] = 1.0;
  return mixopt::GammaVector(std::move(g));
}

inline mixopt::TokenCount random_budget(std::mt19937_64& rng) {
  return static_cast<mixopt::TokenCount>(log_uniform(rng, 1e6, 1e9));
}

}  // namespace testutil
