#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "common.hpp"
#include "mixopt/optimizer.hpp"

using namespace mixopt;

TEST_CASE("identical domains solve to uniform weights") {
  for (std::size_t k : {2, 3, 5}) {
    std::vector<DomainParams> params(k, DomainParams{"same", 1.2, 0.18, 0.52, 0.05, 1.1});
    const auto report = optimize_weights(params, 20000000, GammaVector::ones(k));
    CHECK(report.converged);
    for (std::size_t i = 0; i < k; ++i)
      CHECK(report.weights[i] == doctest::Approx(1.0 / static_cast<double>(k)).epsilon(1e-8));
  }
}

TEST_CASE("K = 1 simplex is a point") {
  DomainParams p{"solo", 1.0, 0.1, 0.5, 0.05, 1.0};
  const auto report = optimize_weights(std::vector{p}, 1000000, GammaVector::ones(1));
  CHECK(report.weights.size() == 1);
  CHECK(report.weights[0] == 1.0);
  CHECK(report.kkt_residual == 0.0);
  CHECK(report.converged);
}

TEST_CASE("optimize_weights validation") {
  const auto params = testutil::reference_params();
  CHECK_THROWS_AS(optimize_weights(std::span<const DomainParams>{}, 1000, GammaVector::ones(1)),
                  ValidationError);
  CHECK_THROWS_AS(optimize_weights(params, 0, GammaVector::ones(3)), ValidationError);
  CHECK_THROWS_AS(optimize_weights(params, 1000000, GammaVector({1.0, 1.0})), ValidationError);
  CHECK_THROWS_AS(optimize_weights(params, 1000000, GammaVector({0.0, 0.0, 0.0})),
                  ValidationError);
}

TEST_CASE("solution dominates the 21-mixture grid at every budget (reference parameters)") {
  const auto params = testutil::reference_params();
  const GammaVector gamma = GammaVector::ones(3);
  const std::vector<double> levels = {0.125, 0.25, 0.375, 0.5, 0.625, 0.75};
  for (TokenCount budget : {TokenCount{5000000}, TokenCount{20000000}, TokenCount{200000000}}) {
    const auto report = optimize_weights(params, budget, gamma);
    CHECK(report.converged);
    const auto grid = grid_search(params, budget, gamma, 0.125, levels);
    CHECK(grid.size() == 21);
    CHECK(report.objective <= grid.front().objective + 1e-9);
  }
}

TEST_CASE("kkt_residual is zero at a symmetric optimum and positive at a corner") {
  std::vector<DomainParams> params(3, DomainParams{"same", 1.0, 0.2, 0.5, 0.06, 1.0});
  const GammaVector gamma = GammaVector::ones(3);
  CHECK(kkt_residual(params, WeightVector::uniform(3), 30000000, gamma) <= 1e-10);
  CHECK(kkt_residual(params, WeightVector({1.0, 0.0, 0.0}), 30000000, gamma) > 0.0);
}

TEST_CASE("solver output satisfies the gradient-balance condition (reference parameters, 20M)") {
  const auto params = testutil::reference_params();
  const GammaVector gamma = GammaVector::ones(3);
  const auto report = optimize_weights(params, 20000000, gamma);
  const auto grad = objective_gradient(params, report.weights, 20000000, gamma);
  double mean_abs = 0.0;
  for (double g : grad) mean_abs += std::abs(g);
  mean_abs /= 3.0;
  CHECK(report.kkt_residual <= 1e-4 * mean_abs);
}

TEST_CASE("budget_sweep consistency") {
  const auto params = testutil::reference_params();
  const GammaVector gamma = GammaVector::ones(3);

  SUBCASE("single budget equals optimize_weights") {
    const TokenCount budgets[] = {20000000};
    const auto sweep = budget_sweep(params, budgets, gamma);
    REQUIRE(sweep.size() == 1);
    const auto direct = optimize_weights(params, 20000000, gamma);
    for (std::size_t i = 0; i < 3; ++i) CHECK(sweep[0].second.weights[i] == direct.weights[i]);
  }

  SUBCASE("identical domains stay uniform at every budget") {
    std::vector<DomainParams> same(3, DomainParams{"same", 1.0, 0.2, 0.5, 0.06, 1.0});
    const TokenCount budgets[] = {1000000, 10000000, 100000000};
    const auto sweep = budget_sweep(same, budgets, gamma);
    for (const auto& [budget, report] : sweep)
      for (std::size_t i = 0; i < 3; ++i)
        CHECK(report.weights[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-8));
  }

  SUBCASE("reference-parameter deltas are recorded") {
    const TokenCount budgets[] = {5000000, 20000000, 200000000};
    const auto sweep = budget_sweep(params, budgets, gamma);
    const auto deltas = sweep_linf_deltas(sweep);
    REQUIRE(deltas.size() == 2);
    for (double d : deltas) CHECK(d >= 0.0);
  }

  SUBCASE("budgets must be strictly increasing") {
    const TokenCount budgets[] = {20000000, 20000000};
    CHECK_THROWS_AS(budget_sweep(params, budgets, gamma), ValidationError);
  }
}

TEST_CASE("grid_search cardinality and edge cases") {
  const auto params = testutil::reference_params();
  const GammaVector gamma = GammaVector::ones(3);
  const std::vector<double> levels = {0.125, 0.25, 0.375, 0.5, 0.625, 0.75};

  SUBCASE("K = 3 with the six eighth-levels yields 21 mixtures") {
    const auto grid = grid_search(params, 20000000, gamma, 0.125, levels);
    CHECK(grid.size() == 21);
    // Sorted ascending by objective.
    for (std::size_t i = 1; i < grid.size(); ++i)
      CHECK(grid[i - 1].objective <= grid[i].objective);
    for (const auto& pt : grid) pt.weights.validate();
  }

  SUBCASE("levels derived from the step match the explicit list") {
    const auto derived = grid_search(params, 20000000, gamma, 0.125);
    CHECK(derived.size() == 21);
  }

  SUBCASE("K = 2 single level") {
    std::vector<DomainParams> two = {params[0], params[1]};
    const std::vector<double> single = {0.5};
    const auto grid = grid_search(two, 20000000, GammaVector::ones(2), 0.0, single);
    REQUIRE(grid.size() == 1);
    CHECK(grid[0].weights[0] == doctest::Approx(0.5));
  }

  SUBCASE("no combination sums to one") {
    std::vector<DomainParams> two = {params[0], params[1]};
    const std::vector<double> bad = {0.4};
    CHECK_THROWS_AS(grid_search(two, 20000000, GammaVector::ones(2), 0.0, bad),
                    ValidationError);
  }

  SUBCASE("continuous optimum dominates the best grid point") {
    const auto grid = grid_search(params, 20000000, gamma, 0.125, levels);
    const auto report = optimize_weights(params, 20000000, gamma);
    CHECK(grid.front().objective >= report.objective - 1e-12);
  }
}

TEST_CASE("property: returned weights are exactly feasible") {
  std::mt19937_64 rng(90210);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + static_cast<std::size_t>(rng() % 5);
    const auto params = testutil::random_params_vec(rng, k);
    const auto report =
        optimize_weights(params, testutil::random_budget(rng), GammaVector::ones(k));
    report.weights.validate();
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += report.weights[i];
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("property: global optimality certificate against random simplex points") {
  std::mt19937_64 rng(424242);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 2 + static_cast<std::size_t>(rng() % 4);
    const auto params = testutil::random_params_vec(rng, k);
    const auto gamma = testutil::random_gamma(rng, k);
    const TokenCount n0 = testutil::random_budget(rng);
    const auto report = optimize_weights(params, n0, gamma);
    for (int probe = 0; probe < 1000; ++probe) {
      const WeightVector w = testutil::random_simplex(rng, k);
      CHECK(report.objective <= total_objective(params, w, n0, gamma) + 1e-9);
    }
  }
}

TEST_CASE("property: argmin is invariant to positive gamma rescaling") {
  std::mt19937_64 rng(1618);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t k = 2 + static_cast<std::size_t>(rng() % 4);
    const auto params = testutil::random_params_vec(rng, k);
    auto gamma = testutil::random_gamma(rng, k);
    const TokenCount n0 = testutil::random_budget(rng);
    const double scale = testutil::log_uniform(rng, 0.2, 8.0);
    GammaVector scaled = gamma;
    for (double& g : scaled.gammas) g *= scale;
    const auto a = optimize_weights(params, n0, gamma);
    const auto b = optimize_weights(params, n0, scaled);
    for (std::size_t i = 0; i < k; ++i)
      CHECK(std::abs(a.weights[i] - b.weights[i]) <= 1e-9);
  }
}

TEST_CASE("property: no domain with higher marginal return is left at zero") {
  std::mt19937_64 rng(112358);
  int zero_weight_solutions = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + static_cast<std::size_t>(rng() % 5);
    const auto params = testutil::random_params_vec(rng, k);  // all k_i > 0
    const auto gamma = testutil::random_gamma(rng, k);
    const TokenCount n0 = testutil::random_budget(rng);
    const auto report = optimize_weights(params, n0, gamma);
    const auto grad = objective_gradient(params, report.weights, n0, gamma);

    double interior_common = 0.0;
    int interior = 0;
    for (std::size_t i = 0; i < k; ++i) {
      if (report.weights[i] > 1e-9 && report.weights[i] < 1.0 - 1e-9) {
        interior_common += grad[i];
        ++interior;
      }
    }
    if (interior == 0) continue;
    interior_common /= interior;
    for (std::size_t i = 0; i < k; ++i) {
      if (report.weights[i] <= 1e-9) {
        ++zero_weight_solutions;
        CHECK(grad[i] >= interior_common - 1e-6);
      }
    }
  }
  // The regime makes zeroed domains possible but not pathological; nothing
  // to assert about the count, it is informational.
  (void)zero_weight_solutions;
}

TEST_CASE("a gamma-zero domain without transfer is held at the floor clamp") {
  std::vector<DomainParams> params = {{"useful", 1.2, 0.2, 0.5, 0.06, 1.0},
                                      {"ignored", 1.0, 0.0, 0.5, 0.05, 1.0}};
  const auto report = optimize_weights(params, 10000000, GammaVector({1.0, 0.0}));
  CHECK(report.converged);
  // Weight cannot reach 0 while k = 0 (the base would vanish); the clamp
  // binds and is reported.
  CHECK(report.weights[1] == doctest::Approx(1e-9));
  REQUIRE(report.floor_clamped.size() == 1);
  CHECK(report.floor_clamped[0] == 1);
  CHECK(std::isfinite(report.objective));
}

TEST_CASE("property: a gamma-zero domain keeps the boundary inequality") {
  std::mt19937_64 rng(987654);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t k = 3;
    const auto params = testutil::random_params_vec(rng, k);
    GammaVector gamma = GammaVector::ones(k);
    gamma.gammas[1] = 0.0;
    const TokenCount n0 = testutil::random_budget(rng);
    const auto report = optimize_weights(params, n0, gamma);
    // The zeroed domain gets no mass beyond what transfer justifies.
    CHECK(report.weights[1] <= 1e-9);
    const auto grad = objective_gradient(params, report.weights, n0, gamma);
    double interior_common = 0.0;
    int interior = 0;
    for (std::size_t i = 0; i < k; ++i)
      if (report.weights[i] > 1e-9 && report.weights[i] < 1.0 - 1e-9) {
        interior_common += grad[i];
        ++interior;
      }
    REQUIRE(interior > 0);
    interior_common /= interior;
    CHECK(grad[1] >= interior_common - 1e-6);
  }
}
