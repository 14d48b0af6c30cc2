#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mixopt/errors.hpp"

namespace mixopt {

/// Token counts are 64-bit integers everywhere; model arithmetic converts to
/// double on entry. Negative values are rejected at validation boundaries.
using TokenCount = std::int64_t;

/// The five fitted constants of the per-domain loss model
///   L(n_self, n_other) = C * (n_self + k * n_other^alpha)^(-beta) + E.
struct DomainParams {
  std::string name;
  double C = 1.0;      ///< loss-scale multiplier, > 0
  double k = 0.0;      ///< transfer coefficient, >= 0
  double alpha = 0.5;  ///< transfer exponent, in (0,1)
  double beta = 0.05;  ///< scaling exponent, > 0
  double E = 0.0;      ///< irreducible loss, >= 0

  /// Throws ValidationError unless C > 0, beta > 0, k >= 0, E >= 0 and
  /// alpha in (0,1). The open alpha bound keeps the objective convex.
  void validate() const;
};

/// A point on the K-dimensional probability simplex.
struct WeightVector {
  std::vector<double> weights;

  WeightVector() = default;
  explicit WeightVector(std::vector<double> w) : weights(std::move(w)) {}

  static WeightVector uniform(std::size_t k);

  std::size_t size() const { return weights.size(); }
  double operator[](std::size_t i) const { return weights[i]; }

  /// Throws ValidationError unless every entry lies in [0,1] and the entries
  /// sum to 1 within 1e-12.
  void validate() const;

  /// Clamps entries into [0,1] and rescales so the sum is exactly 1.
  /// Returns the largest absolute correction applied to any entry.
  double renormalize();
};

/// Per-domain objective multipliers; all ones recovers the plain summed loss.
struct GammaVector {
  std::vector<double> gammas;

  GammaVector() = default;
  explicit GammaVector(std::vector<double> g) : gammas(std::move(g)) {}

  static GammaVector ones(std::size_t k);

  std::size_t size() const { return gammas.size(); }
  double operator[](std::size_t i) const { return gammas[i]; }

  /// Throws ValidationError unless all entries are >= 0, finite, and at
  /// least one is positive.
  void validate() const;
};

/// Rejects negative token counts with a ValidationError naming `what`.
void require_non_negative(TokenCount value, const std::string& what);

}  // namespace mixopt
