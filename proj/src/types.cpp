#include "mixopt/types.hpp"

#include <algorithm>
#include <cmath>

namespace mixopt {

void DomainParams::validate() const {
  if (name.empty()) throw ValidationError("domain params: empty name");
  if (!(std::isfinite(C) && C > 0.0))
    throw ValidationError("domain '" + name + "': C must be finite and > 0");
  if (!(std::isfinite(k) && k >= 0.0))
    throw ValidationError("domain '" + name + "': k must be finite and >= 0");
  if (!(std::isfinite(alpha) && alpha > 0.0 && alpha < 1.0))
    throw ValidationError("domain '" + name + "': alpha must lie in (0,1)");
  if (!(std::isfinite(beta) && beta > 0.0))
    throw ValidationError("domain '" + name + "': beta must be finite and > 0");
  if (!(std::isfinite(E) && E >= 0.0))
    throw ValidationError("domain '" + name + "': E must be finite and >= 0");
}

WeightVector WeightVector::uniform(std::size_t k) {
  if (k == 0) throw ValidationError("weight vector: K must be >= 1");
  return WeightVector(std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

void WeightVector::validate() const {
  if (weights.empty()) throw ValidationError("weight vector: empty");
  double sum = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0 || w > 1.0)
      throw ValidationError("weight vector: entries must lie in [0,1]");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw ValidationError("weight vector: entries must sum to 1 within 1e-12");
}

double WeightVector::renormalize() {
  double max_correction = 0.0;
  double sum = 0.0;
  for (double& w : weights) {
    const double clamped = std::clamp(w, 0.0, 1.0);
    max_correction = std::max(max_correction, std::abs(clamped - w));
    w = clamped;
    sum += w;
  }
  if (sum <= 0.0) throw ValidationError("weight vector: cannot renormalize zero mass");
  for (double& w : weights) {
    const double scaled = w / sum;
    max_correction = std::max(max_correction, std::abs(scaled - w));
    w = scaled;
  }
  return max_correction;
}

GammaVector GammaVector::ones(std::size_t k) {
  return GammaVector(std::vector<double>(k, 1.0));
}

void GammaVector::validate() const {
  if (gammas.empty()) throw ValidationError("gamma vector: empty");
  bool any_positive = false;
  for (double g : gammas) {
    if (!std::isfinite(g) || g < 0.0)
      throw ValidationError("gamma vector: entries must be finite and >= 0");
    if (g > 0.0) any_positive = true;
  }
  if (!any_positive) throw ValidationError("gamma vector: at least one entry must be > 0");
}

void require_non_negative(TokenCount value, const std::string& what) {
  if (value < 0) throw ValidationError(what + ": token count must be >= 0");
}

}  // namespace mixopt
