#include "mixopt/scaling_model.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace mixopt {

namespace detail {

double pow_explicit(double x, double y) {
  if (x < 0.0) throw NumericError("pow_explicit: negative base");
  if (x == 0.0) {
    if (y > 0.0) return 0.0;
    if (y == 0.0) return 1.0;
    return std::numeric_limits<double>::infinity();
  }
  return std::exp(y * std::log(x));
}

double domain_loss_raw(const DomainParams& p, double n_self, double n_other) {
  const double base = n_self + p.k * pow_explicit(n_other, p.alpha);
  return p.C * pow_explicit(base, -p.beta) + p.E;
}

double term_base(const DomainParams& p, double w, double n0) {
  const double n_self = w * n0;
  const double n_other = std::max(0.0, n0 - n_self);
  return n_self + p.k * pow_explicit(n_other, p.alpha);
}

double term_gradient_raw(const DomainParams& p, double gamma, double w, double n0) {
  const double n_other = std::max(0.0, n0 - w * n0);
  const double base = w * n0 + p.k * pow_explicit(n_other, p.alpha);
  // d(base)/dw = n0 * (1 - k*alpha*n_other^(alpha-1))
  const double dbase = n0 * (1.0 - p.k * p.alpha * pow_explicit(n_other, p.alpha - 1.0));
  return gamma * p.C * (-p.beta) * pow_explicit(base, -p.beta - 1.0) * dbase;
}

double term_hessian_raw(const DomainParams& p, double gamma, double w, double n0) {
  const double n_other = std::max(0.0, n0 - w * n0);
  const double base = w * n0 + p.k * pow_explicit(n_other, p.alpha);
  const double dbase = n0 * (1.0 - p.k * p.alpha * pow_explicit(n_other, p.alpha - 1.0));
  // -d2(base)/dw2 = n0^2 * k * alpha * (1-alpha) * n_other^(alpha-2) >= 0
  const double neg_d2base =
      n0 * n0 * p.k * p.alpha * (1.0 - p.alpha) * pow_explicit(n_other, p.alpha - 2.0);
  return gamma * p.C * p.beta *
         ((p.beta + 1.0) * pow_explicit(base, -p.beta - 2.0) * dbase * dbase +
          pow_explicit(base, -p.beta - 1.0) * neg_d2base);
}

}  // namespace detail

double effective_transfer(double k, double alpha, TokenCount n_other) {
  if (!(std::isfinite(k) && k >= 0.0))
    throw ValidationError("effective_transfer: k must be finite and >= 0");
  if (!(std::isfinite(alpha) && alpha > 0.0 && alpha < 1.0))
    throw ValidationError("effective_transfer: alpha must lie in (0,1)");
  require_non_negative(n_other, "effective_transfer: n_other");
  if (k == 0.0 || n_other == 0) return 0.0;
  return k * detail::pow_explicit(static_cast<double>(n_other), alpha);
}

double domain_loss(const DomainParams& p, TokenCount n_self, TokenCount n_other) {
  p.validate();
  require_non_negative(n_self, "domain_loss: n_self");
  require_non_negative(n_other, "domain_loss: n_other");
  if (n_self == 0 && (p.k == 0.0 || n_other == 0))
    throw NumericError("domain '" + p.name +
                       "': loss undefined, power-law base is zero (n_self = 0 with no transfer)");
  return detail::domain_loss_raw(p, static_cast<double>(n_self), static_cast<double>(n_other));
}

static void check_dimensions(std::span<const DomainParams> params, const WeightVector& w,
                             const GammaVector& gamma) {
  if (params.empty()) throw ValidationError("objective: no domains");
  if (params.size() != w.size() || params.size() != gamma.size())
    throw ValidationError("objective: params (" + std::to_string(params.size()) + "), weights (" +
                          std::to_string(w.size()) + ") and gamma (" +
                          std::to_string(gamma.size()) + ") sizes must match");
}

double total_objective(std::span<const DomainParams> params, const WeightVector& w,
                       TokenCount n0, const GammaVector& gamma) {
  check_dimensions(params, w, gamma);
  require_non_negative(n0, "total_objective: n0");
  const double budget = static_cast<double>(n0);
  double sum = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double base = detail::term_base(params[i], w[i], budget);
    if (base <= 0.0)
      throw NumericError("domain '" + params[i].name +
                         "': degenerate objective term, base is zero (w = 0 with k = 0)");
    sum += gamma[i] * (params[i].C * detail::pow_explicit(base, -params[i].beta) + params[i].E);
  }
  return sum;
}

std::vector<double> objective_gradient(std::span<const DomainParams> params,
                                       const WeightVector& w, TokenCount n0,
                                       const GammaVector& gamma) {
  check_dimensions(params, w, gamma);
  require_non_negative(n0, "objective_gradient: n0");
  const double budget = static_cast<double>(n0);
  std::vector<double> grad(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    grad[i] = detail::term_gradient_raw(params[i], gamma[i], w[i], budget);
    if (!std::isfinite(grad[i]))
      throw NumericError("objective_gradient: non-finite component for domain index " +
                         std::to_string(i) + " ('" + params[i].name + "')");
  }
  return grad;
}

}  // namespace mixopt
