#pragma once

#include <span>
#include <vector>

#include "mixopt/types.hpp"

namespace mixopt {

/// Effective in-domain-equivalent tokens contributed by out-of-domain data:
/// k * n_other^alpha. Zero when k = 0 or n_other = 0.
/// Throws ValidationError if alpha is outside (0,1) or k < 0.
double effective_transfer(double k, double alpha, TokenCount n_other);

/// Predicted validation loss C * (n_self + k * n_other^alpha)^(-beta) + E.
/// Strictly decreasing in n_self and bounded below by E.
/// Throws NumericError when the power-law base is zero (n_self = 0 and no
/// transfer), which leaves the loss undefined.
double domain_loss(const DomainParams& p, TokenCount n_self, TokenCount n_other);

/// Gamma-weighted summed predicted loss over all domains at budget n0:
///   sum_i gamma_i * [ C_i * (w_i n0 + k_i (n0 - w_i n0)^alpha_i)^(-beta_i) + E_i ].
/// With gamma all ones this is the plain total validation loss objective.
/// Throws ValidationError on dimension mismatch and NumericError when a
/// domain's base degenerates to zero (w_i = 0 with k_i = 0).
double total_objective(std::span<const DomainParams> params, const WeightVector& w,
                       TokenCount n0, const GammaVector& gamma);

/// Analytic partial derivatives of total_objective with respect to each w_i.
/// Each term depends on its own coordinate only. Throws NumericError naming
/// the offending domain index if a component is non-finite (e.g. w_i = 1 with
/// k_i > 0, where the one-sided derivative diverges).
std::vector<double> objective_gradient(std::span<const DomainParams> params,
                                       const WeightVector& w, TokenCount n0,
                                       const GammaVector& gamma);

namespace detail {

/// x^y as exp(y * ln x) with explicit zero handling: 0^y is 0 for y > 0,
/// 1 for y = 0 and +infinity for y < 0. x must be non-negative.
double pow_explicit(double x, double y);

/// Loss of one domain with continuous token counts; no degeneracy checks.
/// Used by the fitting and optimization inner loops.
double domain_loss_raw(const DomainParams& p, double n_self, double n_other);

/// Power-law base of domain i's term at weight w: w*n0 + k*(n0 - w*n0)^alpha.
double term_base(const DomainParams& p, double w, double n0);

/// d/dw of one gamma-weighted objective term. May return +/-infinity at the
/// boundary; never throws.
double term_gradient_raw(const DomainParams& p, double gamma, double w, double n0);

/// d^2/dw^2 of one gamma-weighted objective term (non-negative by convexity).
double term_hessian_raw(const DomainParams& p, double gamma, double w, double n0);

}  // namespace detail

}  // namespace mixopt
