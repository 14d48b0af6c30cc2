#include "mixopt/fitting.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <array>
#include <future>
#include <limits>
#include <set>
#include <thread>

#include "mixopt/scaling_model.hpp"

namespace mixopt {

double huber(double delta, double r) {
  if (!(delta > 0.0)) throw ValidationError("huber: delta must be > 0");
  const double a = std::abs(r);
  if (a <= delta) return 0.5 * r * r;
  return delta * (a - 0.5 * delta);
}

double predict_loss(const DomainParams& params, TokenCount n_self, TokenCount n_other_fixed) {
  return detail::domain_loss_raw(params, static_cast<double>(n_self),
                                 static_cast<double>(n_other_fixed));
}

namespace {

using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

// Transformed coordinates: theta = (ln C, logit(k / k_cap), logit-scaled
// alpha, ln beta, logit(E / min_loss)). The sigmoid maps enforce the box
// bounds smoothly; parametrizing k as a fraction of its cap bakes the
// transfer constraint k * nof^alpha <= nof into the search space.
struct FitProblem {
  std::vector<double> n;  // normalized n_self per observation
  std::vector<double> losses;
  double nof = 0.0;  // normalized n_other_fixed
  double min_loss = 0.0;
  double delta = 1e-3;

  static constexpr double kLnCMin = -13.815510557964274;  // ln 1e-6
  static constexpr double kLnCMax = 6.907755278982137;    // ln 1e3
  static constexpr double kLnBetaMin = -9.210340371976182;  // ln 1e-4
  static constexpr double kLnBetaMax = 1.6094379124341003;  // ln 5
  static constexpr double kKMax = 1e3;

  struct Decoded {
    double C, k, alpha, beta, E;
    double k_frac;    // sigma(kappa)
    double e_frac;    // sigma(e)
    double k_cap;     // min(kKax, nof^(1-alpha))
    bool cap_is_box;  // true when the 1e3 box is the binding cap
  };

  Decoded decode(const Vec5& theta) const {
    Decoded d;
    d.C = std::exp(theta[0]);
    const double sa = sigmoid(theta[2]);
    d.alpha = 0.01 + 0.98 * sa;
    d.beta = std::exp(theta[3]);
    d.e_frac = sigmoid(theta[4]);
    d.E = min_loss * d.e_frac;
    d.k_frac = sigmoid(theta[1]);
    const double natural_cap =
        nof > 0.0 ? detail::pow_explicit(nof, 1.0 - d.alpha) : 0.0;
    d.cap_is_box = natural_cap > kKMax;
    d.k_cap = d.cap_is_box ? kKMax : natural_cap;
    d.k = d.k_cap * d.k_frac;
    return d;
  }

  double transfer(const Decoded& d) const {
    if (nof <= 0.0) return 0.0;
    return d.k * detail::pow_explicit(nof, d.alpha);
  }

  double objective(const Vec5& theta) const {
    const Decoded d = decode(theta);
    const double t = transfer(d);
    double sum = 0.0;
    for (std::size_t i = 0; i < n.size(); ++i) {
      const double base = n[i] + t;
      const double r = d.C * detail::pow_explicit(base, -d.beta) + d.E - losses[i];
      sum += huber(delta, r);
    }
    return sum;
  }

  /// Huber gradient and IRLS-weighted Gauss-Newton matrix at theta.
  void derivatives(const Vec5& theta, double& f, Vec5& grad, Mat5& gn) const {
    const Decoded d = decode(theta);
    const double t = transfer(d);
    const double ln_nof = nof > 0.0 ? std::log(nof) : 0.0;
    f = 0.0;
    grad.setZero();
    gn.setZero();
    for (std::size_t i = 0; i < n.size(); ++i) {
      const double base = n[i] + t;
      const double power = detail::pow_explicit(base, -d.beta);
      const double r = d.C * power + d.E - losses[i];
      f += huber(delta, r);

      Vec5 jac;
      jac[0] = d.C * power;                      // d r / d(ln C)
      const double dr_dbase = -d.beta * d.C * detail::pow_explicit(base, -d.beta - 1.0);
      double dt_dkappa = t * (1.0 - d.k_frac);   // T proportional to sigma(kappa)
      double dt_da = 0.0;
      if (d.cap_is_box && nof > 0.0) {
        // Natural cap inactive: T = kKMax * sigma(kappa) * nof^alpha still
        // depends on alpha.
        const double dalpha_da = 0.98 * sigmoid(theta[2]) * (1.0 - sigmoid(theta[2]));
        dt_da = t * ln_nof * dalpha_da;
      }
      jac[1] = dr_dbase * dt_dkappa;
      jac[2] = dr_dbase * dt_da;
      jac[3] = -d.beta * std::log(base) * d.C * power;  // d r / d(ln beta)
      jac[4] = d.E * (1.0 - d.e_frac);                  // d r / d(e)

      const double a = std::abs(r);
      const double psi = std::clamp(r, -delta, delta);  // huber'
      const double w = a <= delta ? 1.0 : delta / a;    // IRLS weight
      grad += psi * jac;
      gn += w * (jac * jac.transpose());
    }
  }

  // Sigmoid-mapped coordinates are boxed at +/-40 to keep their derivatives
  // alive; log-mapped coordinates carry the declared parameter bounds.
  static double lower_bound(int j) {
    return j == 0 ? kLnCMin : (j == 3 ? kLnBetaMin : -40.0);
  }
  static double upper_bound(int j) {
    return j == 0 ? kLnCMax : (j == 3 ? kLnBetaMax : 40.0);
  }

  void clamp_box(Vec5& theta) const {
    for (int j = 0; j < 5; ++j) theta[j] = std::clamp(theta[j], lower_bound(j), upper_bound(j));
  }

  /// True when the coordinate sits on a clamp with the gradient pushing out.
  bool bound_blocked(const Vec5& theta, const Vec5& grad, int j) const {
    return (theta[j] <= lower_bound(j) && grad[j] > 0.0) ||
           (theta[j] >= upper_bound(j) && grad[j] < 0.0);
  }

  /// Gradient with components pointing out of an active clamp zeroed.
  double projected_grad_norm(const Vec5& theta, const Vec5& grad) const {
    double norm = 0.0;
    for (int j = 0; j < 5; ++j)
      if (!bound_blocked(theta, grad, j)) norm = std::max(norm, std::abs(grad[j]));
    return norm;
  }
};

struct StartResult {
  Vec5 theta = Vec5::Zero();
  double objective = std::numeric_limits<double>::infinity();
  bool converged = false;
};

StartResult minimize_from(const FitProblem& problem, Vec5 theta, const FitOptions& options) {
  problem.clamp_box(theta);
  double f = 0.0;
  Vec5 grad;
  Mat5 gn;
  double lambda = 1e-4;
  bool converged = false;

  double nu = 2.0;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    problem.derivatives(theta, f, grad, gn);
    if (problem.projected_grad_norm(theta, grad) <= options.tolerance) {
      converged = true;
      break;
    }
    // Active-set reduction: freeze clamp-blocked coordinates so their
    // infeasible directions cannot dominate the damped step.
    std::array<int, 5> free_idx{};
    int n_free = 0;
    for (int j = 0; j < 5; ++j)
      if (!problem.bound_blocked(theta, grad, j)) free_idx[n_free++] = j;
    if (n_free == 0) break;  // fully pinned; the pg check above decides

    Eigen::MatrixXd gn_free(n_free, n_free);
    Eigen::VectorXd grad_free(n_free);
    for (int a = 0; a < n_free; ++a) {
      grad_free[a] = grad[free_idx[a]];
      for (int b = 0; b < n_free; ++b) gn_free(a, b) = gn(free_idx[a], free_idx[b]);
    }

    // Levenberg-Marquardt damping on the IRLS Gauss-Newton model, with
    // Nielsen's gain-ratio update for lambda.
    bool stepped = false;
    double step_norm = 0.0;
    for (int attempt = 0; attempt < 40 && lambda <= 1e15; ++attempt) {
      Eigen::MatrixXd damped = gn_free;
      Eigen::VectorXd diag(n_free);
      for (int a = 0; a < n_free; ++a) {
        diag[a] = std::max(gn_free(a, a), 1e-12);
        damped(a, a) += lambda * diag[a];
      }
      const Eigen::VectorXd step = damped.ldlt().solve(-grad_free);
      if (!step.allFinite()) {
        lambda *= nu;
        nu *= 2.0;
        continue;
      }
      Vec5 trial = theta;
      for (int a = 0; a < n_free; ++a) trial[free_idx[a]] += step[a];
      problem.clamp_box(trial);
      const double f_trial = problem.objective(trial);
      if (f_trial < f) {
        double predicted = 0.0;
        for (int a = 0; a < n_free; ++a)
          predicted += 0.5 * step[a] * (lambda * diag[a] * step[a] - grad_free[a]);
        const double rho = predicted > 0.0 ? (f - f_trial) / predicted : 1.0;
        step_norm = (trial - theta).lpNorm<Eigen::Infinity>();
        theta = trial;
        f = f_trial;
        const double shrink = 1.0 - std::pow(2.0 * rho - 1.0, 3.0);
        lambda = std::max(lambda * std::max(1.0 / 3.0, shrink), 1e-14);
        nu = 2.0;
        stepped = true;
        break;
      }
      lambda *= nu;
      nu *= 2.0;
    }
    if (!stepped || step_norm < 1e-16) break;  // stalled or converged in position
  }

  StartResult out;
  problem.derivatives(theta, f, grad, gn);
  out.theta = theta;
  out.objective = f;
  out.converged = converged || problem.projected_grad_norm(theta, grad) <= options.tolerance;
  return out;
}

}  // namespace

FitResult fit_domain(std::span<const LossObservation> observations, const FitOptions& options) {
  if (observations.size() < 5)
    throw ValidationError("fit_domain: need at least 5 observations (five unknowns)");
  if (!(options.delta > 0.0)) throw ValidationError("fit_domain: delta must be > 0");

  const std::string& domain = observations.front().domain;
  const TokenCount nof_raw = observations.front().n_other_fixed;
  std::set<TokenCount> distinct;
  double min_loss = std::numeric_limits<double>::infinity();
  for (const auto& obs : observations) {
    if (obs.domain != domain)
      throw ValidationError("fit_domain: observations mix domains '" + domain + "' and '" +
                            obs.domain + "'");
    if (obs.n_other_fixed != nof_raw)
      throw ValidationError("fit_domain: inconsistent n_other_fixed within domain '" + domain +
                            "'");
    require_non_negative(obs.n_self, "fit_domain: n_self");
    require_non_negative(obs.n_other_fixed, "fit_domain: n_other_fixed");
    if (!(obs.loss > 0.0 && std::isfinite(obs.loss)))
      throw ValidationError("fit_domain: losses must be positive and finite");
    distinct.insert(obs.n_self);
    min_loss = std::min(min_loss, obs.loss);
  }
  if (distinct.size() < 3)
    throw ValidationError("fit_domain: need at least 3 distinct n_self values");

  // Normalize token counts so the power-law base is O(1); C and k absorb the
  // scale exactly and are mapped back after the fit.
  double scale = options.normalization;
  if (scale <= 0.0) {
    std::vector<double> sizes;
    sizes.reserve(observations.size());
    for (const auto& obs : observations) sizes.push_back(static_cast<double>(obs.n_self));
    std::sort(sizes.begin(), sizes.end());
    const std::size_t m = sizes.size();
    scale = m % 2 == 1 ? sizes[m / 2] : std::sqrt(sizes[m / 2 - 1] * sizes[m / 2]);
    if (scale <= 0.0) scale = 1.0;
  }

  FitProblem problem;
  problem.delta = options.delta;
  problem.min_loss = min_loss;
  problem.nof = static_cast<double>(nof_raw) / scale;
  for (const auto& obs : observations) {
    problem.n.push_back(static_cast<double>(obs.n_self) / scale);
    problem.losses.push_back(obs.loss);
  }

  // Fixed multi-start grid; deterministic order.
  const double c_grid[] = {0.5, 1.0, 2.0, 4.0};
  const double k_grid[] = {0.01, 0.1, 0.3};
  const double alpha_grid[] = {0.3, 0.5, 0.7};
  const double beta_grid[] = {0.02, 0.05, 0.1};
  const double e_grid[] = {0.5, 0.9};  // fractions of min loss

  auto decode_params = [&](const Vec5& theta) {
    const FitProblem::Decoded d = problem.decode(theta);
    DomainParams p;
    p.name = domain;
    p.C = d.C * detail::pow_explicit(scale, d.beta);
    p.k = d.k * detail::pow_explicit(scale, 1.0 - d.alpha);
    p.alpha = d.alpha;
    p.beta = d.beta;
    p.E = d.E;
    return p;
  };

  std::vector<StartResult> results;
  results.reserve(216);
  for (double c0 : c_grid)
    for (double k0 : k_grid)
      for (double a0 : alpha_grid)
        for (double b0 : beta_grid)
          for (double e0 : e_grid) {
            Vec5 theta = Vec5::Zero();
            theta[2] = logit((a0 - 0.01) / 0.98);
            // The k cap depends on this start's alpha.
            const double cap = problem.decode(theta).k_cap;
            const double frac = cap > 0.0 ? std::clamp(k0 / cap, 1e-6, 1.0 - 1e-6) : 0.5;
            theta[0] = std::log(c0);
            theta[1] = logit(frac);
            theta[3] = std::log(b0);
            theta[4] = logit(e0);
            results.push_back(minimize_from(problem, theta, options));
          }
  const int starts = static_cast<int>(results.size());

  double best_objective = std::numeric_limits<double>::infinity();
  for (const auto& r : results) best_objective = std::min(best_objective, r.objective);
  const double tie_band =
      best_objective + std::max(0.0, options.near_tie_rel) * best_objective + 1e-12;

  // Within the tie band prefer stationary results, then smaller beta, then
  // the lexicographic (C, k, alpha, beta, E) order.
  const StartResult* best = nullptr;
  for (const auto& r : results) {
    if (r.objective > tie_band) continue;
    if (best == nullptr) {
      best = &r;
      continue;
    }
    if (r.converged != best->converged) {
      if (r.converged) best = &r;
      continue;
    }
    const DomainParams pa = decode_params(r.theta);
    const DomainParams pb = decode_params(best->theta);
    const auto ta = std::make_tuple(pa.beta, pa.C, pa.k, pa.alpha, pa.E);
    const auto tb = std::make_tuple(pb.beta, pb.C, pb.k, pb.alpha, pb.E);
    if (ta < tb) best = &r;
  }

  // A second pass from the winning point with fresh damping clears stalls
  // against the box clamp; it stays inside the winner's basin.
  StartResult winner = *best;
  {
    StartResult polished = minimize_from(problem, winner.theta, options);
    if (polished.objective <= winner.objective) winner = polished;
  }

  FitResult result;
  result.params = decode_params(winner.theta);
  result.huber_objective = winner.objective;
  result.n_restarts_used = starts;
  result.converged = winner.converged;
  const double nof_d = static_cast<double>(nof_raw);
  const double transfer_raw =
      nof_d > 0.0 ? result.params.k * detail::pow_explicit(nof_d, result.params.alpha) : 0.0;
  result.constraint_slack = nof_d - transfer_raw;
  return result;
}

std::vector<DomainFitOutcome> fit_all_domains(std::span<const ObservationGroup> groups,
                                              const FitOptions& options) {
  std::vector<DomainFitOutcome> outcomes(groups.size());
  auto run_one = [&](std::size_t i) {
    outcomes[i].domain = groups[i].first;
    try {
      outcomes[i].result = fit_domain(groups[i].second, options);
    } catch (const Error& e) {
      outcomes[i].error = e.what();
    }
  };

  const unsigned hw = std::thread::hardware_concurrency();
  if (groups.size() > 1 && hw > 1) {
    std::vector<std::future<void>> futures;
    futures.reserve(groups.size());
    for (std::size_t i = 0; i < groups.size(); ++i)
      futures.push_back(std::async(std::launch::async, run_one, i));
    for (auto& f : futures) f.get();
  } else {
    for (std::size_t i = 0; i < groups.size(); ++i) run_one(i);
  }
  return outcomes;
}

}  // namespace mixopt
