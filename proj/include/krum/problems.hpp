#pragma once

// Synthetic cost functions Q with closed-form gradients, unbiased noisy
// gradient estimators G(x, xi), the local standard deviation sigma(x), and
// learning-rate schedules gamma_t = gamma0 / (1 + t)^p.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "krum/errors.hpp"
#include "krum/linalg.hpp"
#include "krum/random.hpp"

namespace krum {

namespace costs {
/// Q(x) = 1/2 |x - x_star|^2
struct Quadratic {
  Vector x_star;
};
/// Q(x) = 1/(2N) sum_r (a_r . x - y_r)^2
struct LeastSquares {
  std::vector<Vector> design;  // N rows of dimension d
  Vector targets;              // N entries
};
/// Q(x) = sum_k (1 - cos x_k) + lambda |x|^2; non-convex, coercive.
struct CosineBowl {
  double lambda = 0.1;
  std::size_t d = 1;
};
}  // namespace costs

using CostFunction = std::variant<costs::Quadratic, costs::LeastSquares, costs::CosineBowl>;

namespace estimators {
/// G = grad Q + N(0, sigma^2 I).
struct Gaussian {
  double sigma = 0.0;
};
/// Mean of b row gradients sampled uniformly with replacement (least squares only).
struct Minibatch {
  std::size_t batch_size = 1;
};
}  // namespace estimators

using Estimator = std::variant<estimators::Gaussian, estimators::Minibatch>;

inline std::string cost_name(const CostFunction& c) {
  switch (c.index()) {
    case 0: return "quadratic";
    case 1: return "least_squares";
    default: return "cosine_bowl";
  }
}

inline std::string estimator_name(const Estimator& e) { return e.index() == 0 ? "gaussian" : "minibatch"; }

inline std::size_t dimension(const CostFunction& cost) {
  if (const auto* q = std::get_if<costs::Quadratic>(&cost)) return q->x_star.size();
  if (const auto* ls = std::get_if<costs::LeastSquares>(&cost)) return ls->design.empty() ? 0 : ls->design.front().size();
  return std::get<costs::CosineBowl>(cost).d;
}

inline void validate_cost(const CostFunction& cost) {
  if (dimension(cost) == 0) throw InvalidInput("cost: dimension d must be >= 1");
  if (const auto* q = std::get_if<costs::Quadratic>(&cost)) {
    require_finite(q->x_star, "cost.x_star");
  } else if (const auto* ls = std::get_if<costs::LeastSquares>(&cost)) {
    const std::size_t d = dimension(cost);
    if (ls->targets.size() != ls->design.size())
      throw InvalidInput("cost: least_squares needs one target per design row");
    for (const auto& row : ls->design) {
      require_dimension(row, d, "cost.design row");
      require_finite(row, "cost.design row");
    }
    require_finite(ls->targets, "cost.targets");
  } else {
    const auto& cb = std::get<costs::CosineBowl>(cost);
    if (!(cb.lambda > 0.0) || !std::isfinite(cb.lambda)) throw InvalidInput("cost: cosine_bowl lambda must be positive");
  }
}

inline double cost(const CostFunction& q, std::span<const double> x) {
  require_dimension(x, dimension(q), "cost argument");
  if (const auto* quad = std::get_if<costs::Quadratic>(&q)) return 0.5 * sq_distance(x, quad->x_star);
  if (const auto* ls = std::get_if<costs::LeastSquares>(&q)) {
    double acc = 0.0;
    for (std::size_t r = 0; r < ls->design.size(); ++r) {
      const double res = dot(ls->design[r], x) - ls->targets[r];
      acc += res * res;
    }
    return 0.5 * acc / static_cast<double>(ls->design.size());
  }
  const auto& cb = std::get<costs::CosineBowl>(q);
  double acc = 0.0;
  for (double xk : x) acc += (1.0 - std::cos(xk)) + cb.lambda * xk * xk;
  return acc;
}

inline Vector true_gradient(const CostFunction& q, std::span<const double> x) {
  require_dimension(x, dimension(q), "gradient argument");
  if (const auto* quad = std::get_if<costs::Quadratic>(&q)) return difference(x, quad->x_star);
  if (const auto* ls = std::get_if<costs::LeastSquares>(&q)) {
    Vector g = zeros(x.size());
    for (std::size_t r = 0; r < ls->design.size(); ++r)
      add_scaled(g, ls->design[r], dot(ls->design[r], x) - ls->targets[r]);
    for (double& v : g) v /= static_cast<double>(ls->design.size());
    return g;
  }
  const auto& cb = std::get<costs::CosineBowl>(q);
  Vector g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) g[k] = std::sin(x[k]) + 2.0 * cb.lambda * x[k];
  return g;
}

inline void validate_estimator(const CostFunction& q, const Estimator& est) {
  if (const auto* g = std::get_if<estimators::Gaussian>(&est)) {
    if (!(g->sigma >= 0.0) || !std::isfinite(g->sigma)) throw InvalidInput("estimator: sigma must be >= 0");
    return;
  }
  const auto& mb = std::get<estimators::Minibatch>(est);
  if (!std::holds_alternative<costs::LeastSquares>(q))
    throw UnsupportedCombination("estimator: minibatch requires a least_squares cost, got " + cost_name(q));
  if (mb.batch_size < 1) throw InvalidInput("estimator: batch_size must be >= 1");
}

/// One unbiased draw G(x, xi) from `stream`.
inline Vector estimate_gradient(const CostFunction& q, std::span<const double> x, const Estimator& est,
                                Stream& stream) {
  validate_estimator(q, est);
  if (const auto* gauss = std::get_if<estimators::Gaussian>(&est)) {
    Vector g = true_gradient(q, x);
    for (double& v : g) v += gauss->sigma * stream.normal();
    return g;
  }
  require_dimension(x, dimension(q), "gradient argument");
  const auto& ls = std::get<costs::LeastSquares>(q);
  const auto& mb = std::get<estimators::Minibatch>(est);
  Vector g = zeros(x.size());
  for (std::size_t s = 0; s < mb.batch_size; ++s) {
    const auto r = static_cast<std::size_t>(stream.index(ls.design.size()));
    add_scaled(g, ls.design[r], dot(ls.design[r], x) - ls.targets[r]);
  }
  for (double& v : g) v /= static_cast<double>(mb.batch_size);
  return g;
}

/// Monte Carlo estimate of sigma(x), where d sigma^2(x) = E|G(x, xi) - grad Q(x)|^2.
inline double local_sigma(const CostFunction& q, std::span<const double> x, const Estimator& est,
                          std::size_t trials, Stream& stream) {
  if (trials < 2) throw InvalidInput("local_sigma requires trials >= 2");
  const Vector g = true_gradient(q, x);
  double acc = 0.0;
  for (std::size_t k = 0; k < trials; ++k) acc += sq_distance(estimate_gradient(q, x, est, stream), g);
  return std::sqrt(acc / static_cast<double>(trials) / static_cast<double>(x.size()));
}

/// gamma_t = gamma0 / (1 + t)^p with p in (0.5, 1], the exponents for which
/// sum gamma_t diverges and sum gamma_t^2 converges.
inline double lr_schedule(std::uint64_t t, double gamma0, double p) {
  if (!(gamma0 > 0.0) || !std::isfinite(gamma0))
    throw InvalidSchedule("gamma0 must be positive: got " + std::to_string(gamma0));
  if (!(p > 0.5 && p <= 1.0))
    throw InvalidSchedule("p must lie in (0.5, 1] so that ∑γ_t = ∞ and ∑γ_t² < ∞: got p=" +
                          std::to_string(p));
  return gamma0 / std::pow(1.0 + static_cast<double>(t), p);
}

struct Schedule {
  double gamma0 = 0.1;
  double p = 1.0;
  /// gamma_t = gamma0 for every t. Violates the convergence conditions;
  /// meant for one-step checks.
  bool constant = false;

  void validate() const {
    if (constant) {
      if (!(gamma0 > 0.0) || !std::isfinite(gamma0)) throw InvalidSchedule("gamma0 must be positive");
      return;
    }
    (void)lr_schedule(0, gamma0, p);
  }

  double operator()(std::uint64_t t) const { return constant ? gamma0 : lr_schedule(t, gamma0, p); }
};

}  // namespace krum
