#pragma once

// Monte Carlo checks of (alpha, f)-Byzantine resilience for an aggregation
// rule under a given attack.
//
// Each trial draws n-f honest vectors from N(g, sigma^2 I_d), lets the
// adversary answer with full knowledge, and aggregates. Per-trial results are
// stored and reduced in trial order, so the report does not depend on the
// thread count. All statements are about sample estimates of expectations;
// a passing report is evidence, not a proof of the universally-quantified
// property.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "krum/adversary.hpp"
#include "krum/aggregation.hpp"
#include "krum/errors.hpp"
#include "krum/linalg.hpp"
#include "krum/parallel.hpp"
#include "krum/random.hpp"

namespace krum {

/// Sufficient condition for Krum to select a correct worker when the correct
/// vectors have pairwise distances <= delta and every Byzantine vector is at
/// distance >= r from every correct one:
///   r^2 (n - 2f - 1) > delta^2 (n - f - 2).
/// A correct worker scores at most (n-f-2) delta^2, while a Byzantine worker
/// has at least n-2f-1 correct neighbors, each at squared distance >= r^2.
inline bool check_safety_radius(double delta, double r, int n, int f) {
  require_krum_precondition(n, f, "check_safety_radius");
  return r * r * static_cast<double>(n - 2 * f - 1) > delta * delta * static_cast<double>(n - f - 2);
}

struct ResilienceSetup {
  Rule rule = rules::Krum{};
  int n = 0;
  int f = 0;
  Vector g;  // true gradient; d = g.size()
  double sigma = 1.0;
  AttackSpec attack = attacks::Silence{};
  std::size_t trials = 10000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  /// Condition (ii) holds when E|F|^r <= moment_ceiling * moment_reference[r].
  double moment_ceiling = 1.0;
  /// Byzantine ids; empty means the highest f ids.
  std::vector<int> byzantine_ids;
  /// Width of the statistical slack, in standard errors.
  double slack_se = 3.0;
};

struct ResilienceReport {
  std::size_t trials = 0;
  Vector empirical_mean_F;
  Vector mean_F_standard_error;

  double sin_alpha = 0.0;
  bool within_guarantee = true;

  double inner_product = 0.0;  // <mean F, g>
  double inner_product_se = 0.0;
  double bound_i = 0.0;  // (1 - sin alpha) |g|^2
  bool condition_i_holds = false;

  double mean_sq_dev = 0.0;  // E|F - g|^2
  double mean_sq_dev_se = 0.0;
  double bias_sq = 0.0;     // |mean F - g|^2
  double dev_bound = 0.0;   // eta^2 d sigma^2
  bool deviation_bound_holds = false;

  static constexpr std::array<int, 3> orders{2, 3, 4};
  std::array<double, 3> moments{};           // E|F|^r
  std::array<double, 3> moment_se{};
  std::array<double, 3> moment_reference{};  // (n - f) E|G|^r
  bool condition_ii_holds = false;

  double byzantine_selection_rate = 0.0;  // fraction of trials selecting a Byzantine id
};

namespace detail {

struct TrialOutcome {
  Vector output;
  double inner = 0.0;
  double sq_dev = 0.0;
  std::array<double, 3> f_moments{};
  std::array<double, 3> honest_moments{};
  bool byzantine_selected = false;
};

struct RunningMoments {
  double sum = 0.0;
  double sum_sq = 0.0;
  void add(double v) {
    sum += v;
    sum_sq += v * v;
  }
  double mean(std::size_t n) const { return sum / static_cast<double>(n); }
  // standard error of the mean
  double se(std::size_t n) const {
    const double m = mean(n);
    const double var = std::max(0.0, (sum_sq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1));
    return std::sqrt(var / static_cast<double>(n));
  }
};

inline std::vector<int> default_byzantine_ids(int n, int f) {
  std::vector<int> ids;
  for (int id = n - f + 1; id <= n; ++id) ids.push_back(id);
  return ids;
}

}  // namespace detail

inline ResilienceReport estimate_resilience(const ResilienceSetup& setup) {
  const int n = setup.n, f = setup.f;
  validate_rule(setup.rule, n, f);
  const std::size_t d = setup.g.size();
  if (d == 0) throw InvalidInput("resilience: g must have dimension >= 1");
  require_finite(setup.g, "resilience: g");
  if (!(setup.sigma >= 0.0)) throw InvalidInput("resilience: sigma must be >= 0");
  if (setup.trials < 2) throw InvalidInput("resilience: trials must be >= 2");
  validate_attack(setup.attack, f, d);

  std::vector<int> byz = setup.byzantine_ids.empty() ? detail::default_byzantine_ids(n, f) : setup.byzantine_ids;
  std::sort(byz.begin(), byz.end());
  if (static_cast<int>(byz.size()) != f) throw InvalidInput("resilience: |byzantine_ids| must equal f");
  std::vector<bool> is_byz(static_cast<std::size_t>(n) + 1, false);
  for (int id : byz) {
    if (id < 1 || id > n || is_byz[id]) throw InvalidInput("resilience: invalid byzantine id " + std::to_string(id));
    is_byz[id] = true;
  }

  std::vector<detail::TrialOutcome> outcomes(setup.trials);
  detail::parallel_for(setup.trials, setup.threads, [&](std::size_t k) {
    Stream honest_stream = Stream::derive(setup.seed, StreamDomain::trial, k);
    Stream adversary_stream = Stream::derive(setup.seed, StreamDomain::adversary, k);

    AdversaryView view;
    view.round = k;
    view.parameters = zeros(d);
    view.true_gradient = setup.g;
    view.rule = setup.rule;
    view.n = n;
    for (int id = 1; id <= n; ++id) {
      if (is_byz[id]) continue;
      Vector v = setup.g;
      for (double& x : v) x += setup.sigma * honest_stream.normal();
      view.correct.push_back({id, std::move(v)});
    }

    auto& out = outcomes[k];
    for (const auto& c : view.correct) {
      const double len = norm(c.vector);
      for (std::size_t r = 0; r < 3; ++r)
        out.honest_moments[r] += std::pow(len, ResilienceReport::orders[r]) / static_cast<double>(view.correct.size());
    }

    auto proposals = byzantine_proposals(setup.attack, view, byz, adversary_stream);
    std::vector<WorkerVector> entries = view.correct;
    for (std::size_t i = 0; i < byz.size(); ++i)
      entries.push_back({byz[i], proposals[i] ? std::move(*proposals[i]) : zeros(d)});
    const AggregationInput input(std::move(entries), f);
    SelectionResult sel = aggregate(setup.rule, input);

    out.inner = dot(sel.output, setup.g);
    out.sq_dev = sq_distance(sel.output, setup.g);
    const double len = norm(sel.output);
    for (std::size_t r = 0; r < 3; ++r) out.f_moments[r] = std::pow(len, ResilienceReport::orders[r]);
    for (int id : sel.selected_ids) out.byzantine_selected = out.byzantine_selected || is_byz[id];
    out.output = std::move(sel.output);
  });

  const std::size_t trials = setup.trials;
  ResilienceReport rep;
  rep.trials = trials;

  std::vector<detail::RunningMoments> coord(d);
  detail::RunningMoments inner, dev;
  std::array<detail::RunningMoments, 3> fm, hm;
  std::size_t byz_hits = 0;
  for (const auto& o : outcomes) {
    for (std::size_t k = 0; k < d; ++k) coord[k].add(o.output[k]);
    inner.add(o.inner);
    dev.add(o.sq_dev);
    for (std::size_t r = 0; r < 3; ++r) {
      fm[r].add(o.f_moments[r]);
      hm[r].add(o.honest_moments[r]);
    }
    if (o.byzantine_selected) ++byz_hits;
  }

  rep.empirical_mean_F.resize(d);
  rep.mean_F_standard_error.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    rep.empirical_mean_F[k] = coord[k].mean(trials);
    rep.mean_F_standard_error[k] = coord[k].se(trials);
  }

  const double g_sq = sq_norm(setup.g);
  const double g_norm = std::sqrt(g_sq);
  // eta(n, f) only exists for 2f+2 < n; outside that range no bound applies.
  const bool eta_defined = 2 * f + 2 < n;
  const double eta_nf = eta_defined ? eta(n, f) : std::numeric_limits<double>::infinity();
  if (eta_defined && g_norm > 0.0) {
    const auto angle = resilience_angle(n, f, static_cast<int>(d), setup.sigma, g_norm);
    rep.sin_alpha = angle.sin_alpha;
    rep.within_guarantee = angle.within_guarantee;
  } else {
    rep.sin_alpha = 1.0;
    rep.within_guarantee = false;
  }

  rep.inner_product = dot(rep.empirical_mean_F, setup.g);
  rep.inner_product_se = inner.se(trials);
  rep.bound_i = (1.0 - rep.sin_alpha) * g_sq;
  rep.condition_i_holds = rep.within_guarantee && rep.inner_product - setup.slack_se * rep.inner_product_se >= rep.bound_i &&
                          rep.inner_product > 0.0;

  rep.mean_sq_dev = dev.mean(trials);
  rep.mean_sq_dev_se = dev.se(trials);
  rep.bias_sq = sq_distance(rep.empirical_mean_F, setup.g);
  rep.dev_bound = eta_nf * eta_nf * static_cast<double>(d) * setup.sigma * setup.sigma;
  rep.deviation_bound_holds = eta_defined && rep.bias_sq <= rep.dev_bound &&
                              rep.mean_sq_dev + setup.slack_se * rep.mean_sq_dev_se <= rep.dev_bound;

  bool moments_ok = true;
  for (std::size_t r = 0; r < 3; ++r) {
    rep.moments[r] = fm[r].mean(trials);
    rep.moment_se[r] = fm[r].se(trials);
    rep.moment_reference[r] = static_cast<double>(n - f) * hm[r].mean(trials);
    moments_ok = moments_ok && std::isfinite(rep.moments[r]) &&
                 rep.moments[r] <= setup.moment_ceiling * rep.moment_reference[r];
  }
  rep.condition_ii_holds = moments_ok;
  rep.byzantine_selection_rate = static_cast<double>(byz_hits) / static_cast<double>(trials);
  return rep;
}

}  // namespace krum
