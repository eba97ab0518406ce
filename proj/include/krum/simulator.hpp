#pragma once

// Synchronous parameter-server simulation.
//
// Each round t the server broadcasts x_t, the n-f honest workers each draw a
// gradient estimate from their own (seed, worker, round) substream, the
// Byzantine workers answer with full knowledge of the honest proposals, the
// server aggregates with F and applies x_{t+1} = x_t - gamma_t * F.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "krum/adversary.hpp"
#include "krum/aggregation.hpp"
#include "krum/errors.hpp"
#include "krum/linalg.hpp"
#include "krum/parallel.hpp"
#include "krum/problems.hpp"
#include "krum/random.hpp"
#include "krum/resilience.hpp"

namespace krum {

struct ExperimentConfig {
  int n = 1;
  int f = 0;
  Rule rule = rules::Average{};
  CostFunction cost = costs::Quadratic{};
  Estimator estimator = estimators::Gaussian{};
  AttackSpec attack = attacks::Silence{};
  Schedule schedule;
  std::size_t rounds = 0;
  Vector x0;  // empty means the origin
  std::uint64_t seed = 0;
  std::vector<int> byzantine_ids;  // empty means {n-f+1..n}
  unsigned threads = 1;            // worker draws per round

  std::size_t dimension() const { return krum::dimension(cost); }

  /// Sorted Byzantine ids after applying the default.
  std::vector<int> resolved_byzantine_ids() const {
    std::vector<int> ids = byzantine_ids.empty() ? detail::default_byzantine_ids(n, f) : byzantine_ids;
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  Vector initial_point() const { return x0.empty() ? zeros(dimension()) : x0; }
};

/// Rejects a configuration before round 0.
inline void validate(const ExperimentConfig& cfg) {
  validate_rule(cfg.rule, cfg.n, cfg.f);
  validate_cost(cfg.cost);
  validate_estimator(cfg.cost, cfg.estimator);
  cfg.schedule.validate();
  const std::size_t d = cfg.dimension();
  if (!cfg.x0.empty()) {
    require_dimension(cfg.x0, d, "x0");
    require_finite(cfg.x0, "x0");
  }
  validate_attack(cfg.attack, cfg.f, d);
  if (!cfg.byzantine_ids.empty() && static_cast<int>(cfg.byzantine_ids.size()) != cfg.f)
    throw InvalidInput("byzantine_ids must list exactly f ids: got " + std::to_string(cfg.byzantine_ids.size()) +
                       " for f=" + std::to_string(cfg.f));
  std::vector<bool> seen(static_cast<std::size_t>(cfg.n) + 1, false);
  for (int id : cfg.byzantine_ids) {
    if (id < 1 || id > cfg.n || seen[id]) throw InvalidInput("byzantine_ids: invalid id " + std::to_string(id));
    seen[id] = true;
  }
}

struct RoundRecord {
  std::size_t t = 0;
  double cost = 0.0;
  double grad_norm = 0.0;  // |grad Q(x_t)|
  double gamma = 0.0;
  std::vector<int> selected_ids;
  bool byzantine_selected = false;
  double agg_to_grad_dist = 0.0;  // |F - grad Q(x_t)|
  double x_norm = 0.0;            // |x_{t+1}|
  /// Krum rules only: whether this round's proposals satisfied the safety
  /// radius condition (in which case byzantine_selected must be false).
  std::optional<bool> safety_radius_held;

  bool operator==(const RoundRecord&) const = default;
};

struct ExperimentTrace {
  ExperimentConfig config;
  std::vector<RoundRecord> records;
  Vector final_x;
  bool diverged = false;
  std::optional<std::size_t> diverged_at;
};

struct SimState {
  Vector x;
  std::size_t t = 0;
};

/// Thrown by run_round when x_{t+1} has a non-finite component. Carries the
/// record of the offending round.
class DivergenceDetected : public std::runtime_error {
 public:
  DivergenceDetected(RoundRecord record, Vector x)
      : std::runtime_error("divergence detected at round " + std::to_string(record.t)),
        record_(std::move(record)),
        x_(std::move(x)) {}
  const RoundRecord& record() const noexcept { return record_; }
  const Vector& parameters() const noexcept { return x_; }

 private:
  RoundRecord record_;
  Vector x_;
};

struct RoundResult {
  SimState next;
  RoundRecord record;
};

namespace detail {

// Largest pairwise distance among the honest proposals and smallest distance
// from any Byzantine proposal to any honest one.
inline bool safety_radius_holds(const AggregationInput& input, const std::vector<bool>& is_byz) {
  double delta_sq = 0.0;
  double r_sq = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < input.size(); ++i) {
    for (std::size_t j = i + 1; j < input.size(); ++j) {
      const bool bi = is_byz[input[i].id], bj = is_byz[input[j].id];
      if (bi && bj) continue;
      const double dsq = sq_distance(input[i].vector, input[j].vector);
      if (!bi && !bj)
        delta_sq = std::max(delta_sq, dsq);
      else
        r_sq = std::min(r_sq, dsq);
    }
  }
  return check_safety_radius(std::sqrt(delta_sq), std::sqrt(r_sq), input.n(), input.f());
}

}  // namespace detail

/// One synchronous round starting from `state`.
inline RoundResult run_round(const SimState& state, const ExperimentConfig& cfg) {
  const std::size_t d = cfg.dimension();
  const std::size_t t = state.t;
  const std::vector<int> byz = cfg.resolved_byzantine_ids();
  std::vector<bool> is_byz(static_cast<std::size_t>(cfg.n) + 1, false);
  for (int id : byz) is_byz[id] = true;

  std::vector<int> honest_ids;
  for (int id = 1; id <= cfg.n; ++id)
    if (!is_byz[id]) honest_ids.push_back(id);

  // (1) honest estimates; each (worker, round) owns its substream
  std::vector<WorkerVector> honest(honest_ids.size());
  detail::parallel_for(honest_ids.size(), cfg.threads, [&](std::size_t i) {
    Stream stream = Stream::derive(cfg.seed, StreamDomain::honest_worker, static_cast<std::uint64_t>(honest_ids[i]), t);
    honest[i] = {honest_ids[i], estimate_gradient(cfg.cost, state.x, cfg.estimator, stream)};
  });

  // (2) the server's own view of the true gradient, never taken from workers
  const Vector grad = true_gradient(cfg.cost, state.x);
  const double gamma = cfg.schedule(t);

  // (3) Byzantine proposals overwrite their slots; silence becomes the zero default
  AdversaryView view;
  view.round = t;
  view.parameters = state.x;
  view.correct = honest;
  view.true_gradient = grad;
  view.rule = cfg.rule;
  view.n = cfg.n;
  view.gamma = gamma;
  Stream adversary_stream = Stream::derive(cfg.seed, StreamDomain::adversary, t);
  auto proposals = byzantine_proposals(cfg.attack, view, byz, adversary_stream);

  std::vector<WorkerVector> entries = std::move(honest);
  for (std::size_t i = 0; i < byz.size(); ++i)
    entries.push_back({byz[i], proposals[i] ? std::move(*proposals[i]) : zeros(d)});
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

  RoundRecord rec;
  rec.t = t;
  rec.cost = cost(cfg.cost, state.x);
  rec.grad_norm = norm(grad);
  rec.gamma = gamma;

  // Overflowing proposals mean the run already diverged.
  for (const auto& e : entries) {
    if (!all_finite(e.vector)) {
      rec.agg_to_grad_dist = std::numeric_limits<double>::quiet_NaN();
      rec.x_norm = std::numeric_limits<double>::quiet_NaN();
      throw DivergenceDetected(std::move(rec), Vector(d, std::numeric_limits<double>::quiet_NaN()));
    }
  }

  // (4) aggregate and step
  const AggregationInput input(std::move(entries), cfg.f);
  const SelectionResult sel = aggregate(cfg.rule, input);

  SimState next{state.x, t + 1};
  add_scaled(next.x, sel.output, -gamma);

  // (5) metrics
  rec.selected_ids = sel.selected_ids;
  for (int id : sel.selected_ids) rec.byzantine_selected = rec.byzantine_selected || is_byz[id];
  rec.agg_to_grad_dist = std::sqrt(sq_distance(sel.output, grad));
  rec.x_norm = norm(next.x);
  if (std::holds_alternative<rules::Krum>(cfg.rule) && cfg.f > 0)
    rec.safety_radius_held = detail::safety_radius_holds(input, is_byz);

  if (!all_finite(next.x)) throw DivergenceDetected(std::move(rec), std::move(next.x));
  return {std::move(next), std::move(rec)};
}

/// Runs cfg.rounds rounds from x0. Divergence truncates the trace and sets
/// `diverged`; the offending round is the last record.
inline ExperimentTrace run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  ExperimentTrace trace;
  trace.config = cfg;
  trace.records.reserve(cfg.rounds);
  SimState state{cfg.initial_point(), 0};
  while (state.t < cfg.rounds) {
    try {
      auto [next, rec] = run_round(state, cfg);
      trace.records.push_back(std::move(rec));
      state = std::move(next);
    } catch (const DivergenceDetected& e) {
      trace.records.push_back(e.record());
      trace.diverged = true;
      trace.diverged_at = e.record().t;
      state.x = e.parameters();
      break;
    }
  }
  trace.final_x = std::move(state.x);
  return trace;
}

}  // namespace krum
