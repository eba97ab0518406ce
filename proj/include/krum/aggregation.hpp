#pragma once

// Choice functions F mapping n proposed vectors to one update vector:
// averaging, fixed linear combinations, the squared-distance medoid, Krum and
// m-Krum, plus the resilience constant eta(n, f) and the angle bound.
//
// All functions are pure and deterministic. Floating-point accumulation
// happens in a fixed order (component order for distances, neighbor order
// for scores, entry order for means) so results are reproducible bit-for-bit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "krum/errors.hpp"
#include "krum/linalg.hpp"

namespace krum {

struct WorkerVector {
  int id = 0;
  Vector vector;
};

/// The n worker-labeled proposals plus the declared Byzantine bound f.
///
/// Worker ids must be exactly {1, ..., n} (in any order), all vectors must
/// share one dimension d >= 1 and be finite. The Krum precondition 2f+2 < n
/// is checked by the Krum-family operations, not here, so the same input can
/// be fed to averaging with any f.
class AggregationInput {
 public:
  AggregationInput(std::vector<WorkerVector> entries, int f) : entries_(std::move(entries)), f_(f) {
    validate();
  }

  /// Assigns ids 1..n in order.
  static AggregationInput from_vectors(std::vector<Vector> vectors, int f = 0) {
    std::vector<WorkerVector> entries;
    entries.reserve(vectors.size());
    int id = 1;
    for (auto& v : vectors) entries.push_back({id++, std::move(v)});
    return AggregationInput(std::move(entries), f);
  }

  std::size_t size() const noexcept { return entries_.size(); }
  int n() const noexcept { return static_cast<int>(entries_.size()); }
  int f() const noexcept { return f_; }
  std::size_t dimension() const noexcept { return entries_.front().vector.size(); }
  std::span<const WorkerVector> entries() const noexcept { return entries_; }
  const WorkerVector& operator[](std::size_t pos) const { return entries_[pos]; }

  /// Entry position of worker `id`.
  std::size_t position_of(int id) const {
    for (std::size_t p = 0; p < entries_.size(); ++p)
      if (entries_[p].id == id) return p;
    throw InvalidInput("unknown worker id " + std::to_string(id));
  }

 private:
  void validate() const {
    if (entries_.empty()) throw InvalidInput("aggregation input must be non-empty");
    if (f_ < 0) throw InvalidInput("f must be non-negative");
    const std::size_t n = entries_.size();
    const std::size_t d = entries_.front().vector.size();
    if (d == 0) throw InvalidInput("vectors must have dimension d >= 1");
    std::vector<bool> seen(n + 1, false);
    for (const auto& e : entries_) {
      if (e.id < 1 || static_cast<std::size_t>(e.id) > n || seen[e.id])
        throw InvalidInput("worker ids must be exactly {1..n}; offending id " + std::to_string(e.id));
      seen[e.id] = true;
      require_dimension(e.vector, d, "worker " + std::to_string(e.id));
      require_finite(e.vector, "worker " + std::to_string(e.id));
    }
  }

  std::vector<WorkerVector> entries_;
  int f_;
};

struct KrumScore {
  int worker_id = 0;
  double score = 0.0;
  /// The n-f-2 closest other workers, in ascending id order.
  std::vector<int> neighbor_ids;
};

struct SelectionResult {
  std::vector<int> selected_ids;  // selection order; empty for linear rules
  Vector output;
  std::vector<KrumScore> scores;  // empty for rules that compute no scores
};

/// Symmetric n x n matrix of squared distances indexed by entry position.
class DistanceMatrix {
 public:
  explicit DistanceMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}
  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * n_ + j]; }
  void set(std::size_t i, std::size_t j, double v) noexcept {
    data_[i * n_ + j] = v;
    data_[j * n_ + i] = v;
  }

 private:
  std::size_t n_;
  std::vector<double> data_;
};

inline DistanceMatrix pairwise_sq_distances(const AggregationInput& input) {
  const std::size_t n = input.size();
  DistanceMatrix dist(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) dist.set(i, j, sq_distance(input[i].vector, input[j].vector));
  return dist;
}

inline void require_krum_precondition(int n, int f, const std::string& rule = "krum") {
  if (f < 0 || !(2 * f + 2 < n))
    throw PreconditionViolation(rule + " requires 2f+2 < n: got n=" + std::to_string(n) +
                                ", f=" + std::to_string(f));
}

namespace detail {

// Krum scores over the subset `active` (entry positions) of the input, with
// n' = active.size() and neighbor count n'-f-2. Neighbors are ordered by
// (squared distance, worker id); the score sums them in that order.
inline std::vector<KrumScore> krum_scores_over(const AggregationInput& input, const DistanceMatrix& dist,
                                               std::span<const std::size_t> active, int f) {
  const int n_active = static_cast<int>(active.size());
  require_krum_precondition(n_active, f);
  const auto k = static_cast<std::size_t>(n_active - f - 2);

  std::vector<KrumScore> scores;
  scores.reserve(active.size());
  std::vector<std::pair<double, int>> others;
  others.reserve(active.size());
  for (std::size_t i : active) {
    others.clear();
    for (std::size_t j : active)
      if (j != i) others.emplace_back(dist(i, j), input[j].id);
    std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k), others.end());

    KrumScore s;
    s.worker_id = input[i].id;
    s.neighbor_ids.reserve(k);
    for (std::size_t r = 0; r < k; ++r) {
      s.score += others[r].first;
      s.neighbor_ids.push_back(others[r].second);
    }
    std::sort(s.neighbor_ids.begin(), s.neighbor_ids.end());
    scores.push_back(std::move(s));
  }
  return scores;
}

// Index into `scores` of the minimal score; ties go to the smallest worker id.
inline std::size_t argmin_score(std::span<const KrumScore> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i].score < scores[best].score ||
        (scores[i].score == scores[best].score && scores[i].worker_id < scores[best].worker_id))
      best = i;
  }
  return best;
}

inline std::vector<std::size_t> all_positions(std::size_t n) {
  std::vector<std::size_t> pos(n);
  std::iota(pos.begin(), pos.end(), std::size_t{0});
  return pos;
}

}  // namespace detail

/// Krum score of every worker, in entry order.
inline std::vector<KrumScore> krum_scores(const AggregationInput& input) {
  require_krum_precondition(input.n(), input.f());
  const auto dist = pairwise_sq_distances(input);
  const auto active = detail::all_positions(input.size());
  return detail::krum_scores_over(input, dist, active, input.f());
}

/// Krum: the proposal with the smallest score, returned unchanged.
inline SelectionResult krum_select(const AggregationInput& input) {
  SelectionResult result;
  result.scores = krum_scores(input);
  const auto& winner = result.scores[detail::argmin_score(result.scores)];
  result.selected_ids = {winner.worker_id};
  result.output = input[input.position_of(winner.worker_id)].vector;
  return result;
}

/// m-Krum: run Krum, remove the winner, repeat m times with f fixed; average
/// the m winners. `scores` holds the first (full-set) iteration's scores.
inline SelectionResult multi_krum_select(const AggregationInput& input, int m) {
  const int n = input.n();
  const int f = input.f();
  if (m < 1) throw InvalidInput("m-Krum requires m >= 1: got m=" + std::to_string(m));
  if (!(n - m > 2 * f + 2))
    throw PreconditionViolation("multi_krum requires n-m > 2f+2: got n=" + std::to_string(n) +
                                ", m=" + std::to_string(m) + ", f=" + std::to_string(f));

  const auto dist = pairwise_sq_distances(input);
  auto active = detail::all_positions(input.size());
  SelectionResult result;
  result.output = zeros(input.dimension());
  for (int round = 0; round < m; ++round) {
    auto scores = detail::krum_scores_over(input, dist, active, f);
    const std::size_t best = detail::argmin_score(scores);
    const std::size_t pos = active[best];
    result.selected_ids.push_back(input[pos].id);
    add_to(result.output, input[pos].vector);
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(best));
    if (round == 0) result.scores = std::move(scores);
  }
  for (double& v : result.output) v /= static_cast<double>(m);
  return result;
}

inline Vector average(const AggregationInput& input) {
  Vector out = zeros(input.dimension());
  for (const auto& e : input.entries()) add_to(out, e.vector);
  for (double& v : out) v /= static_cast<double>(input.size());
  return out;
}

/// sum_i weights[id_i - 1] * V_i; weights are indexed by worker id and must
/// all be non-zero.
inline Vector linear_combination(const AggregationInput& input, std::span<const double> weights) {
  if (weights.size() != input.size())
    throw InvalidInput("linear_combination needs exactly n weights: got " + std::to_string(weights.size()) +
                       " for n=" + std::to_string(input.size()));
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] == 0.0 || !std::isfinite(weights[i]))
      throw InvalidInput("linear_combination weight for worker " + std::to_string(i + 1) +
                         " must be finite and non-zero");
  }
  Vector out = zeros(input.dimension());
  for (const auto& e : input.entries()) add_scaled(out, e.vector, weights[static_cast<std::size_t>(e.id - 1)]);
  return out;
}

/// The proposal minimizing the total squared distance to all proposals.
/// Ties go to the smallest worker id.
inline SelectionResult sq_dist_medoid_select(const AggregationInput& input) {
  const auto dist = pairwise_sq_distances(input);
  const std::size_t n = input.size();
  std::size_t best = 0;
  double best_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += dist(i, j);
    if (i == 0 || sum < best_sum || (sum == best_sum && input[i].id < input[best].id)) {
      best = i;
      best_sum = sum;
    }
  }
  return {{input[best].id}, input[best].vector, {}};
}

/// eta(n, f) = sqrt(2 (n - f + (f (n-f-2) + f^2 (n-f-1)) / (n-2f-2))).
inline double eta(int n, int f) {
  require_krum_precondition(n, f, "eta");
  const double nd = n, fd = f;
  const double fraction = (fd * (nd - fd - 2.0) + fd * fd * (nd - fd - 1.0)) / (nd - 2.0 * fd - 2.0);
  return std::sqrt(2.0 * (nd - fd + fraction));
}

struct ResilienceAngle {
  double sin_alpha = 0.0;
  /// False when eta * sqrt(d) * sigma >= |g|: the gradient is inside the
  /// flat basin and no angle guarantee applies.
  bool within_guarantee = true;
  /// eta(n, f) * sqrt(d) * sigma
  double deviation_radius = 0.0;
};

/// sin(alpha) = eta(n, f) sqrt(d) sigma / |g|.
inline ResilienceAngle resilience_angle(int n, int f, int d, double sigma, double grad_norm) {
  if (d < 1) throw InvalidInput("resilience_angle requires d >= 1");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidInput("resilience_angle requires sigma >= 0");
  if (!(grad_norm > 0.0) || !std::isfinite(grad_norm))
    throw PreconditionViolation("resilience_angle requires |g| > 0");
  ResilienceAngle a;
  a.deviation_radius = eta(n, f) * std::sqrt(static_cast<double>(d)) * sigma;
  a.sin_alpha = a.deviation_radius / grad_norm;
  a.within_guarantee = a.sin_alpha < 1.0;
  return a;
}

// ---------------------------------------------------------------------------
// Rule descriptors, used by the simulator, the resilience estimator and the
// adversary (which is allowed to know F).

namespace rules {
struct Average {};
struct Linear {
  std::vector<double> weights;  // indexed by worker id - 1
};
struct Medoid {};
struct Krum {};
struct MultiKrum {
  int m = 1;
};
}  // namespace rules

using Rule = std::variant<rules::Average, rules::Linear, rules::Medoid, rules::Krum, rules::MultiKrum>;

inline std::string rule_name(const Rule& rule) {
  struct {
    std::string operator()(const rules::Average&) const { return "average"; }
    std::string operator()(const rules::Linear&) const { return "linear"; }
    std::string operator()(const rules::Medoid&) const { return "medoid"; }
    std::string operator()(const rules::Krum&) const { return "krum"; }
    std::string operator()(const rules::MultiKrum&) const { return "multi_krum"; }
  } visitor;
  return std::visit(visitor, rule);
}

/// Checks the rule's own preconditions for n workers, f of them Byzantine.
inline void validate_rule(const Rule& rule, int n, int f) {
  if (n < 1) throw InvalidInput("n must be positive");
  if (f < 0 || f >= n)
    throw InvalidInput("f must satisfy 0 <= f < n: got n=" + std::to_string(n) + ", f=" + std::to_string(f));
  if (std::holds_alternative<rules::Krum>(rule)) require_krum_precondition(n, f);
  if (const auto* mk = std::get_if<rules::MultiKrum>(&rule)) {
    if (mk->m < 1) throw InvalidInput("multi_krum requires m >= 1: got m=" + std::to_string(mk->m));
    if (!(n - mk->m > 2 * f + 2))
      throw PreconditionViolation("multi_krum requires n-m > 2f+2: got n=" + std::to_string(n) +
                                  ", m=" + std::to_string(mk->m) + ", f=" + std::to_string(f));
  }
  if (const auto* lin = std::get_if<rules::Linear>(&rule)) {
    if (lin->weights.size() != static_cast<std::size_t>(n))
      throw InvalidInput("linear rule needs exactly n weights: got " + std::to_string(lin->weights.size()) +
                         " for n=" + std::to_string(n));
    for (double w : lin->weights)
      if (w == 0.0 || !std::isfinite(w)) throw InvalidInput("linear rule weights must be finite and non-zero");
  }
}

/// Weights a linear rule applies; averaging is the uniform combination.
/// Empty for non-linear rules.
inline std::vector<double> linear_weights(const Rule& rule, int n) {
  if (std::holds_alternative<rules::Average>(rule)) return std::vector<double>(n, 1.0 / n);
  if (const auto* lin = std::get_if<rules::Linear>(&rule)) return lin->weights;
  return {};
}

inline SelectionResult aggregate(const Rule& rule, const AggregationInput& input) {
  struct {
    const AggregationInput& in;
    SelectionResult operator()(const rules::Average&) const { return {{}, average(in), {}}; }
    SelectionResult operator()(const rules::Linear& r) const { return {{}, linear_combination(in, r.weights), {}}; }
    SelectionResult operator()(const rules::Medoid&) const { return sq_dist_medoid_select(in); }
    SelectionResult operator()(const rules::Krum&) const { return krum_select(in); }
    SelectionResult operator()(const rules::MultiKrum& r) const { return multi_krum_select(in, r.m); }
  } visitor{input};
  return std::visit(visitor, rule);
}

}  // namespace krum
