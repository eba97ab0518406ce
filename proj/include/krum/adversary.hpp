#pragma once

// Byzantine worker strategies. Byzantine workers are omniscient: each round
// they see the parameter vector, every honest proposal, the true gradient and
// the aggregation rule before choosing their own vectors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "krum/aggregation.hpp"
#include "krum/errors.hpp"
#include "krum/linalg.hpp"
#include "krum/random.hpp"

namespace krum {

struct AdversaryView {
  std::size_t round = 0;
  Vector parameters;                  // x_t
  std::vector<WorkerVector> correct;  // honest proposals this round
  std::optional<Vector> true_gradient;
  Rule rule = rules::Average{};
  int n = 0;             // total number of workers
  double gamma = 0.0;    // learning rate of this round

  std::size_t dimension() const {
    if (correct.empty()) throw InvalidInput("adversary view has no correct vectors");
    return correct.front().vector.size();
  }
};

namespace attacks {
/// Forces a linear rule to output `target` exactly.
struct OmniscientLinear {
  Vector target;
};
/// f-1 vectors far away along `direction`, one at the barycenter of the rest.
struct CollusionMedoid {
  double magnitude = 0.0;
  Vector direction;  // unit norm
};
struct SignFlip {
  double kappa = 1.0;
};
struct GaussianNoise {
  Vector center;  // empty means the origin
  double spread = 0.0;
};
/// Send nothing; the server substitutes the zero vector.
struct Silence {};
}  // namespace attacks

using AttackSpec =
    std::variant<attacks::OmniscientLinear, attacks::CollusionMedoid, attacks::SignFlip, attacks::GaussianNoise,
                 attacks::Silence>;

inline std::string attack_name(const AttackSpec& spec) {
  struct {
    std::string operator()(const attacks::OmniscientLinear&) const { return "omniscient_linear"; }
    std::string operator()(const attacks::CollusionMedoid&) const { return "collusion_medoid"; }
    std::string operator()(const attacks::SignFlip&) const { return "sign_flip"; }
    std::string operator()(const attacks::GaussianNoise&) const { return "gaussian_noise"; }
    std::string operator()(const attacks::Silence&) const { return "silence"; }
  } visitor;
  return std::visit(visitor, spec);
}

namespace detail {
inline Vector correct_mean(const AdversaryView& view) {
  Vector mean = zeros(view.dimension());
  for (const auto& c : view.correct) add_to(mean, c.vector);
  for (double& v : mean) v /= static_cast<double>(view.correct.size());
  return mean;
}

inline void require_unit(std::span<const double> direction) {
  if (std::abs(norm(direction) - 1.0) > 1e-12) throw InvalidInput("attack direction must have unit norm");
}
}  // namespace detail

/// The vector worker `byz_id` must propose so that
/// sum_i weights[i-1] * V_i == target, given every other worker's proposal
/// in `view.correct`: B = (target - sum_{i != byz} w_i V_i) / w_byz.
inline Vector omniscient_linear_attack(const AdversaryView& view, std::span<const double> weights, int byz_id,
                                       std::span<const double> target) {
  const std::size_t n = weights.size();
  if (byz_id < 1 || static_cast<std::size_t>(byz_id) > n)
    throw InvalidInput("byzantine id " + std::to_string(byz_id) + " outside 1..n");
  const double own = weights[static_cast<std::size_t>(byz_id - 1)];
  if (own == 0.0) throw InvalidInput("omniscient linear attack needs a non-zero weight for the byzantine worker");

  std::vector<const Vector*> others(n + 1, nullptr);
  for (const auto& c : view.correct) {
    if (c.id < 1 || static_cast<std::size_t>(c.id) > n || c.id == byz_id || others[c.id])
      throw InvalidInput("invalid adversary view: unexpected worker id " + std::to_string(c.id));
    others[c.id] = &c.vector;
  }
  const std::size_t d = target.size();
  Vector rest = zeros(d);
  for (std::size_t id = 1; id <= n; ++id) {
    if (static_cast<int>(id) == byz_id) continue;
    if (!others[id])
      throw InvalidInput("invalid adversary view: missing the proposal of worker " + std::to_string(id));
    require_dimension(*others[id], d, "worker " + std::to_string(id));
    add_scaled(rest, *others[id], weights[id - 1]);
  }
  Vector b(d);
  for (std::size_t k = 0; k < d; ++k) b[k] = (target[k] - rest[k]) / own;
  return b;
}

/// f-1 copies of magnitude * direction, followed by one vector b at the
/// barycenter of the other n-1 proposals. Because b equals the mean of all n
/// proposals, it minimizes the total squared distance over the whole space,
/// so the medoid rule picks it whenever it differs from every other proposal.
inline std::vector<Vector> collusion_medoid_attack(const AdversaryView& view, int f, double magnitude,
                                                   std::span<const double> direction) {
  if (f < 2) throw AttackInapplicable("collusion attack requires f >= 2: got f=" + std::to_string(f));
  if (!(magnitude >= 0.0) || !std::isfinite(magnitude))
    throw InvalidInput("collusion attack magnitude must be finite and non-negative");
  const std::size_t d = view.dimension();
  require_dimension(direction, d, "collusion direction");
  detail::require_unit(direction);

  const Vector remote = scaled(direction, magnitude);
  Vector b = zeros(d);
  for (const auto& c : view.correct) add_to(b, c.vector);
  add_scaled(b, remote, static_cast<double>(f - 1));
  const double others = static_cast<double>(view.correct.size()) + static_cast<double>(f - 1);
  for (double& v : b) v /= others;

  std::vector<Vector> out(static_cast<std::size_t>(f - 1), remote);
  out.push_back(std::move(b));
  return out;
}

/// f copies of -kappa * mean(correct).
inline std::vector<Vector> sign_flip_attack(const AdversaryView& view, int f, double kappa) {
  if (!(kappa > 0.0)) throw InvalidInput("sign flip scale kappa must be positive");
  const Vector flipped = scaled(detail::correct_mean(view), -kappa);
  return std::vector<Vector>(static_cast<std::size_t>(std::max(f, 0)), flipped);
}

inline std::vector<Vector> silence_attack(const AdversaryView& view, int f) {
  return std::vector<Vector>(static_cast<std::size_t>(std::max(f, 0)), zeros(view.dimension()));
}

/// f samples with coordinates center[k] + spread * N(0, 1).
inline std::vector<Vector> gaussian_noise_attack(const AdversaryView& view, int f, std::span<const double> center,
                                                 double spread, Stream& stream) {
  if (!(spread >= 0.0)) throw InvalidInput("gaussian noise spread must be non-negative");
  const std::size_t d = view.dimension();
  const Vector origin = center.empty() ? zeros(d) : Vector(center.begin(), center.end());
  require_dimension(origin, d, "gaussian noise center");
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(std::max(f, 0)));
  for (int i = 0; i < f; ++i) {
    Vector v = origin;
    for (double& x : v) x += spread * stream.normal();
    out.push_back(std::move(v));
  }
  return out;
}

/// Checks an attack's parameters against (n, f, d) before a run starts.
inline void validate_attack(const AttackSpec& spec, int f, std::size_t d) {
  if (f == 0) return;
  if (const auto* a = std::get_if<attacks::OmniscientLinear>(&spec)) {
    require_dimension(a->target, d, "attack.target");
    require_finite(a->target, "attack.target");
  } else if (const auto* a = std::get_if<attacks::CollusionMedoid>(&spec)) {
    if (f < 2) throw AttackInapplicable("collusion attack requires f >= 2: got f=" + std::to_string(f));
    if (!(a->magnitude > 0.0) || !std::isfinite(a->magnitude))
      throw InvalidInput("attack.magnitude must be positive");
    require_dimension(a->direction, d, "attack.direction");
    detail::require_unit(a->direction);
  } else if (const auto* a = std::get_if<attacks::SignFlip>(&spec)) {
    if (!(a->kappa > 0.0) || !std::isfinite(a->kappa)) throw InvalidInput("attack.kappa must be positive");
  } else if (const auto* a = std::get_if<attacks::GaussianNoise>(&spec)) {
    if (!(a->spread >= 0.0) || !std::isfinite(a->spread)) throw InvalidInput("attack.spread must be non-negative");
    if (!a->center.empty()) require_dimension(a->center, d, "attack.center");
  }
}

/// Proposals of the Byzantine workers `byz_ids` (ascending) for this round,
/// aligned with `byz_ids`. std::nullopt means the worker sent nothing.
///
/// The omniscient linear attack uses the rule's linear weights, or uniform
/// weights when F is not linear (the adversary then targets the average).
/// With f > 1 the highest Byzantine id crafts the vector and its
/// accomplices propose zero.
inline std::vector<std::optional<Vector>> byzantine_proposals(const AttackSpec& spec, const AdversaryView& view,
                                                              std::span<const int> byz_ids, Stream& stream) {
  const int f = static_cast<int>(byz_ids.size());
  std::vector<std::optional<Vector>> out(byz_ids.size());
  if (f == 0) return out;
  const std::size_t d = view.dimension();

  if (const auto* a = std::get_if<attacks::OmniscientLinear>(&spec)) {
    std::vector<double> weights = linear_weights(view.rule, view.n);
    if (weights.empty()) weights.assign(static_cast<std::size_t>(view.n), 1.0 / view.n);
    const int crafter = *std::max_element(byz_ids.begin(), byz_ids.end());
    AdversaryView augmented = view;
    for (std::size_t i = 0; i < byz_ids.size(); ++i) {
      if (byz_ids[i] == crafter) continue;
      out[i] = zeros(d);
      augmented.correct.push_back({byz_ids[i], zeros(d)});
    }
    for (std::size_t i = 0; i < byz_ids.size(); ++i)
      if (byz_ids[i] == crafter) out[i] = omniscient_linear_attack(augmented, weights, crafter, a->target);
    return out;
  }

  std::vector<Vector> vectors;
  if (const auto* a = std::get_if<attacks::CollusionMedoid>(&spec)) {
    vectors = collusion_medoid_attack(view, f, a->magnitude, a->direction);
  } else if (const auto* a = std::get_if<attacks::SignFlip>(&spec)) {
    vectors = sign_flip_attack(view, f, a->kappa);
  } else if (const auto* a = std::get_if<attacks::GaussianNoise>(&spec)) {
    vectors = gaussian_noise_attack(view, f, a->center, a->spread, stream);
  } else {
    return out;  // silence
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::move(vectors[i]);
  return out;
}

}  // namespace krum
