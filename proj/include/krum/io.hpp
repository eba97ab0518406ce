#pragma once

// JSON configuration parsing, command-line overrides, CSV trace emission and
// JSON/CSV resilience reports.
//
// Configuration documents are strict: unknown keys are rejected and every
// error names the offending key.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <initializer_list>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "krum/adversary.hpp"
#include "krum/aggregation.hpp"
#include "krum/errors.hpp"
#include "krum/problems.hpp"
#include "krum/resilience.hpp"
#include "krum/simulator.hpp"

namespace krum::io {

using nlohmann::json;

namespace detail {

inline std::string join_key(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

inline void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected a JSON object");
}

inline void reject_unknown(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw ConfigError(join_key(path, key) + ": unknown key");
  }
}

inline const json& require_key(const json& obj, const std::string& path, const std::string& key) {
  if (!obj.contains(key)) throw ConfigError(join_key(path, key) + ": required key missing");
  return obj.at(key);
}

inline double as_real(const json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError(key + ": expected a number");
  return j.get<double>();
}

inline std::int64_t as_int(const json& j, const std::string& key) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (std::floor(v) == v && std::abs(v) < 9.0e15) return static_cast<std::int64_t>(v);
  }
  throw ConfigError(key + ": expected an integer");
}

inline std::uint64_t as_uint(const json& j, const std::string& key) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  const auto v = as_int(j, key);
  if (v < 0) throw ConfigError(key + ": expected a non-negative integer");
  return static_cast<std::uint64_t>(v);
}

inline std::string as_string(const json& j, const std::string& key) {
  if (!j.is_string()) throw ConfigError(key + ": expected a string");
  return j.get<std::string>();
}

inline Vector as_vector(const json& j, const std::string& key) {
  if (!j.is_array()) throw ConfigError(key + ": expected an array of numbers");
  Vector v;
  v.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(as_real(j[i], key + "[" + std::to_string(i) + "]"));
  return v;
}

// Runs a validator, prefixing any failure with the key it concerns.
inline void with_key(const std::string& key, const std::function<void()>& check) {
  try {
    check();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

inline json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
}

inline Rule parse_rule(const json& j) {
  const std::string path = "rule";
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "average") return rules::Average{};
    if (name == "medoid") return rules::Medoid{};
    if (name == "krum") return rules::Krum{};
    if (name == "multi_krum") throw ConfigError("rule: multi_krum needs an object with key \"m\"");
    if (name == "linear") throw ConfigError("rule: linear needs an object with key \"weights\"");
    throw ConfigError("rule: unknown rule \"" + name + "\"");
  }
  require_object(j, path);
  const auto variant = as_string(require_key(j, path, "variant"), "rule.variant");
  if (variant == "average" || variant == "medoid" || variant == "krum") {
    reject_unknown(j, path, {"variant"});
    return parse_rule(json(variant));
  }
  if (variant == "multi_krum") {
    reject_unknown(j, path, {"variant", "m"});
    return rules::MultiKrum{static_cast<int>(as_int(require_key(j, path, "m"), "rule.m"))};
  }
  if (variant == "linear") {
    reject_unknown(j, path, {"variant", "weights"});
    return rules::Linear{as_vector(require_key(j, path, "weights"), "rule.weights")};
  }
  throw ConfigError("rule.variant: unknown rule \"" + variant + "\"");
}

inline CostFunction parse_cost(const json& j) {
  const std::string path = "cost";
  require_object(j, path);
  const auto variant = as_string(require_key(j, path, "variant"), "cost.variant");
  if (variant == "quadratic") {
    reject_unknown(j, path, {"variant", "d", "x_star"});
    costs::Quadratic q;
    if (j.contains("x_star")) q.x_star = as_vector(j.at("x_star"), "cost.x_star");
    if (j.contains("d")) {
      const auto d = as_int(j.at("d"), "cost.d");
      if (d < 1) throw ConfigError("cost.d: must be >= 1");
      if (q.x_star.empty()) q.x_star = zeros(static_cast<std::size_t>(d));
      if (q.x_star.size() != static_cast<std::size_t>(d))
        throw ConfigError("cost.x_star: length " + std::to_string(q.x_star.size()) + " does not match cost.d=" +
                          std::to_string(d));
    }
    if (q.x_star.empty()) throw ConfigError("cost: quadratic needs \"d\" or \"x_star\"");
    return q;
  }
  if (variant == "least_squares") {
    reject_unknown(j, path, {"variant", "design", "targets"});
    costs::LeastSquares ls;
    const auto& design = require_key(j, path, "design");
    if (!design.is_array() || design.empty()) throw ConfigError("cost.design: expected a non-empty array of rows");
    for (std::size_t r = 0; r < design.size(); ++r)
      ls.design.push_back(as_vector(design[r], "cost.design[" + std::to_string(r) + "]"));
    ls.targets = as_vector(require_key(j, path, "targets"), "cost.targets");
    return ls;
  }
  if (variant == "cosine_bowl") {
    reject_unknown(j, path, {"variant", "d", "lambda"});
    costs::CosineBowl cb;
    const auto d = as_int(require_key(j, path, "d"), "cost.d");
    if (d < 1) throw ConfigError("cost.d: must be >= 1");
    cb.d = static_cast<std::size_t>(d);
    if (j.contains("lambda")) cb.lambda = as_real(j.at("lambda"), "cost.lambda");
    return cb;
  }
  throw ConfigError("cost.variant: unknown cost \"" + variant + "\"");
}

inline Estimator parse_estimator(const json& j) {
  const std::string path = "estimator";
  require_object(j, path);
  const auto variant = as_string(require_key(j, path, "variant"), "estimator.variant");
  if (variant == "gaussian") {
    reject_unknown(j, path, {"variant", "sigma"});
    return estimators::Gaussian{as_real(require_key(j, path, "sigma"), "estimator.sigma")};
  }
  if (variant == "minibatch") {
    reject_unknown(j, path, {"variant", "batch_size"});
    const auto b = as_int(require_key(j, path, "batch_size"), "estimator.batch_size");
    if (b < 1) throw ConfigError("estimator.batch_size: must be >= 1");
    return estimators::Minibatch{static_cast<std::size_t>(b)};
  }
  throw ConfigError("estimator.variant: unknown estimator \"" + variant + "\"");
}

// `d` fills in defaults (collusion direction e_1).
inline AttackSpec parse_attack(const json& j, std::size_t d) {
  const std::string path = "attack";
  require_object(j, path);
  const auto variant = as_string(require_key(j, path, "variant"), "attack.variant");
  if (variant == "omniscient_linear") {
    reject_unknown(j, path, {"variant", "target"});
    return attacks::OmniscientLinear{as_vector(require_key(j, path, "target"), "attack.target")};
  }
  if (variant == "collusion_medoid") {
    reject_unknown(j, path, {"variant", "magnitude", "direction"});
    attacks::CollusionMedoid a;
    a.magnitude = as_real(require_key(j, path, "magnitude"), "attack.magnitude");
    a.direction = j.contains("direction") ? as_vector(j.at("direction"), "attack.direction") : unit_vector(d, 0);
    return a;
  }
  if (variant == "sign_flip") {
    reject_unknown(j, path, {"variant", "kappa"});
    return attacks::SignFlip{as_real(require_key(j, path, "kappa"), "attack.kappa")};
  }
  if (variant == "gaussian_noise") {
    reject_unknown(j, path, {"variant", "center", "spread"});
    attacks::GaussianNoise a;
    if (j.contains("center")) a.center = as_vector(j.at("center"), "attack.center");
    a.spread = as_real(require_key(j, path, "spread"), "attack.spread");
    return a;
  }
  if (variant == "silence") {
    reject_unknown(j, path, {"variant"});
    return attacks::Silence{};
  }
  throw ConfigError("attack.variant: unknown attack \"" + variant + "\"");
}

inline Schedule parse_schedule(const json& j) {
  require_object(j, "schedule");
  reject_unknown(j, "schedule", {"gamma0", "p", "constant"});
  Schedule s;
  s.gamma0 = as_real(require_key(j, "schedule", "gamma0"), "schedule.gamma0");
  if (j.contains("p")) s.p = as_real(j.at("p"), "schedule.p");
  if (j.contains("constant")) {
    if (!j.at("constant").is_boolean()) throw ConfigError("schedule.constant: expected a boolean");
    s.constant = j.at("constant").get<bool>();
  }
  return s;
}

inline std::vector<int> parse_ids(const json& j, const std::string& key) {
  if (!j.is_array()) throw ConfigError(key + ": expected an array of integers");
  std::vector<int> ids;
  for (std::size_t i = 0; i < j.size(); ++i)
    ids.push_back(static_cast<int>(as_int(j[i], key + "[" + std::to_string(i) + "]")));
  return ids;
}

inline void parse_workers(const json& doc, int& n, int& f) {
  const auto nv = as_int(require_key(doc, "", "n"), "n");
  const auto fv = as_int(require_key(doc, "", "f"), "f");
  if (nv < 1 || nv > 1000000) throw ConfigError("n: must be a positive integer");
  if (fv < 0 || fv >= nv)
    throw ConfigError("f: must satisfy 0 <= f < n: got n=" + std::to_string(nv) + ", f=" + std::to_string(fv));
  n = static_cast<int>(nv);
  f = static_cast<int>(fv);
}

}  // namespace detail

/// Parses and fully validates an experiment configuration document.
inline ExperimentConfig parse_config(std::string_view text) {
  using namespace detail;
  const json doc = parse_json(text);
  require_object(doc, "config");
  reject_unknown(doc, "", {"n", "f", "rule", "cost", "estimator", "attack", "schedule", "rounds", "x0", "seed",
                           "byzantine_ids", "threads"});
  ExperimentConfig cfg;
  parse_workers(doc, cfg.n, cfg.f);
  cfg.rule = parse_rule(require_key(doc, "", "rule"));
  cfg.cost = parse_cost(require_key(doc, "", "cost"));
  cfg.estimator = parse_estimator(require_key(doc, "", "estimator"));
  const std::size_t d = dimension(cfg.cost);
  if (doc.contains("attack"))
    cfg.attack = parse_attack(doc.at("attack"), d);
  else if (cfg.f > 0)
    throw ConfigError("attack: required when f > 0");
  cfg.schedule = parse_schedule(require_key(doc, "", "schedule"));
  const auto rounds = as_int(require_key(doc, "", "rounds"), "rounds");
  if (rounds < 0) throw ConfigError("rounds: must be non-negative");
  cfg.rounds = static_cast<std::size_t>(rounds);
  if (doc.contains("x0")) cfg.x0 = as_vector(doc.at("x0"), "x0");
  cfg.seed = as_uint(require_key(doc, "", "seed"), "seed");
  if (doc.contains("byzantine_ids")) cfg.byzantine_ids = parse_ids(doc.at("byzantine_ids"), "byzantine_ids");
  if (doc.contains("threads")) cfg.threads = static_cast<unsigned>(as_uint(doc.at("threads"), "threads"));

  with_key("rule", [&] { validate_rule(cfg.rule, cfg.n, cfg.f); });
  with_key("cost", [&] { validate_cost(cfg.cost); });
  with_key("estimator", [&] { validate_estimator(cfg.cost, cfg.estimator); });
  with_key("schedule", [&] { cfg.schedule.validate(); });
  with_key("attack", [&] { validate_attack(cfg.attack, cfg.f, d); });
  with_key("config", [&] { validate(cfg); });
  return cfg;
}

/// Resilience-check document:
///   {rule, n, f, g: [...] | {d, grad_norm} (g = grad_norm * e_1), sigma,
///    attack, trials, seed, threads?, moment_ceiling?, byzantine_ids?}
inline ResilienceSetup parse_resilience_config(std::string_view text) {
  using namespace detail;
  const json doc = parse_json(text);
  require_object(doc, "config");
  reject_unknown(doc, "", {"n", "f", "rule", "g", "d", "grad_norm", "sigma", "attack", "trials", "seed", "threads",
                           "moment_ceiling", "byzantine_ids"});
  ResilienceSetup s;
  parse_workers(doc, s.n, s.f);
  s.rule = parse_rule(require_key(doc, "", "rule"));
  if (doc.contains("g")) {
    if (doc.contains("d") || doc.contains("grad_norm")) throw ConfigError("g: give either g or (d, grad_norm), not both");
    s.g = as_vector(doc.at("g"), "g");
  } else {
    const auto d = as_int(require_key(doc, "", "d"), "d");
    if (d < 1) throw ConfigError("d: must be >= 1");
    s.g = scaled(unit_vector(static_cast<std::size_t>(d), 0), as_real(require_key(doc, "", "grad_norm"), "grad_norm"));
  }
  s.sigma = as_real(require_key(doc, "", "sigma"), "sigma");
  if (doc.contains("attack"))
    s.attack = parse_attack(doc.at("attack"), s.g.size());
  else if (s.f > 0)
    throw ConfigError("attack: required when f > 0");
  const auto trials = as_int(require_key(doc, "", "trials"), "trials");
  if (trials < 2) throw ConfigError("trials: must be >= 2");
  s.trials = static_cast<std::size_t>(trials);
  s.seed = as_uint(require_key(doc, "", "seed"), "seed");
  if (doc.contains("threads")) s.threads = static_cast<unsigned>(as_uint(doc.at("threads"), "threads"));
  if (doc.contains("moment_ceiling")) s.moment_ceiling = as_real(doc.at("moment_ceiling"), "moment_ceiling");
  if (doc.contains("byzantine_ids")) s.byzantine_ids = parse_ids(doc.at("byzantine_ids"), "byzantine_ids");

  with_key("rule", [&] { validate_rule(s.rule, s.n, s.f); });
  with_key("attack", [&] { validate_attack(s.attack, s.f, s.g.size()); });
  if (!(s.sigma >= 0.0)) throw ConfigError("sigma: must be >= 0");
  return s;
}

/// Applies "a.b.c=value" onto `doc`. The value is parsed as JSON when
/// possible, otherwise taken as a string. Array elements are addressed by
/// numeric path segments.
inline void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("override \"" + std::string(assignment) + "\": expected key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }

  json* node = &doc;
  std::stringstream segments(key);
  std::string segment;
  std::vector<std::string> parts;
  while (std::getline(segments, segment, '.')) parts.push_back(segment);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const bool last = i + 1 == parts.size();
    const auto& part = parts[i];
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(part);
      } catch (const std::exception&) {
        throw ConfigError("override " + key + ": \"" + part + "\" is not an array index");
      }
      if (idx >= node->size()) throw ConfigError("override " + key + ": index out of range");
      node = &(*node)[idx];
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object()) throw ConfigError("override " + key + ": \"" + part + "\" addresses a scalar");
      node = &(*node)[part];
    }
    if (last) *node = value;
  }
}

/// Shortest text that round-trips a binary64 value: 17 significant digits.
inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline constexpr std::string_view kTraceHeader = "t,cost,grad_norm,gamma,selected_ids,byzantine_selected,agg_to_grad_dist,x_norm";

inline std::string emit_trace_csv(const ExperimentTrace& trace) {
  std::string out(kTraceHeader);
  out += '\n';
  for (const auto& r : trace.records) {
    out += std::to_string(r.t);
    out += ',' + format_real(r.cost);
    out += ',' + format_real(r.grad_norm);
    out += ',' + format_real(r.gamma);
    out += ',';
    for (std::size_t i = 0; i < r.selected_ids.size(); ++i) {
      if (i) out += ';';
      out += std::to_string(r.selected_ids[i]);
    }
    out += r.byzantine_selected ? ",true" : ",false";
    out += ',' + format_real(r.agg_to_grad_dist);
    out += ',' + format_real(r.x_norm);
    out += '\n';
  }
  return out;
}

inline json report_to_json(const ResilienceSetup& setup, const ResilienceReport& r) {
  json j;
  j["rule"] = rule_name(setup.rule);
  j["attack"] = setup.f > 0 ? attack_name(setup.attack) : "none";
  j["n"] = setup.n;
  j["f"] = setup.f;
  j["d"] = setup.g.size();
  j["sigma"] = setup.sigma;
  j["grad_norm"] = norm(setup.g);
  j["seed"] = setup.seed;
  j["trials"] = r.trials;
  j["empirical_mean_F"] = r.empirical_mean_F;
  j["mean_F_standard_error"] = r.mean_F_standard_error;
  j["sin_alpha"] = r.sin_alpha;
  j["within_guarantee"] = r.within_guarantee;
  j["inner_product"] = r.inner_product;
  j["inner_product_se"] = r.inner_product_se;
  j["bound_i"] = r.bound_i;
  j["condition_i_holds"] = r.condition_i_holds;
  j["mean_sq_dev"] = r.mean_sq_dev;
  j["mean_sq_dev_se"] = r.mean_sq_dev_se;
  j["bias_sq"] = r.bias_sq;
  j["dev_bound"] = r.dev_bound;
  j["deviation_bound_holds"] = r.deviation_bound_holds;
  for (std::size_t i = 0; i < ResilienceReport::orders.size(); ++i) {
    const auto suffix = std::to_string(ResilienceReport::orders[i]);
    j["moment_" + suffix] = r.moments[i];
    j["moment_" + suffix + "_se"] = r.moment_se[i];
    j["moment_reference_" + suffix] = r.moment_reference[i];
  }
  j["condition_ii_holds"] = r.condition_ii_holds;
  j["byzantine_selection_rate"] = r.byzantine_selection_rate;
  j["note"] = "Monte Carlo estimates of expectations; holds-flags use a slack of " + format_real(setup.slack_se) +
              " standard errors";
  return j;
}

inline constexpr std::string_view kReportHeader =
    "rule,attack,n,f,d,sigma,trials,inner_product,inner_product_se,bound_i,condition_i_holds,mean_sq_dev,"
    "mean_sq_dev_se,bias_sq,dev_bound,deviation_bound_holds,moment_2,moment_3,moment_4,condition_ii_holds,"
    "byzantine_selection_rate";

inline std::string report_csv_row(const ResilienceSetup& setup, const ResilienceReport& r) {
  std::string row = rule_name(setup.rule) + ',' + (setup.f > 0 ? attack_name(setup.attack) : "none");
  row += ',' + std::to_string(setup.n) + ',' + std::to_string(setup.f) + ',' + std::to_string(setup.g.size());
  row += ',' + format_real(setup.sigma) + ',' + std::to_string(r.trials);
  row += ',' + format_real(r.inner_product) + ',' + format_real(r.inner_product_se) + ',' + format_real(r.bound_i);
  row += r.condition_i_holds ? ",true" : ",false";
  row += ',' + format_real(r.mean_sq_dev) + ',' + format_real(r.mean_sq_dev_se) + ',' + format_real(r.bias_sq) + ',' +
         format_real(r.dev_bound);
  row += r.deviation_bound_holds ? ",true" : ",false";
  for (double m : r.moments) row += ',' + format_real(m);
  row += r.condition_ii_holds ? ",true" : ",false";
  row += ',' + format_real(r.byzantine_selection_rate);
  return row;
}

}  // namespace krum::io
