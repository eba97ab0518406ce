#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "krum/io.hpp"

namespace krum {
namespace {

using io::json;

const char* kMinimal = R"({"n": 11, "f": 2, "rule": "krum",
  "cost": {"variant": "quadratic", "d": 10, "x_star": [0,0,0,0,0,0,0,0,0,0]},
  "estimator": {"variant": "gaussian", "sigma": 0.5},
  "attack": {"variant": "sign_flip", "kappa": 10},
  "schedule": {"gamma0": 0.5, "p": 1.0}, "rounds": 3000, "seed": 42})";

std::string with(const std::vector<std::string>& overrides) {
  json doc = io::detail::parse_json(kMinimal);
  for (const auto& o : overrides) io::apply_override(doc, o);
  return doc.dump();
}

std::string error_of(const std::string& text) {
  try {
    io::parse_config(text);
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

TEST(ParseConfig, MinimalDocument) {
  const auto cfg = io::parse_config(kMinimal);
  EXPECT_EQ(cfg.n, 11);
  EXPECT_EQ(cfg.f, 2);
  EXPECT_TRUE(std::holds_alternative<rules::Krum>(cfg.rule));
  EXPECT_EQ(cfg.dimension(), 10u);
  EXPECT_EQ(std::get<estimators::Gaussian>(cfg.estimator).sigma, 0.5);
  EXPECT_EQ(std::get<attacks::SignFlip>(cfg.attack).kappa, 10.0);
  EXPECT_EQ(cfg.schedule.gamma0, 0.5);
  EXPECT_EQ(cfg.rounds, 3000u);
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.resolved_byzantine_ids(), (std::vector<int>{10, 11}));
}

TEST(ParseConfig, RuleForms) {
  EXPECT_EQ(std::get<rules::MultiKrum>(io::parse_config(with({R"(rule={"variant":"multi_krum","m":3})"})).rule).m, 3);
  EXPECT_TRUE(std::holds_alternative<rules::Medoid>(io::parse_config(with({"rule=medoid"})).rule));
  const auto lin = io::parse_config(with({R"(rule={"variant":"linear","weights":[1,1,1,1,1,1,1,1,1,1,2]})"}));
  EXPECT_EQ(std::get<rules::Linear>(lin.rule).weights.back(), 2.0);
}

TEST(ParseConfig, RejectsKrumPrecondition) {
  const auto msg = error_of(with({"n=6"}));
  EXPECT_NE(msg.find("krum requires 2f+2 < n: got n=6, f=2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("rule"), std::string::npos) << msg;
}

TEST(ParseConfig, RejectsDivergentSchedule) {
  const auto msg = error_of(with({"schedule.p=0.5"}));
  EXPECT_NE(msg.find("∑γ_t² < ∞"), std::string::npos) << msg;
  EXPECT_NE(msg.find("schedule"), std::string::npos) << msg;
}

TEST(ParseConfig, RejectsUnknownKeysAndMalformedInput) {
  EXPECT_NE(error_of(with({"sed=1"})).find("sed: unknown key"), std::string::npos);
  EXPECT_NE(error_of(with({"cost.xstar=[1]"})).find("cost.xstar: unknown key"), std::string::npos);
  EXPECT_NE(error_of("{\"n\": 3,").find("malformed JSON"), std::string::npos);
  EXPECT_NE(error_of("[1, 2]").find("expected a JSON object"), std::string::npos);
  EXPECT_NE(error_of(with({"rule=trimmed_mean"})).find("unknown rule"), std::string::npos);
  EXPECT_NE(error_of(with({"cost.x_star=[0,0]"})).find("cost.x_star"), std::string::npos);
  EXPECT_NE(error_of(with({"f=11"})).find("0 <= f < n"), std::string::npos);
  EXPECT_THROW(io::parse_config(with({R"(estimator={"variant":"minibatch","batch_size":4})"})), ConfigError);
  EXPECT_THROW(io::parse_config(with({R"(attack={"variant":"collusion_medoid","magnitude":5,"direction":[1,1,0,0,0,0,0,0,0,0]})"})), ConfigError);
}

TEST(ParseConfig, AttackRequiredOnlyWithByzantineWorkers) {
  json doc = io::detail::parse_json(kMinimal);
  doc.erase("attack");
  EXPECT_THROW(io::parse_config(doc.dump()), ConfigError);
  doc["f"] = 0;
  EXPECT_NO_THROW(io::parse_config(doc.dump()));
}

TEST(ApplyOverride, PathsAndValues) {
  json doc = io::detail::parse_json(kMinimal);
  io::apply_override(doc, "schedule.gamma0=0.25");
  io::apply_override(doc, "cost.x_star.3=7");
  io::apply_override(doc, "rule=medoid");
  io::apply_override(doc, "attack={\"variant\":\"silence\"}");
  EXPECT_EQ(doc["schedule"]["gamma0"], 0.25);
  EXPECT_EQ(doc["cost"]["x_star"][3], 7);
  EXPECT_EQ(doc["rule"], "medoid");
  EXPECT_EQ(doc["attack"]["variant"], "silence");
  EXPECT_THROW(io::apply_override(doc, "noequals"), ConfigError);
  EXPECT_THROW(io::apply_override(doc, "cost.x_star.99=1"), ConfigError);
  EXPECT_THROW(io::apply_override(doc, "n.x=1"), ConfigError);
}

TEST(ParseResilienceConfig, GradientForms) {
  const auto s = io::parse_resilience_config(
      R"({"rule": "krum", "n": 9, "f": 2, "d": 5, "grad_norm": 20, "sigma": 1,
          "attack": {"variant": "sign_flip", "kappa": 1}, "trials": 100, "seed": 3})");
  EXPECT_EQ(s.g, (Vector{20.0, 0.0, 0.0, 0.0, 0.0}));
  EXPECT_EQ(s.trials, 100u);
  EXPECT_THROW(io::parse_resilience_config(R"({"rule": "krum", "n": 9, "f": 2, "g": [1], "d": 1, "grad_norm": 1,
      "sigma": 1, "attack": {"variant": "silence"}, "trials": 100, "seed": 3})"),
               ConfigError);
  EXPECT_THROW(io::parse_resilience_config(R"({"rule": "krum", "n": 9, "f": 2, "g": [1], "sigma": 1,
      "attack": {"variant": "silence"}, "trials": 100, "seed": 3, "extra": 1})"),
               ConfigError);
}

TEST(TraceCsv, EmptyTraceIsHeaderOnly) {
  ExperimentTrace trace;
  EXPECT_EQ(io::emit_trace_csv(trace), std::string(io::kTraceHeader) + "\n");
  EXPECT_EQ(io::kTraceHeader, "t,cost,grad_norm,gamma,selected_ids,byzantine_selected,agg_to_grad_dist,x_norm");
}

TEST(TraceCsv, OneRoundInDeclaredOrder) {
  ExperimentTrace trace;
  RoundRecord r;
  r.t = 0;
  r.cost = 0.5;
  r.grad_norm = 1.0;
  r.gamma = 0.25;
  r.selected_ids = {3, 7};
  r.byzantine_selected = true;
  r.agg_to_grad_dist = 2.0;
  r.x_norm = 4.0;
  trace.records.push_back(r);
  EXPECT_EQ(io::emit_trace_csv(trace), std::string(io::kTraceHeader) + "\n0,0.5,1,0.25,3;7,true,2,4\n");
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

TEST(TraceCsv, ParseBackIsBitExact) {
  auto cfg = io::parse_config(with({"rounds=60", R"(rule={"variant":"multi_krum","m":2})"}));
  const auto trace = run_experiment(cfg);
  const std::string csv = io::emit_trace_csv(trace);
  EXPECT_EQ(csv.find('\r'), std::string::npos);
  std::stringstream in(csv);
  std::string line;
  std::getline(in, line);
  ASSERT_EQ(line, io::kTraceHeader);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    const auto cells = split(line, ',');
    ASSERT_EQ(cells.size(), 8u) << line;
    const auto& r = trace.records.at(row++);
    EXPECT_EQ(std::stoull(cells[0]), r.t);
    EXPECT_EQ(std::strtod(cells[1].c_str(), nullptr), r.cost);
    EXPECT_EQ(std::strtod(cells[2].c_str(), nullptr), r.grad_norm);
    EXPECT_EQ(std::strtod(cells[3].c_str(), nullptr), r.gamma);
    std::vector<int> ids;
    for (const auto& id : split(cells[4], ';')) ids.push_back(std::stoi(id));
    EXPECT_EQ(ids, r.selected_ids);
    EXPECT_EQ(cells[5] == "true", r.byzantine_selected);
    EXPECT_EQ(std::strtod(cells[6].c_str(), nullptr), r.agg_to_grad_dist);
    EXPECT_EQ(std::strtod(cells[7].c_str(), nullptr), r.x_norm);
  }
  EXPECT_EQ(row, trace.records.size());
}

TEST(FormatReal, RoundTripsAndSpecials) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5}) EXPECT_EQ(std::strtod(io::format_real(v).c_str(), nullptr), v);
  EXPECT_EQ(io::format_real(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(io::format_real(-std::numeric_limits<double>::infinity()), "-inf");
}

TEST(Report, JsonAndCsvShapes) {
  ResilienceSetup s;
  s.n = 7;
  s.f = 2;
  s.g = {8.0, 0.0};
  s.attack = attacks::SignFlip{1.0};
  s.trials = 200;
  const auto rep = estimate_resilience(s);
  const json j = io::report_to_json(s, rep);
  EXPECT_EQ(j["rule"], "krum");
  EXPECT_EQ(j["attack"], "sign_flip");
  EXPECT_EQ(j["condition_i_holds"], rep.condition_i_holds);
  EXPECT_TRUE(j.contains("moment_reference_4"));
  const auto header = split(std::string(io::kReportHeader), ',');
  EXPECT_EQ(split(io::report_csv_row(s, rep), ',').size(), header.size());
}

}  // namespace
}  // namespace krum
