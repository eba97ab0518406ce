// Command-line front end: simulate, resilience, eta, attack-demo.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "krum/adversary.hpp"
#include "krum/aggregation.hpp"
#include "krum/io.hpp"
#include "krum/resilience.hpp"
#include "krum/simulator.hpp"

namespace {

using krum::io::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw krum::ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file " + path);
  out << text;
}

// Config text with --set and --seed overrides applied.
std::string load_config(const std::string& path, const std::vector<std::string>& overrides,
                        const std::optional<std::uint64_t>& seed) {
  json doc = krum::io::detail::parse_json(read_file(path));
  for (const auto& o : overrides) krum::io::apply_override(doc, o);
  if (seed) doc["seed"] = *seed;
  return doc.dump();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

int attack_demo(const std::string& scenario) {
  using namespace krum;
  if (scenario == "lemma1") {
    const std::vector<double> weights{1.0 / 3, 1.0 / 3, 1.0 / 3};
    AdversaryView view;
    view.n = 3;
    view.correct = {{1, {1.0, 0.0}}, {2, {0.0, 1.0}}};
    const Vector target{5.0, 5.0};
    const Vector b = omniscient_linear_attack(view, weights, 3, target);
    const auto input = AggregationInput::from_vectors({{1.0, 0.0}, {0.0, 1.0}, b});
    const Vector avg = average(input);
    std::cout << "honest proposals: (1, 0), (0, 1)\n";
    std::cout << "target U: (5, 5)\n";
    std::cout << "crafted byzantine vector: (" << fmt(b[0]) << ", " << fmt(b[1]) << ")\n";
    std::cout << "average of all proposals: (" << fmt(avg[0]) << ", " << fmt(avg[1]) << ")\n";
    const bool equal = std::sqrt(sq_distance(avg, target)) <= 1e-9 * norm(target);
    std::cout << "average == target: " << (equal ? "true" : "false") << "\n";
    return equal ? 0 : 1;
  }
  if (scenario == "figure3") {
    const int n = 9, f = 2;
    const std::size_t d = 5;
    AdversaryView view;
    view.n = n;
    for (int id = 1; id <= n - f; ++id) view.correct.push_back({id, zeros(d)});
    const auto byz = collusion_medoid_attack(view, f, 70.0, unit_vector(d, 0));
    std::vector<WorkerVector> entries = view.correct;
    for (int i = 0; i < f; ++i) entries.push_back({n - f + 1 + i, byz[static_cast<std::size_t>(i)]});
    const AggregationInput input(entries, f);
    const auto medoid = sq_dist_medoid_select(input);
    const auto kr = krum_select(input);
    const bool medoid_byz = medoid.selected_ids[0] > n - f;
    const bool krum_byz = kr.selected_ids[0] > n - f;
    std::cout << "7 correct workers at the origin, remote byzantine at (70, 0, ...), barycenter byzantine at ("
              << fmt(byz[1][0]) << ", 0, ...)\n";
    std::cout << "medoid selects worker " << medoid.selected_ids[0] << ", krum selects worker " << kr.selected_ids[0]
              << "\n";
    std::cout << "medoid selected byzantine: " << (medoid_byz ? "true" : "false")
              << ", krum selected byzantine: " << (krum_byz ? "true" : "false") << "\n";
    return 0;
  }
  std::cerr << "unknown scenario \"" << scenario << "\" (expected lemma1 or figure3)\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Byzantine-resilient SGD: Krum aggregation, attacks and simulation"};
  app.require_subcommand(1);

  std::string config_path, out_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;

  auto* simulate = app.add_subcommand("simulate", "Run a parameter-server simulation and write a CSV trace");
  simulate->add_option("--config", config_path, "JSON experiment configuration")->required();
  simulate->add_option("--out", out_path, "CSV output path (default: stdout)");
  simulate->add_option("--set", overrides, "Override a config key, key.path=value (repeatable)");
  simulate->add_option("--seed", seed, "Override the master seed");

  bool csv = false;
  auto* resilience = app.add_subcommand("resilience", "Monte Carlo check of the resilience conditions");
  resilience->add_option("--config", config_path, "JSON resilience configuration")->required();
  resilience->add_option("--out", out_path, "Report output path (default: stdout)");
  resilience->add_option("--set", overrides, "Override a config key, key.path=value (repeatable)");
  resilience->add_option("--seed", seed, "Override the master seed");
  resilience->add_flag("--csv", csv, "Emit a CSV header and row instead of JSON");

  int n = 0, f = 0;
  std::optional<int> d;
  std::optional<double> sigma, grad_norm;
  auto* eta_cmd = app.add_subcommand("eta", "Print eta(n, f) and optionally sin(alpha)");
  eta_cmd->add_option("n", n, "Number of workers")->required();
  eta_cmd->add_option("f", f, "Byzantine bound")->required();
  eta_cmd->add_option("--d", d, "Dimension");
  eta_cmd->add_option("--sigma", sigma, "Estimator standard deviation");
  eta_cmd->add_option("--grad-norm", grad_norm, "Norm of the true gradient");

  std::string scenario;
  auto* demo = app.add_subcommand("attack-demo", "Worked attack instances (lemma1, figure3)");
  demo->add_option("scenario", scenario, "lemma1 or figure3")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      const auto cfg = krum::io::parse_config(load_config(config_path, overrides, seed));
      const auto trace = krum::run_experiment(cfg);
      write_output(out_path, krum::io::emit_trace_csv(trace));
      std::cerr << "rounds: " << trace.records.size() << ", diverged: " << (trace.diverged ? "true" : "false");
      if (trace.diverged_at) std::cerr << " at t=" << *trace.diverged_at;
      std::cerr << "\n";
      return 0;
    }
    if (*resilience) {
      const auto setup = krum::io::parse_resilience_config(load_config(config_path, overrides, seed));
      const auto report = krum::estimate_resilience(setup);
      if (csv)
        write_output(out_path, std::string(krum::io::kReportHeader) + "\n" + krum::io::report_csv_row(setup, report) + "\n");
      else
        write_output(out_path, krum::io::report_to_json(setup, report).dump(2) + "\n");
      return 0;
    }
    if (*eta_cmd) {
      const double value = krum::eta(n, f);
      std::cout << "eta(" << n << ", " << f << ") = " << fmt(value) << "\n";
      if (d || sigma || grad_norm) {
        if (!(d && sigma && grad_norm)) {
          std::cerr << "--d, --sigma and --grad-norm must be given together\n";
          return 2;
        }
        const auto angle = krum::resilience_angle(n, f, *d, *sigma, *grad_norm);
        std::cout << "sin(alpha) = " << fmt(angle.sin_alpha) << "\n";
        if (!angle.within_guarantee)
          std::cout << "warning: eta*sqrt(d)*sigma = " << fmt(angle.deviation_radius)
                    << " >= |g|; the gradient lies in the flat basin, no angle guarantee\n";
      }
      return 0;
    }
    if (*demo) return attack_demo(scenario);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
