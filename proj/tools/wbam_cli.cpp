// Command-line front end: plan, simulate, bench, metrics.

#include <filesystem>
#include <future>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "wbam/io.hpp"
#include "wbam/pipeline.hpp"

namespace {

using namespace wbam;

struct Options {
  std::vector<std::string> scenarios;
  std::string mode = "sq";
  std::string out;
  std::uint64_t seed = 0;
  double dt = 0.0;
  int ns = 0;
  bool no_sim = false;
};

Scenario load(const std::string& path, const Options& o) {
  Scenario s = load_scenario(path);
  if (o.dt > 0.0) s.sim_dt = o.dt;
  if (o.ns > 0) s.planner.n_steps = o.ns;
  if (o.dt != 0.0 || o.ns != 0) {
    if (o.dt < 0.0) throw DomainError("--dt must be positive");
    if (o.ns < 0) throw DomainError("--ns must be positive");
    s.validate();
  }
  return s;
}

std::string summary(const std::string& name, const std::string& mode, const MetricsReport& r) {
  std::string line = name + " " + mode + " plan_time=" + fmt(r.plan_time) + " min_distance=" + fmt(r.min_distance) +
                     " arc_length=" + fmt(r.arc_length) + " jerkiness=" + fmt(r.jerkiness);
  if (r.simulated) {
    line += " h_co_min=" + fmt(r.h_co_min) + " thrust=[" + fmt(r.thrust_min) + "," + fmt(r.thrust_max) +
            "] infeasible=" + std::to_string(r.infeasible_ticks) + "/" + std::to_string(r.total_ticks);
  }
  return line;
}

int run_single(const Options& o, bool with_sim) {
  if (o.scenarios.size() != 1) throw DomainError("exactly one --scenario is required");
  const Scenario s = load(o.scenarios[0], o);
  const PipelineResult r = run_pipeline(s, parse_mode(o.mode), with_sim, o.seed);
  if (!o.out.empty()) emit(r, o.out);
  std::cout << metrics_json(r.report);
  return 0;
}

int run_bench(const Options& o) {
  if (o.scenarios.empty()) throw DomainError("at least one --scenario is required");
  std::vector<Scenario> all;
  for (const std::string& p : o.scenarios) all.push_back(load(p, o));
  const std::vector<ObstacleMode> modes = {ObstacleMode::kSq, ObstacleMode::kEllipse};

  // One worker per scenario/mode pair; results are printed in name order.
  std::map<std::pair<std::string, int>, std::future<PipelineResult>> jobs;
  for (std::size_t k = 0; k < all.size(); ++k) {
    for (ObstacleMode m : modes) {
      const auto key = std::make_pair(all[k].name + "#" + std::to_string(k), static_cast<int>(m));
      jobs[key] = std::async(std::launch::async, [&, k, m] { return run_pipeline(all[k], m, !o.no_sim, o.seed); });
    }
  }
  for (auto& [key, job] : jobs) {
    const PipelineResult r = job.get();
    const std::string name = key.first.substr(0, key.first.rfind('#'));
    const ObstacleMode m = static_cast<ObstacleMode>(key.second);
    if (!o.out.empty()) emit(r, (std::filesystem::path(o.out) / name / mode_name(m)).string());
    std::cout << summary(name, mode_name(m), r.report) << '\n';
  }
  return 0;
}

int run_metrics(const Options& o) {
  if (o.out.empty()) throw DomainError("--out must name a directory with emitted results");
  const std::filesystem::path dir(o.out);
  MetricsReport r;
  if (std::filesystem::exists(dir / "metrics.json")) r.plan_time = load_metrics((dir / "metrics.json").string()).plan_time;
  path_metrics(read_trajectory_csv((dir / "trajectory.csv").string()), r);
  if (std::filesystem::exists(dir / "telemetry.csv")) {
    telemetry_metrics(read_telemetry_csv((dir / "telemetry.csv").string()), r);
  }
  std::cout << metrics_json(r);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Whole-body planning and safety control for a planar aerial manipulator"};
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* sub, bool sim) {
    sub->add_option("--scenario", o.scenarios, "Scenario file");
    sub->add_option("--mode", o.mode, "Obstacle model for planning")->check(CLI::IsMember({"sq", "ellipse"}));
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--ns", o.ns, "Planner integration steps");
    if (sim) {
      sub->add_option("--seed", o.seed, "Wind phase seed");
      sub->add_option("--dt", o.dt, "Plant integration step [s]");
    }
  };
  CLI::App* plan_cmd = app.add_subcommand("plan", "Global path and equilibrium-manifold trajectory");
  common(plan_cmd, false);
  CLI::App* sim_cmd = app.add_subcommand("simulate", "Plan, then fly the closed loop under wind");
  common(sim_cmd, true);
  CLI::App* bench_cmd = app.add_subcommand("bench", "Both obstacle modes on every scenario");
  common(bench_cmd, true);
  bench_cmd->add_flag("--no-sim", o.no_sim, "Skip the closed-loop simulation");
  CLI::App* metrics_cmd = app.add_subcommand("metrics", "Recompute metrics from emitted files");
  metrics_cmd->add_option("--out", o.out, "Directory with emitted results")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (plan_cmd->parsed()) return run_single(o, false);
    if (sim_cmd->parsed()) return run_single(o, true);
    if (bench_cmd->parsed()) return run_bench(o);
    return run_metrics(o);
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 3;
  }
}
