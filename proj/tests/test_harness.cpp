#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "wbam/io.hpp"
#include "wbam/pipeline.hpp"

using namespace wbam;
namespace fs = std::filesystem;

namespace {

const std::string kMinimal = R"({
  "version": 1,
  "world": {"min": [-2, -2], "max": [6, 2]},
  "obstacles": [{"a": [0.3, 0.3], "eps": 0.5, "center": [3, 1.2]}],
  "start": {"x": 0, "y": 0, "theta1": 0.3, "theta3": -0.4},
  "goal": [5, 0]
})";

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  if (pos == std::string::npos) throw std::logic_error("fixture text not found: " + from);
  return text.replace(pos, from.size(), to);
}

std::string error_of(const std::string& text) {
  try {
    parse_scenario(text, "doc");
  } catch (const DomainError& e) {
    return e.what();
  }
  return "";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("wbam_harness_" + name);
  fs::remove_all(p);
  return p;
}

// A short mission in the empty scenario keeps the closed-loop tests quick.
Scenario short_empty() {
  Scenario s = load_scenario(std::string(WBAM_SCENARIO_DIR) + "/empty.json");
  s.planner.T_d = 4.0;
  s.settle_time = 0.5;
  s.goal = Vec2(1.6, 0.2);
  return s;
}

std::vector<PathSample> line_samples(const std::function<Vec2(double)>& f, int n) {
  std::vector<PathSample> out;
  for (int k = 0; k < n; ++k) {
    const double s = static_cast<double>(k) / (n - 1);
    out.push_back({s, f(s), 1.0});
  }
  return out;
}

}  // namespace

// -- scenario ------------------------------------------------------------------------

TEST(Scenario, MinimalFileGetsDefaults) {
  const Scenario s = parse_scenario(kMinimal);
  EXPECT_EQ(s.safety.alpha_co, 5.0);
  EXPECT_EQ(s.safety.sigma_co, 1.0);
  EXPECT_EQ(s.safety.T_lo, 1.0);
  EXPECT_EQ(s.safety.T_hi, 15.0);
  EXPECT_EQ(s.gains.a0, Vec6::Ones());
  EXPECT_EQ(s.gains.a1, Vec6::Constant(2.0));
  EXPECT_EQ(s.gains.eps, Vec6::Constant(0.95));
  EXPECT_EQ(s.planner.n_steps, 400);
  EXPECT_EQ(s.planner.h_t, 1.0);
  EXPECT_EQ(s.nominal.mass, 3.5);
  EXPECT_NE(s.plant.model.mass, s.nominal.mass);
  ASSERT_EQ(s.obstacles.size(), 1u);
  EXPECT_EQ(s.obstacles[0].height, 3.0);
}

TEST(Scenario, OverridesApply) {
  const std::string text = replace(kMinimal, R"("goal": [5, 0])",
                                   R"("goal": [5, 0], "controller": {"alpha_co": 3, "T_hi": 14},
                                      "planner": {"n_steps": 50}, "simulation": {"dt": 0.0025})");
  const Scenario s = parse_scenario(text);
  EXPECT_EQ(s.safety.alpha_co, 3.0);
  EXPECT_EQ(s.safety.T_hi, 14.0);
  EXPECT_EQ(s.planner.n_steps, 50);
  EXPECT_EQ(s.sim_dt, 0.0025);
}

TEST(Scenario, MissingWorldIsAnError) {
  const std::string text = replace(kMinimal, R"("world": {"min": [-2, -2], "max": [6, 2]},)", "");
  EXPECT_NE(error_of(text).find("doc.world"), std::string::npos);
}

TEST(Scenario, ErrorsCarryFieldPath) {
  EXPECT_NE(error_of(replace(kMinimal, R"("eps": 0.5)", R"("eps": 1.5)")).find("doc.obstacles[0].eps"),
            std::string::npos);
  EXPECT_NE(error_of(replace(kMinimal, R"("eps": 0.5)", R"("eps": "x")")).find("doc.obstacles[0].eps"),
            std::string::npos);
  EXPECT_NE(error_of(replace(kMinimal, R"("goal": [5, 0])", R"("goal": [5, 0], "colour": 1)")).find("doc.colour"),
            std::string::npos);
  EXPECT_NE(error_of(replace(kMinimal, R"("version": 1)", R"("version": 2)")).find("doc.version"),
            std::string::npos);
  EXPECT_NE(error_of("{ not json").find("doc"), std::string::npos);
}

TEST(Scenario, OverlapNamesPair) {
  const std::string text =
      replace(kMinimal, R"([{"a": [0.3, 0.3], "eps": 0.5, "center": [3, 1.2]}])",
              R"([{"name": "left", "a": [0.3, 0.3], "eps": 0.5, "center": [3, 1.2]},
                  {"name": "right", "a": [0.3, 0.3], "eps": 1.0, "center": [3.4, 1.2]}])");
  const std::string err = error_of(text);
  EXPECT_NE(err.find("'left'"), std::string::npos);
  EXPECT_NE(err.find("'right'"), std::string::npos);
}

TEST(Scenario, ContainmentAndStartClearance) {
  EXPECT_NE(error_of(replace(kMinimal, R"("center": [3, 1.2])", R"("center": [3, 1.9])")).find("world box"),
            std::string::npos);
  EXPECT_NE(error_of(replace(kMinimal, R"("center": [3, 1.2])", R"("center": [0.5, 0.1])")).find("collides"),
            std::string::npos);
  EXPECT_NE(error_of(replace(kMinimal, R"("goal": [5, 0])", R"("goal": [9, 0])")).find("goal"), std::string::npos);
}

TEST(Scenario, ShippedScenariosLoad) {
  for (const char* name : {"tree", "pillar", "empty"}) {
    const Scenario s = load_scenario(std::string(WBAM_SCENARIO_DIR) + "/" + name + ".json");
    EXPECT_EQ(s.name, name);
  }
  EXPECT_GE(load_scenario(std::string(WBAM_SCENARIO_DIR) + "/tree.json").obstacles.size(), 5u);
  EXPECT_THROW(load_scenario("/nonexistent/scenario.json"), DomainError);
}

// -- metrics -------------------------------------------------------------------------

TEST(Metrics, StraightLine) {
  MetricsReport r;
  path_metrics(line_samples([](double s) { return Vec2(2.0 * s, 0.0); }, 50), r);
  EXPECT_NEAR(r.arc_length, 2.0, 1e-12);
  EXPECT_NEAR(r.jerkiness, 0.0, 1e-9);
}

TEST(Metrics, QuarterCircle) {
  MetricsReport r;
  path_metrics(line_samples([](double s) { return Vec2(std::cos(s * M_PI / 2), std::sin(s * M_PI / 2)); }, 400), r);
  EXPECT_NEAR(r.arc_length, M_PI / 2, 1e-3);
  // |p'''| = (pi/2)^3 on the unit circle; mean square over arc length.
  EXPECT_NEAR(r.jerkiness, std::pow(M_PI / 2, 6) / (M_PI / 2), 1e-2);
}

TEST(Metrics, GrazingObstacleGap) {
  // Blade 5 sits on the body y axis at 0.278 with radius 0.115; a circle of
  // radius 0.3 placed 0.05 above it while the vehicle slides along x.
  const VehicleGeometry g;
  const double top = g.rotor_radius + g.blade_radius;
  const std::vector<Superquadric2> obs = {Superquadric2(0.3, 0.3, 1.0, Pose2{0.0, Vec2(0.0, top + 0.05 + 0.3)})};
  std::vector<PathSample> path;
  for (int k = 0; k <= 40; ++k) {
    PlanarConfig z = PlanarConfig::Zero();
    z(0) = -0.4 + 0.02 * k;
    path.push_back({k / 40.0, forward_kinematics_eef(g, z).position, min_vehicle_gap(g, z, obs)});
  }
  MetricsReport r;
  path_metrics(path, r);
  EXPECT_NEAR(r.min_distance, 0.05, 1e-3);
}

TEST(Metrics, TooFewSamples) {
  MetricsReport r;
  EXPECT_THROW(path_metrics(line_samples([](double s) { return Vec2(s, 0); }, 3), r), DomainError);
}

TEST(Metrics, JsonRoundTrip) {
  MetricsReport r;
  r.plan_time = 0.123456789012345678;
  r.min_distance = 0.0644;
  r.arc_length = 11.0 / 3.0;
  r.jerkiness = 1e-7 / 3.0;
  r.simulated = true;
  r.h_co_min = 2.0 / 7.0;
  r.thrust_min = 1.0000000000000002;
  r.thrust_max = 14.999999999999998;
  r.infeasible_ticks = 3;
  r.total_ticks = 6600;
  const MetricsReport b = parse_metrics(metrics_json(r));
  EXPECT_EQ(b.plan_time, r.plan_time);
  EXPECT_EQ(b.min_distance, r.min_distance);
  EXPECT_EQ(b.arc_length, r.arc_length);
  EXPECT_EQ(b.jerkiness, r.jerkiness);
  EXPECT_EQ(b.simulated, r.simulated);
  EXPECT_EQ(b.h_co_min, r.h_co_min);
  EXPECT_EQ(b.thrust_min, r.thrust_min);
  EXPECT_EQ(b.thrust_max, r.thrust_max);
  EXPECT_EQ(b.infeasible_ticks, r.infeasible_ticks);
  EXPECT_EQ(b.total_ticks, r.total_ticks);

  const MetricsReport empty = parse_metrics(metrics_json(MetricsReport{}));
  EXPECT_TRUE(std::isinf(empty.min_distance));
  EXPECT_TRUE(std::isinf(empty.thrust_max) && empty.thrust_max < 0.0);
}

TEST(Format, PrecisionOverride) {
  EXPECT_EQ(fmt(1.0 / 3.0), "0.33333333333333331");
  setenv("WBAM_PRECISION", "5", 1);
  EXPECT_EQ(fmt(1.0 / 3.0), "0.33333");
  setenv("WBAM_PRECISION", "40", 1);
  EXPECT_EQ(output_precision(), 17);
  unsetenv("WBAM_PRECISION");
}

// -- pipeline ------------------------------------------------------------------------

TEST(Pipeline, ModeParsing) {
  EXPECT_EQ(parse_mode("sq"), ObstacleMode::kSq);
  EXPECT_EQ(parse_mode("ellipse"), ObstacleMode::kEllipse);
  EXPECT_THROW(parse_mode("box"), DomainError);
}

TEST(Pipeline, EmptyWorldIsStraight) {
  const Scenario s = load_scenario(std::string(WBAM_SCENARIO_DIR) + "/empty.json");
  const PipelineResult r = run_pipeline(s, ObstacleMode::kSq, false, 0);
  const Vec2 a = r.plan.eef_path.front().eef, b = r.plan.eef_path.back().eef;
  EXPECT_LT((b - s.goal).norm(), 1e-3);
  EXPECT_LE(r.report.arc_length, 1.01 * (b - a).norm());
  EXPECT_GE(r.report.arc_length, (b - a).norm() - 1e-12);
  EXPECT_GT(r.report.plan_time, 0.0);
  EXPECT_FALSE(r.report.simulated);
}

TEST(Pipeline, EllipseModeInflatesPlanningShapes) {
  const Scenario s = parse_scenario(kMinimal);
  const PlanResult a = plan(s, ObstacleMode::kSq), b = plan(s, ObstacleMode::kEllipse);
  EXPECT_EQ(a.planning_shapes[0].eps(), 0.5);
  EXPECT_EQ(b.planning_shapes[0].eps(), 1.0);
  EXPECT_GT(b.planning_shapes[0].a1(), a.planning_shapes[0].a1());
  // Gaps are always measured against the original shape.
  const PlanarConfig z = b.trajectory.samples[10].z;
  EXPECT_EQ(b.eef_path[10].min_gap, min_vehicle_gap(s.planner.vehicle, z, s.shapes()));
}

TEST(Pipeline, StageTagOnFailure) {
  Scenario s = parse_scenario(kMinimal);
  s.planner.relax_max_iter = 0;
  s.start(3) = 1.2;
  try {
    plan(s, ObstacleMode::kSq);
    FAIL() << "expected failure";
  } catch (const RuntimeFailure& e) {
    EXPECT_EQ(std::string(e.what()).rfind("planner:", 0), 0u) << e.what();
  }
}

TEST(Pipeline, EmitIsDeterministicAndConsistent) {
  const Scenario s = short_empty();
  const fs::path d1 = scratch("a"), d2 = scratch("b");
  const PipelineResult r1 = run_pipeline(s, ObstacleMode::kSq, true, 42);
  emit(r1, d1.string());
  emit(run_pipeline(s, ObstacleMode::kSq, true, 42), d2.string());

  for (const char* f : {"trajectory.csv", "telemetry.csv", "voronoi.txt", "activity.log"}) {
    EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
  }
  // plan_time is wall clock; everything else in the metrics file must match.
  MetricsReport m1 = load_metrics((d1 / "metrics.json").string());
  MetricsReport m2 = load_metrics((d2 / "metrics.json").string());
  m1.plan_time = m2.plan_time = 0.0;
  EXPECT_EQ(metrics_json(m1), metrics_json(m2));

  // Header count equals the field count on every row.
  for (const auto& [file, cols] : {std::make_pair("trajectory.csv", kTrajectoryColumns.size()),
                                   std::make_pair("telemetry.csv", kTelemetryColumns.size())}) {
    std::ifstream in(d1 / file);
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
      EXPECT_EQ(static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1, cols);
      ++rows;
    }
    EXPECT_GT(rows, 4);
  }

  // Recomputing from the emitted CSVs reproduces the report.
  MetricsReport re;
  re.plan_time = r1.report.plan_time;
  path_metrics(read_trajectory_csv((d1 / "trajectory.csv").string()), re);
  telemetry_metrics(read_telemetry_csv((d1 / "telemetry.csv").string()), re);
  EXPECT_NEAR(re.arc_length, r1.report.arc_length, 1e-12);
  EXPECT_NEAR(re.jerkiness, r1.report.jerkiness, 1e-12 * std::max(1.0, r1.report.jerkiness));
  EXPECT_EQ(re.thrust_min, r1.report.thrust_min);
  EXPECT_EQ(re.thrust_max, r1.report.thrust_max);
  EXPECT_EQ(re.total_ticks, r1.report.total_ticks);
  EXPECT_EQ(re.infeasible_ticks, r1.report.infeasible_ticks);
  EXPECT_EQ(load_metrics((d1 / "metrics.json").string()).arc_length, r1.report.arc_length);
}

TEST(Pipeline, SeedOnlyMovesTheWind) {
  const Scenario s = short_empty();
  const SimResult a = simulate(s, plan(s, ObstacleMode::kSq).trajectory, 1);
  const SimResult b = simulate(s, plan(s, ObstacleMode::kSq).trajectory, 2);
  ASSERT_EQ(a.telemetry.size(), b.telemetry.size());
  EXPECT_EQ(a.telemetry.size(), static_cast<std::size_t>(std::lround((s.planner.T_d + s.settle_time) * 200)));
  EXPECT_NE(a.telemetry.back().q, b.telemetry.back().q);
  EXPECT_EQ(a.telemetry.front().q, b.telemetry.front().q);
}

TEST(Pipeline, TelemetryTracksDisturbance) {
  // With a constant wind the estimate settles on the lumped disturbance.
  Scenario s = short_empty();
  s.wind.sharpness = 50.0;
  s.wind.period = 1e3;
  s.planner.T_d = 2.0;
  s.settle_time = 8.0;
  s.goal = forward_kinematics_eef(s.planner.vehicle, s.start).position;
  const SimResult r = simulate(s, plan(s, ObstacleMode::kSq).trajectory, 0);
  const TelemetryRecord& last = r.telemetry.back();
  EXPECT_LT((last.d_hat - last.d_true).norm(), 0.05);
}

// -- command line --------------------------------------------------------------------

namespace {

int cli(const std::string& args) {
  const std::string cmd = std::string(WBAM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Cli, ExitCodes) {
  const std::string empty = std::string(WBAM_SCENARIO_DIR) + "/empty.json";
  EXPECT_EQ(cli("plan --scenario " + empty), 0);
  EXPECT_EQ(cli("plan --scenario /nonexistent.json"), 2);
  EXPECT_EQ(cli("plan --scenario " + empty + " --mode box"), 2);
  EXPECT_EQ(cli("plan --scenario " + empty + " --ns -3"), 2);
  EXPECT_EQ(cli("fly"), 2);
  EXPECT_EQ(cli("plan --scenario " + empty + " --out /proc/wbam_forbidden"), 3);
}

TEST(Cli, MetricsRecomputation) {
  const fs::path d = scratch("cli");
  const std::string empty = std::string(WBAM_SCENARIO_DIR) + "/empty.json";
  ASSERT_EQ(cli("plan --scenario " + empty + " --out " + d.string()), 0);
  EXPECT_TRUE(fs::exists(d / "trajectory.csv"));
  EXPECT_FALSE(fs::exists(d / "telemetry.csv"));
  const std::string cmd = std::string(WBAM_CLI_PATH) + " metrics --out " + d.string() + " > " + (d / "re.json").string();
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  const MetricsReport a = load_metrics((d / "metrics.json").string());
  const MetricsReport b = load_metrics((d / "re.json").string());
  EXPECT_EQ(a.arc_length, b.arc_length);
  EXPECT_EQ(a.jerkiness, b.jerkiness);
  EXPECT_EQ(a.plan_time, b.plan_time);
}
