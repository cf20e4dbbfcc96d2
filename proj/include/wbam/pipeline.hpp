#pragma once

// End-to-end run: Voronoi global path, equilibrium-manifold plan, closed-loop
// simulation under wind, metrics and file emission.

#include <cstdint>
#include <string>
#include <vector>

#include "wbam/metrics.hpp"
#include "wbam/scenario.hpp"

namespace wbam {

enum class ObstacleMode { kSq, kEllipse };

ObstacleMode parse_mode(const std::string& text);
std::string mode_name(ObstacleMode mode);

struct PlanResult {
  /// Shapes seen by the Voronoi stage and the potential.
  std::vector<Superquadric2> planning_shapes;
  VoronoiDiagram diagram;
  ClearanceGraph graph;
  SolutionPath path;
  AttractorSchedule schedule;
  PlannedTrajectory trajectory;
  /// One entry per trajectory sample, gaps against the original shapes.
  std::vector<PathSample> eef_path;
  std::vector<double> eef_heading;
};

struct TelemetryRecord {
  double t = 0.0;
  Vec6 q = Vec6::Zero();
  Vec6 qdot = Vec6::Zero();
  Vec3 theta = Vec3::Zero();
  Vec6 thrust = Vec6::Zero();
  Vec6 d_hat = Vec6::Zero();
  /// Lumped disturbance the nominal model sees over the following plant step.
  Vec6 d_true = Vec6::Zero();
  double h_co_min = 0.0;
  bool feasible = true;
};

struct SimResult {
  std::vector<TelemetryRecord> telemetry;
  /// "tick <k>: <row ids>" for ticks with active rows.
  std::vector<std::string> activity;
};

/// Stages 1-3. Errors carry a "voronoi:" or "planner:" tag.
PlanResult plan(const Scenario& s, ObstacleMode mode);

/// Closed loop over T_d + settle_time. The controller always sees the original
/// extruded obstacles; `seed` sets the wind phase.
SimResult simulate(const Scenario& s, const PlannedTrajectory& trajectory, std::uint64_t seed);

struct PipelineResult {
  PlanResult plan;
  SimResult sim;
  MetricsReport report;
};

PipelineResult run_pipeline(const Scenario& s, ObstacleMode mode, bool with_simulation, std::uint64_t seed);

/// Safety fields of `report` from telemetry.
void telemetry_metrics(const std::vector<TelemetryRecord>& telemetry, MetricsReport& report);

/// Writes trajectory.csv, voronoi.txt, metrics.json and, when simulated,
/// telemetry.csv and activity.log into `dir` (created if missing).
void emit(const PipelineResult& r, const std::string& dir);

/// Reads the eef path back from an emitted trajectory CSV.
std::vector<PathSample> read_trajectory_csv(const std::string& path);
/// Reads telemetry records back from an emitted telemetry CSV.
std::vector<TelemetryRecord> read_telemetry_csv(const std::string& path);

extern const std::vector<std::string> kTrajectoryColumns;
extern const std::vector<std::string> kTelemetryColumns;

}  // namespace wbam
