#pragma once

// Scenario files: world box, obstacles, start and goal, and every planner,
// controller and plant parameter (defaults apply to omitted fields).

#include <string>
#include <vector>

#include "wbam/dynamics.hpp"
#include "wbam/em_planner.hpp"
#include "wbam/safety_controller.hpp"
#include "wbam/voronoi.hpp"

namespace wbam {

inline constexpr int kScenarioVersion = 1;

struct ObstacleSpec {
  std::string name;
  Superquadric2 shape;
  /// Extrusion height for the spatial model [m].
  double height = 3.0;
};

struct Scenario {
  std::string name;
  Box2 box;
  std::vector<ObstacleSpec> obstacles;
  /// Planner configuration at t = 0 [x, y, psi, theta1, theta3].
  PlanarConfig start = PlanarConfig::Zero();
  Vec2 goal = Vec2::Zero();

  PlannerParams planner;
  ModelParams nominal;
  PlantParams plant;
  GainSet gains;
  SafetyParams safety;
  WindProfile wind;

  double sim_dt = 1e-3;
  /// Simulated time after T_d.
  double settle_time = 3.0;
  /// Vertical exponent of the extruded obstacles.
  double obstacle_eps_vertical = 0.1;

  Scenario();
  std::vector<Superquadric2> shapes() const;
  std::vector<Superquadric3> solids() const;
  /// Parameter, disjointness, containment and start-clearance checks.
  void validate() const;
};

/// Parses a scenario document. `origin` prefixes error messages.
Scenario parse_scenario(const std::string& text, const std::string& origin = "scenario");
Scenario load_scenario(const std::string& path);

}  // namespace wbam
