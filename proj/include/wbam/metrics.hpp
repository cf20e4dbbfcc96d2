#pragma once

// Benchmark metrics over a planned end-effector path plus closed-loop safety
// flags, and their file round trip.

#include <limits>
#include <string>
#include <vector>

#include "wbam/common.hpp"

namespace wbam {

struct PathSample {
  double s = 0.0;
  Vec2 eef = Vec2::Zero();
  /// Smallest signed vehicle-obstacle gap at this sample.
  double min_gap = std::numeric_limits<double>::infinity();
};

struct MetricsReport {
  double plan_time = 0.0;
  double min_distance = std::numeric_limits<double>::infinity();
  double arc_length = 0.0;
  double jerkiness = 0.0;

  bool simulated = false;
  double h_co_min = std::numeric_limits<double>::infinity();
  /// Over QP-feasible control ticks.
  double thrust_min = std::numeric_limits<double>::infinity();
  double thrust_max = -std::numeric_limits<double>::infinity();
  int infeasible_ticks = 0;
  int total_ticks = 0;
};

/// arc_length = sum |d eef|; jerkiness = mean |third difference|^2 / ds^6 / arc_length;
/// min_distance = min of min_gap. Needs at least 4 samples.
void path_metrics(const std::vector<PathSample>& path, MetricsReport& report);

std::string metrics_json(const MetricsReport& r);
MetricsReport parse_metrics(const std::string& text);
void write_metrics(const std::string& path, const MetricsReport& r);
MetricsReport load_metrics(const std::string& path);

}  // namespace wbam
