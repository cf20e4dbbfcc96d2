#include "wbam/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "wbam/io.hpp"

namespace wbam {

const std::vector<std::string> kTrajectoryColumns = {"s",     "x",     "y",       "psi",   "theta1",
                                                     "theta3", "u_x",  "u_y",     "u_theta", "eef_x",
                                                     "eef_y", "eef_heading", "residual", "min_gap"};

const std::vector<std::string> kTelemetryColumns = [] {
  std::vector<std::string> c{"t"};
  auto add = [&c](const char* name, int n) {
    for (int i = 0; i < n; ++i) c.push_back(std::string(name) + std::to_string(i));
  };
  add("q", 6);
  add("qdot", 6);
  add("theta", 3);
  add("T", 6);
  add("d_hat", 6);
  add("d_true", 6);
  c.emplace_back("h_co_min");
  c.emplace_back("feasible");
  return c;
}();

ObstacleMode parse_mode(const std::string& text) {
  if (text == "sq") return ObstacleMode::kSq;
  if (text == "ellipse") return ObstacleMode::kEllipse;
  throw DomainError("mode must be 'sq' or 'ellipse', got '" + text + "'");
}

std::string mode_name(ObstacleMode mode) { return mode == ObstacleMode::kSq ? "sq" : "ellipse"; }

namespace {

// Prefixes the stage name unless the message already carries it.
template <typename F>
auto staged(const std::string& tag, F&& f) {
  auto tagged = [&tag](const std::exception& e) {
    const std::string msg = e.what();
    return msg.rfind(tag + ":", 0) == 0 ? msg : tag + ": " + msg;
  };
  try {
    return f();
  } catch (const DomainError& e) {
    throw DomainError(tagged(e));
  } catch (const RuntimeFailure& e) {
    throw RuntimeFailure(tagged(e));
  }
}

// Straight start-goal path for an obstacle-free world. There is no Voronoi
// edge to align with, so the edge "normal" carries the initial heading.
SolutionPath direct_path(const Vec2& a, const Vec2& b, double heading) {
  SolutionPath p;
  p.found = true;
  p.nodes = {a, b};
  PathEdge e;
  e.from = a;
  e.to = b;
  e.length = (b - a).norm();
  e.normal = Vec2(std::cos(heading), std::sin(heading));
  e.normal_angle = heading;
  p.edges = {e};
  p.cost = e.length;
  return p;
}

std::string join(const std::vector<std::string>& cols) {
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  return out;
}

template <typename V>
void put(std::ostream& os, const V& v) {
  for (int i = 0; i < v.size(); ++i) os << ',' << fmt(v(i));
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw RuntimeFailure("emit: cannot write '" + p.string() + "'");
  return out;
}

std::vector<std::vector<double>> read_csv(const std::string& path, const std::vector<std::string>& cols) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != join(cols)) throw DomainError("'" + path + "': unexpected header");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      row.push_back(std::strtod(cell.c_str(), &end));
      if (end == cell.c_str() || *end != '\0') throw DomainError("'" + path + "': bad number '" + cell + "'");
    }
    if (row.size() != cols.size()) throw DomainError("'" + path + "': wrong column count");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

PlanResult plan(const Scenario& s, ObstacleMode mode) {
  PlanResult r;
  const std::vector<Superquadric2> original = s.shapes();
  for (const Superquadric2& o : original) {
    r.planning_shapes.push_back(mode == ObstacleMode::kEllipse ? circumscribing_ellipse(o) : o);
  }
  const PlanarPose eef0 = forward_kinematics_eef(s.planner.vehicle, s.start);

  staged("voronoi", [&] {
    if (r.planning_shapes.empty()) {
      r.diagram.box = s.box;
      r.path = direct_path(eef0.position, s.goal, eef0.heading);
      return 0;
    }
    r.diagram = build_cells(r.planning_shapes, s.box);
    r.graph = build_graph(r.diagram);
    r.path = solve_path(r.graph, eef0.position, s.goal);
    if (!r.path.found) throw RuntimeFailure("no path between start and goal");
    return 0;
  });

  staged("planner", [&] {
    r.schedule = make_schedule(r.path, eef0.heading);
    const Potential w(r.planning_shapes, s.planner);
    r.trajectory = integrate_em(w, s.start, r.schedule);
    if (r.trajectory.aborted) throw RuntimeFailure("integration aborted on a non-finite state");
    return 0;
  });

  for (const PlannerSample& smp : r.trajectory.samples) {
    PathSample p;
    p.s = smp.s;
    const PlanarPose e = forward_kinematics_eef(s.planner.vehicle, smp.z);
    p.eef = e.position;
    r.eef_heading.push_back(e.heading);
    if (!original.empty()) p.min_gap = min_vehicle_gap(s.planner.vehicle, smp.z, original);
    r.eef_path.push_back(p);
  }
  return r;
}

SimResult simulate(const Scenario& s, const PlannedTrajectory& trajectory, std::uint64_t seed) {
  return staged("simulation", [&] {
    SimResult out;
    const TargetPose p0 = target_pose(trajectory, 0.0, s.planner);
    VehicleState st;
    st.q = p0.q;
    st.theta = p0.theta;
    SafetyController ctl(s.planner.vehicle, s.nominal, s.gains, s.safety, s.solids());
    ctl.reset(st);

    std::mt19937_64 rng(seed);
    const double phase = std::uniform_real_distribution<double>(0.0, s.wind.period)(rng);

    const int sub = static_cast<int>(std::lround(1.0 / (s.safety.rate * s.sim_dt)));
    const int ticks = static_cast<int>(std::ceil((s.planner.T_d + s.settle_time) * s.safety.rate - 1e-9));
    const ModelParams& nom = s.nominal;
    const ModelParams& tru = s.plant.model;
    Vec6 applied = allocation(nom, st.q.tail<3>()).lu().solve(gravity_vec(nom));
    out.telemetry.reserve(static_cast<std::size_t>(ticks));

    for (int k = 0; k < ticks; ++k) {
      const double t = k / s.safety.rate;
      const TargetPose tp = target_pose(trajectory, t, s.planner);
      const TickOutput c = ctl.tick(st, applied, tp.q, tp.theta);
      applied = c.thrust.cwiseMax(s.plant.thrust_min).cwiseMin(s.plant.thrust_max);

      TelemetryRecord rec;
      rec.t = t;
      rec.q = st.q;
      rec.qdot = st.qdot;
      rec.theta = st.theta;
      rec.thrust = c.thrust;
      rec.d_hat = c.d_hat;
      {
        const Vec3 phi = st.q.tail<3>(), phidot = st.qdot.tail<3>();
        const Vec6 wrench = allocation(tru, phi) * applied + s.wind.at(t + phase) - coriolis_vec(tru, phi, phidot) -
                            gravity_vec(tru);
        const Vec6 qddot = mass_matrix(tru, phi).ldlt().solve(wrench);
        rec.d_true = mass_matrix(nom, phi) * qddot + coriolis_vec(nom, phi, phidot) + gravity_vec(nom) -
                     allocation(nom, phi) * applied;
      }
      rec.h_co_min = c.h_min;
      rec.feasible = c.feasible;
      out.telemetry.push_back(rec);
      if (!c.active.empty()) {
        std::string line = "tick " + std::to_string(k) + ":";
        for (const std::string& a : c.active) line += " " + a;
        out.activity.push_back(std::move(line));
      }

      for (int j = 0; j < sub; ++j) {
        st = step(s.plant, st, applied, c.arm, s.wind.at(t + j * s.sim_dt + phase), s.sim_dt);
      }
    }
    return out;
  });
}

void telemetry_metrics(const std::vector<TelemetryRecord>& telemetry, MetricsReport& r) {
  r.simulated = true;
  r.total_ticks = static_cast<int>(telemetry.size());
  r.infeasible_ticks = 0;
  r.h_co_min = std::numeric_limits<double>::infinity();
  r.thrust_min = std::numeric_limits<double>::infinity();
  r.thrust_max = -std::numeric_limits<double>::infinity();
  for (const TelemetryRecord& rec : telemetry) {
    r.h_co_min = std::min(r.h_co_min, rec.h_co_min);
    if (!rec.feasible) {
      ++r.infeasible_ticks;
      continue;
    }
    r.thrust_min = std::min(r.thrust_min, rec.thrust.minCoeff());
    r.thrust_max = std::max(r.thrust_max, rec.thrust.maxCoeff());
  }
}

PipelineResult run_pipeline(const Scenario& s, ObstacleMode mode, bool with_simulation, std::uint64_t seed) {
  PipelineResult r;
  r.plan = plan(s, mode);
  r.report.plan_time = r.plan.trajectory.integration_seconds;
  path_metrics(r.plan.eef_path, r.report);
  if (with_simulation) {
    r.sim = simulate(s, r.plan.trajectory, seed);
    telemetry_metrics(r.sim.telemetry, r.report);
  }
  return r;
}

void emit(const PipelineResult& r, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw RuntimeFailure("emit: cannot create '" + dir + "': " + ec.message());
  const fs::path base(dir);

  {
    std::ofstream os = open_out(base / "trajectory.csv");
    os << join(kTrajectoryColumns) << '\n';
    const auto& smp = r.plan.trajectory.samples;
    for (std::size_t k = 0; k < smp.size(); ++k) {
      const PathSample& p = r.plan.eef_path[k];
      os << fmt(smp[k].s);
      put(os, smp[k].z);
      put(os, smp[k].u);
      os << ',' << fmt(p.eef.x()) << ',' << fmt(p.eef.y());
      os << ',' << fmt(r.plan.eef_heading[k]);
      os << ',' << fmt(smp[k].residual) << ',' << fmt(p.min_gap) << '\n';
    }
    if (!os) throw RuntimeFailure("emit: write failed for trajectory.csv");
  }
  {
    std::ofstream os = open_out(base / "voronoi.txt");
    write_diagram(os, r.plan.diagram, r.plan.graph, r.plan.path);
    if (!os) throw RuntimeFailure("emit: write failed for voronoi.txt");
  }
  write_metrics((base / "metrics.json").string(), r.report);
  if (!r.report.simulated) return;
  {
    std::ofstream os = open_out(base / "telemetry.csv");
    os << join(kTelemetryColumns) << '\n';
    for (const TelemetryRecord& t : r.sim.telemetry) {
      os << fmt(t.t);
      put(os, t.q);
      put(os, t.qdot);
      put(os, t.theta);
      put(os, t.thrust);
      put(os, t.d_hat);
      put(os, t.d_true);
      os << ',' << fmt(t.h_co_min) << ',' << (t.feasible ? 1 : 0) << '\n';
    }
    if (!os) throw RuntimeFailure("emit: write failed for telemetry.csv");
  }
  {
    std::ofstream os = open_out(base / "activity.log");
    for (const std::string& line : r.sim.activity) os << line << '\n';
    if (!os) throw RuntimeFailure("emit: write failed for activity.log");
  }
}

std::vector<PathSample> read_trajectory_csv(const std::string& path) {
  std::vector<PathSample> out;
  for (const auto& row : read_csv(path, kTrajectoryColumns)) {
    PathSample p;
    p.s = row[0];
    p.eef = Vec2(row[9], row[10]);
    p.min_gap = row[13];
    out.push_back(p);
  }
  return out;
}

std::vector<TelemetryRecord> read_telemetry_csv(const std::string& path) {
  std::vector<TelemetryRecord> out;
  for (const auto& row : read_csv(path, kTelemetryColumns)) {
    TelemetryRecord t;
    int c = 0;
    t.t = row[c++];
    for (int i = 0; i < 6; ++i) t.q(i) = row[c++];
    for (int i = 0; i < 6; ++i) t.qdot(i) = row[c++];
    for (int i = 0; i < 3; ++i) t.theta(i) = row[c++];
    for (int i = 0; i < 6; ++i) t.thrust(i) = row[c++];
    for (int i = 0; i < 6; ++i) t.d_hat(i) = row[c++];
    for (int i = 0; i < 6; ++i) t.d_true(i) = row[c++];
    t.h_co_min = row[c++];
    t.feasible = row[c] != 0.0;
    out.push_back(t);
  }
  return out;
}

}  // namespace wbam
