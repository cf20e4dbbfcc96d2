#include "wbam/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace wbam {
namespace {

using nlohmann::json;

// Field access with a dotted path for error messages and a strict key set.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "must be an object");
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw DomainError(path + ": " + what);
  }

  std::string at(const std::string& key) const { return path_ + "." + key; }
  bool has(const std::string& key) const {
    used_.insert(key);
    return j_.contains(key);
  }

  const json& raw(const std::string& key) const {
    if (!has(key)) fail(at(key), "required field missing");
    return j_.at(key);
  }

  Node child(const std::string& key) const { return Node(raw(key), at(key)); }

  double number(const std::string& key, double def) const { return has(key) ? number(key) : def; }
  double number(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number()) fail(at(key), "must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(at(key), "must be finite");
    return d;
  }
  double positive(const std::string& key, double def) const {
    const double v = number(key, def);
    if (!(v > 0.0)) fail(at(key), "must be positive");
    return v;
  }
  int integer(const std::string& key, int def) const {
    if (!has(key)) return def;
    const json& v = raw(key);
    if (!v.is_number_integer()) fail(at(key), "must be an integer");
    return v.get<int>();
  }
  std::string text(const std::string& key, const std::string& def) const {
    if (!has(key)) return def;
    const json& v = raw(key);
    if (!v.is_string()) fail(at(key), "must be a string");
    return v.get<std::string>();
  }

  template <int N>
  Eigen::Matrix<double, N, 1> vec(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_array() || v.size() != static_cast<std::size_t>(N)) {
      fail(at(key), "must be an array of " + std::to_string(N) + " numbers");
    }
    Eigen::Matrix<double, N, 1> out;
    for (int i = 0; i < N; ++i) {
      if (!v[i].is_number()) fail(at(key) + "[" + std::to_string(i) + "]", "must be a number");
      out(i) = v[i].get<double>();
    }
    return out;
  }
  template <int N>
  Eigen::Matrix<double, N, 1> vec(const std::string& key, const Eigen::Matrix<double, N, 1>& def) const {
    return has(key) ? vec<N>(key) : def;
  }
  /// Diagonal given as an array; defaults to the diagonal of `def`.
  template <int N>
  Eigen::Matrix<double, N, N> diag(const std::string& key, const Eigen::Matrix<double, N, N>& def) const {
    if (!has(key)) return def;
    return vec<N>(key).asDiagonal();
  }

  void reject_unknown() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) fail(at(it.key()), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  mutable std::set<std::string> used_;
};

void read_planner(const Node& n, PlannerParams& p) {
  p.eta = n.positive("eta", p.eta);
  p.alpha = n.positive("alpha", p.alpha);
  if (n.has("K_tgt")) p.K_tgt = n.vec<3>("K_tgt").asDiagonal();
  p.T_d = n.positive("T_d", p.T_d);
  p.h_t = n.positive("h_t", p.h_t);
  p.n_steps = n.integer("n_steps", p.n_steps);
  p.stiffness.k_min = n.positive("k_min", p.stiffness.k_min);
  p.stiffness.k_max = n.positive("k_max", p.stiffness.k_max);
  p.stiffness.d0 = n.positive("d0", p.stiffness.d0);
  p.stiffness.d_prime = n.number("d_prime", p.stiffness.d_prime);
  p.hessian_floor = n.positive("hessian_floor", p.hessian_floor);
  n.reject_unknown();
}

void read_vehicle(const Node& n, VehicleGeometry& g) {
  g.rotor_radius = n.positive("rotor_radius", g.rotor_radius);
  g.blade_radius = n.positive("blade_radius", g.blade_radius);
  g.blade_half_thickness = n.positive("blade_half_thickness", g.blade_half_thickness);
  g.arm_base = n.number("arm_base", g.arm_base);
  g.l1 = n.positive("l1", g.l1);
  g.l2 = n.positive("l2", g.l2);
  g.link_half_width = n.positive("link_half_width", g.link_half_width);
  g.link_eps = n.positive("link_eps", g.link_eps);
  n.reject_unknown();
}

void read_model(const Node& n, ModelParams& m) {
  m.mass = n.positive("mass", m.mass);
  m.inertia = n.diag<3>("inertia", m.inertia);
  m.arm_length = n.positive("L", m.arm_length);
  m.alpha_p = n.number("alpha_p", m.alpha_p);
  m.k_f = n.number("k_f", m.k_f);
  m.gravity = n.positive("g", m.gravity);
  n.reject_unknown();
}

void read_controller(const Node& n, GainSet& g, SafetyParams& s) {
  g.Kp = n.diag<6>("Kp", g.Kp);
  g.Kd = n.diag<6>("Kd", g.Kd);
  g.a0 = n.vec<6>("a0", g.a0);
  g.a1 = n.vec<6>("a1", g.a1);
  g.eps = n.vec<6>("eps_dob", g.eps);
  s.alpha_co = n.number("alpha_co", s.alpha_co);
  s.sigma_co = n.number("sigma_co", s.sigma_co);
  s.T_lo = n.number("T_lo", s.T_lo);
  s.T_hi = n.number("T_hi", s.T_hi);
  s.Q_qdot = n.diag<6>("Q_qdot", s.Q_qdot);
  s.Q_thetaddot = n.diag<3>("Q_thetaddot", s.Q_thetaddot);
  s.Gamma_q = n.diag<6>("Gamma_q", s.Gamma_q);
  s.Gamma_theta = n.diag<3>("Gamma_theta", s.Gamma_theta);
  s.rate = n.positive("rate", s.rate);
  s.max_cbf_rows = n.integer("max_cbf_rows", s.max_cbf_rows);
  n.reject_unknown();
}

}  // namespace

Scenario::Scenario() {
  box = Box2{Vec2(0, 0), Vec2(1, 1)};
  plant.model.mass = 3.6;
  plant.model.inertia = Vec3(0.055, 0.052, 0.095).asDiagonal();
}

std::vector<Superquadric2> Scenario::shapes() const {
  std::vector<Superquadric2> out;
  for (const auto& o : obstacles) out.push_back(o.shape);
  return out;
}

std::vector<Superquadric3> Scenario::solids() const {
  std::vector<Superquadric3> out;
  for (const auto& o : obstacles) out.push_back(extrude(o.shape, o.height, obstacle_eps_vertical));
  return out;
}

void Scenario::validate() const {
  if (!((box.hi - box.lo).minCoeff() > 0.0)) throw DomainError("scenario: world box is empty");
  planner.validate();
  nominal.validate();
  plant.validate();
  gains.validate();
  safety.validate();
  if (!(sim_dt > 0.0 && sim_dt <= 0.01)) throw DomainError("scenario: simulation.dt outside (0, 0.01]");
  if (!(settle_time >= 0.0)) throw DomainError("scenario: simulation.settle_time must be nonnegative");
  if (!(obstacle_eps_vertical > 0.0 && obstacle_eps_vertical <= 1.0)) {
    throw DomainError("scenario: simulation.obstacle_eps_vertical outside (0, 1]");
  }
  const double ticks = sim_dt * safety.rate;
  if (std::abs(1.0 / ticks - std::round(1.0 / ticks)) > 1e-9) {
    throw DomainError("scenario: controller period must be a multiple of simulation.dt");
  }
  for (const auto& o : obstacles) {
    if (!(o.height > planner.h_t)) throw DomainError("scenario: obstacle '" + o.name + "' lower than h_t");
    for (const Vec2& d : {Vec2(1, 0), Vec2(-1, 0), Vec2(0, 1), Vec2(0, -1)}) {
      const Vec2 p = support_point(o.shape, d);
      if ((p.array() < box.lo.array()).any() || (p.array() > box.hi.array()).any()) {
        throw DomainError("scenario: obstacle '" + o.name + "' leaves the world box");
      }
    }
  }
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    for (std::size_t j = i + 1; j < obstacles.size(); ++j) {
      if (closest_pair(obstacles[i].shape, obstacles[j].shape).gap <= 0.0) {
        throw DomainError("scenario: obstacles '" + obstacles[i].name + "' and '" + obstacles[j].name + "' overlap");
      }
    }
  }
  if ((goal.array() < box.lo.array()).any() || (goal.array() > box.hi.array()).any()) {
    throw DomainError("scenario: goal outside the world box");
  }
  if (!obstacles.empty() && min_vehicle_gap(planner.vehicle, start, shapes()) <= 0.0) {
    throw DomainError("scenario: start configuration collides");
  }
}

Scenario parse_scenario(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DomainError(origin + ": " + e.what());
  }
  const Node root(doc, origin);
  const int version = root.integer("version", -1);
  if (version != kScenarioVersion) {
    Node::fail(root.at("version"), "unsupported version (expected " + std::to_string(kScenarioVersion) + ")");
  }
  Scenario s;
  s.name = root.text("name", "unnamed");

  const Node world = root.child("world");
  s.box = Box2{world.vec<2>("min"), world.vec<2>("max")};
  world.reject_unknown();

  if (root.has("obstacles")) {
    const json& list = root.raw("obstacles");
    if (!list.is_array()) Node::fail(root.at("obstacles"), "must be an array");
    for (std::size_t k = 0; k < list.size(); ++k) {
      const Node o(list[k], root.at("obstacles") + "[" + std::to_string(k) + "]");
      ObstacleSpec spec{o.text("name", "obstacle" + std::to_string(k)), Superquadric2(1, 1, 1), 3.0};
      const Vec2 a = o.vec<2>("a");
      const double eps = o.number("eps");
      if (!(a.minCoeff() > 0.0)) Node::fail(o.at("a"), "semi-axes must be positive");
      if (!(eps > 0.0 && eps <= 1.0)) Node::fail(o.at("eps"), "must lie in (0, 1] (convex shapes)");
      spec.shape = Superquadric2(a(0), a(1), eps, Pose2{o.number("angle", 0.0), o.vec<2>("center")});
      spec.height = o.positive("height", spec.height);
      o.reject_unknown();
      s.obstacles.push_back(spec);
    }
  }

  const Node start = root.child("start");
  s.start << start.number("x"), start.number("y"), start.number("psi", 0.0), start.number("theta1", 0.0),
      start.number("theta3", 0.0);
  start.reject_unknown();
  s.goal = root.vec<2>("goal");

  if (root.has("planner")) read_planner(root.child("planner"), s.planner);
  if (root.has("vehicle")) read_vehicle(root.child("vehicle"), s.planner.vehicle);
  if (root.has("model")) read_model(root.child("model"), s.nominal);
  if (root.has("plant")) {
    const Node p = root.child("plant");
    s.plant.model = s.nominal;
    s.plant.model.mass = p.positive("mass", Scenario().plant.model.mass);
    s.plant.model.inertia = p.diag<3>("inertia", Scenario().plant.model.inertia);
    s.plant.gamma_arm = p.positive("gamma_arm", s.plant.gamma_arm);
    s.plant.thrust_min = p.number("thrust_min", s.plant.thrust_min);
    s.plant.thrust_max = p.number("thrust_max", s.plant.thrust_max);
    p.reject_unknown();
  } else {
    const ModelParams truth = s.plant.model;
    s.plant.model = s.nominal;
    s.plant.model.mass = truth.mass;
    s.plant.model.inertia = truth.inertia;
  }
  if (root.has("controller")) read_controller(root.child("controller"), s.gains, s.safety);
  if (root.has("wind")) {
    const Node w = root.child("wind");
    s.wind.amplitude = w.number("amplitude", s.wind.amplitude);
    s.wind.period = w.positive("period", s.wind.period);
    s.wind.sharpness = w.positive("sharpness", s.wind.sharpness);
    w.reject_unknown();
  }
  if (root.has("simulation")) {
    const Node m = root.child("simulation");
    s.sim_dt = m.positive("dt", s.sim_dt);
    s.settle_time = m.number("settle_time", s.settle_time);
    s.obstacle_eps_vertical = m.positive("obstacle_eps_vertical", s.obstacle_eps_vertical);
    m.reject_unknown();
  }
  root.reject_unknown();
  s.validate();
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("scenario: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

}  // namespace wbam
