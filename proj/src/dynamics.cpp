#include "wbam/dynamics.hpp"

#include "wbam/vehicle.hpp"

namespace wbam {
namespace {

constexpr double kPitchMargin = 1e-3;

void check_pitch(const Vec3& phi) {
  if (!phi.allFinite()) throw RuntimeFailure("dynamics: non-finite attitude");
  if (std::abs(phi(1)) >= kPi / 2 - kPitchMargin) throw RuntimeFailure("dynamics: Euler singularity (pitch)");
}

}  // namespace

void ModelParams::validate() const {
  if (!(mass > 0.0)) throw DomainError("model: mass must be positive");
  if (!(gravity > 0.0)) throw DomainError("model: gravity must be positive");
  if (!inertia.isApprox(inertia.transpose(), 1e-12) ||
      Eigen::SelfAdjointEigenSolver<Mat3>(inertia).eigenvalues().minCoeff() <= 0.0) {
    throw DomainError("model: inertia must be symmetric positive definite");
  }
  if (!(alpha_p > 0.0 && alpha_p < kPi / 2)) throw DomainError("model: alpha_p outside (0, pi/2)");
  if (!(arm_length > 0.0) || !std::isfinite(k_f)) throw DomainError("model: bad rotor geometry");
}

void PlantParams::validate() const {
  model.validate();
  if (!(gamma_arm > 0.0)) throw DomainError("plant: gamma_arm must be positive");
  if (!(thrust_min < thrust_max)) throw DomainError("plant: thrust range is empty");
}

Mat3 euler_rate_map(const Vec3& phi) {
  check_pitch(phi);
  const double sr = std::sin(phi(0)), cr = std::cos(phi(0));
  const double sp = std::sin(phi(1)), cp = std::cos(phi(1));
  Mat3 q;
  q << 1, 0, -sp, 0, cr, sr * cp, 0, -sr, cr * cp;
  return q;
}

Mat3 euler_rate_map_dot(const Vec3& phi, const Vec3& phidot) {
  check_pitch(phi);
  const double sr = std::sin(phi(0)), cr = std::cos(phi(0));
  const double sp = std::sin(phi(1)), cp = std::cos(phi(1));
  const double dr = phidot(0), dp = phidot(1);
  Mat3 q;
  q << 0, 0, -cp * dp,
       0, -sr * dr, cr * cp * dr - sr * sp * dp,
       0, -cr * dr, -sr * cp * dr - cr * sp * dp;
  return q;
}

Mat6 mass_matrix(const ModelParams& m, const Vec3& phi) {
  const Mat3 q = euler_rate_map(phi);
  Mat6 out = Mat6::Zero();
  out.topLeftCorner<3, 3>() = m.mass * Mat3::Identity();
  out.bottomRightCorner<3, 3>() = q.transpose() * m.inertia * q;
  return out;
}

Vec6 coriolis_vec(const ModelParams& m, const Vec3& phi, const Vec3& phidot) {
  const Mat3 q = euler_rate_map(phi);
  const Vec3 w = q * phidot;
  Vec6 out = Vec6::Zero();
  out.tail<3>() = q.transpose() * (m.inertia * euler_rate_map_dot(phi, phidot) * phidot + w.cross(m.inertia * w));
  return out;
}

Vec6 gravity_vec(const ModelParams& m) {
  Vec6 out = Vec6::Zero();
  out(2) = m.mass * m.gravity;
  return out;
}

Mat6 allocation_body(const ModelParams& m) {
  const double s = std::sin(m.alpha_p), c = std::cos(m.alpha_p);
  const double p1 = m.p1(), p2 = m.p2();
  const double h = std::sqrt(3.0) / 2.0;
  Mat6 a;
  a << 0.5 * s, -s, 0.5 * s, 0.5 * s, -s, 0.5 * s,
       -h * s, 0, h * s, -h * s, 0, h * s,
       c, c, c, c, c, c,
       -0.5 * p1, -p1, -0.5 * p1, 0.5 * p1, p1, 0.5 * p1,
       h * p1, 0, -h * p1, -h * p1, 0, h * p1,
       p2, -p2, p2, -p2, p2, -p2;
  return a;
}

Mat6 allocation(const ModelParams& m, const Vec3& phi) {
  Mat6 frame = Mat6::Zero();
  frame.topLeftCorner<3, 3>() = rotation_zyx(phi);
  frame.bottomRightCorner<3, 3>() = euler_rate_map(phi).transpose();
  return frame * allocation_body(m);
}

VehicleState step(const PlantParams& plant, const VehicleState& s, const Vec6& thrust,
                  const ArmCommand& arm, const Vec6& d_ext, double dt) {
  if (!(dt > 0.0 && dt <= 0.01)) throw DomainError("dynamics: dt outside (0, 0.01]");
  if (!thrust.allFinite() || !d_ext.allFinite()) throw RuntimeFailure("dynamics: non-finite input");
  const Vec3 phi = s.q.tail<3>(), phidot = s.qdot.tail<3>();
  const Vec6 t = thrust.cwiseMax(plant.thrust_min).cwiseMin(plant.thrust_max);
  const ModelParams& m = plant.model;
  const Vec6 rhs = allocation(m, phi) * t + d_ext - coriolis_vec(m, phi, phidot) - gravity_vec(m);
  const Vec6 qddot = mass_matrix(m, phi).ldlt().solve(rhs);

  const double g = plant.gamma_arm;
  const Vec3 thetaddot =
      arm.thetaddot + 2.0 * g * (arm.thetadot - s.thetadot) + g * g * (arm.theta - s.theta);

  VehicleState n;
  n.qdot = s.qdot + dt * qddot;
  n.q = s.q + dt * n.qdot;
  n.thetadot = s.thetadot + dt * thetaddot;
  n.theta = s.theta + dt * n.thetadot;
  if (!n.q.allFinite() || !n.qdot.allFinite() || !n.theta.allFinite() || !n.thetadot.allFinite()) {
    throw RuntimeFailure("dynamics: non-finite state");
  }
  check_pitch(n.q.tail<3>());
  return n;
}

Vec6 WindProfile::at(double t) const {
  Vec6 out = Vec6::Zero();
  if (amplitude == 0.0) return out;
  const double k = sharpness;
  out(0) = amplitude * std::tanh(k * std::sin(2.0 * kPi * t / period)) / std::tanh(k);
  return out;
}

}  // namespace wbam
