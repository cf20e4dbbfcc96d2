#pragma once

// Euler-Lagrange model of the tilted-rotor hexarotor carrying the arm:
// M(phi) qddot + C(phi, phidot) + G = B(phi) T + tau_ext, q = [p; roll, pitch, yaw].

#include "wbam/common.hpp"

namespace wbam {

struct ModelParams {
  double mass = 3.5;
  Mat3 inertia = Vec3(0.05, 0.05, 0.09).asDiagonal();
  /// Body origin to propeller [m].
  double arm_length = 0.278;
  double alpha_p = kPi / 12.0;
  /// Thrust-to-torque coefficient [m].
  double k_f = 0.016;
  double gravity = 9.81;

  void validate() const;
  double p1() const { return arm_length * std::cos(alpha_p) + k_f * std::sin(alpha_p); }
  double p2() const { return arm_length * std::sin(alpha_p) - k_f * std::cos(alpha_p); }
};

struct VehicleState {
  Vec6 q = Vec6::Zero();
  Vec6 qdot = Vec6::Zero();
  Vec3 theta = Vec3::Zero();
  Vec3 thetadot = Vec3::Zero();
};

/// Desired arm motion handed to the joint servo loop.
struct ArmCommand {
  Vec3 theta = Vec3::Zero();
  Vec3 thetadot = Vec3::Zero();
  Vec3 thetaddot = Vec3::Zero();
};

/// omega_body = Q(phi) phidot. Throws near pitch = +-pi/2.
Mat3 euler_rate_map(const Vec3& phi);
Mat3 euler_rate_map_dot(const Vec3& phi, const Vec3& phidot);

Mat6 mass_matrix(const ModelParams& m, const Vec3& phi);
Vec6 coriolis_vec(const ModelParams& m, const Vec3& phi, const Vec3& phidot);
Vec6 gravity_vec(const ModelParams& m);

/// Constant body-frame wrench map of the six tilted rotors.
Mat6 allocation_body(const ModelParams& m);
/// blkdiag(R, Q^T) * allocation_body.
Mat6 allocation(const ModelParams& m, const Vec3& phi);

struct PlantParams {
  ModelParams model;
  /// Joint servo bandwidth; critically damped second-order tracking [1/s].
  double gamma_arm = 20.0;
  /// Physical thrust range applied by the plant [N].
  double thrust_min = 0.0;
  double thrust_max = 18.0;

  void validate() const;
};

/// One semi-implicit Euler step with the true model. `d_ext` is the external
/// generalized wrench added to B T.
VehicleState step(const PlantParams& plant, const VehicleState& s, const Vec6& thrust,
                  const ArmCommand& arm, const Vec6& d_ext, double dt);

/// Smoothed square wave on the world x force channel.
struct WindProfile {
  double amplitude = 2.0;
  double period = 10.0;
  /// Larger is closer to a square wave.
  double sharpness = 5.0;

  Vec6 at(double t) const;
};

}  // namespace wbam
