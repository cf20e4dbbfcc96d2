#pragma once

// Geometry of the aerial manipulator: six blade SQs rigidly attached to the
// hexarotor and two link SQs driven by the arm joints. Planar poses for the
// planner, spatial poses and point kinematics for the controller.

#include <array>
#include <vector>

#include "wbam/sq_geometry.hpp"

namespace wbam {

inline constexpr int kVehicleSqCount = 8;

struct VehicleGeometry {
  /// Distance from the body origin to each blade center [m].
  double rotor_radius = 0.278;
  /// Body-frame azimuth of each blade center, rotors 1..6 [rad].
  std::array<double, 6> blade_angles = {7 * kPi / 6, 3 * kPi / 2, 11 * kPi / 6,
                                        kPi / 6,     kPi / 2,     5 * kPi / 6};
  double blade_radius = 0.115;
  double blade_eps = 1.0;
  double blade_half_thickness = 0.01;
  /// Arm joint 1 sits this far along the body x axis [m].
  double arm_base = 0.1;
  double l1 = 0.3;
  double l2 = 0.25;
  double link_half_width = 0.015;
  double link_eps = 0.3;

  void validate() const;
};

/// Planner configuration [x, y, psi, theta1, theta3].
using PlanarConfig = Eigen::Matrix<double, 5, 1>;

struct PlanarPose {
  Vec2 position = Vec2::Zero();
  double heading = 0.0;
};

/// World poses of SQ_1..SQ_8 (six blades, then link 1 and link 2).
std::array<Pose2, kVehicleSqCount> vehicle_poses2(const VehicleGeometry& g, const PlanarConfig& z);
std::vector<Superquadric2> vehicle_sqs2(const VehicleGeometry& g, const PlanarConfig& z);
/// Body-frame shape of SQ k (pose ignored).
Superquadric2 vehicle_shape2(const VehicleGeometry& g, int k);

PlanarPose forward_kinematics_eef(const VehicleGeometry& g, const PlanarConfig& z);

/// ZYX Euler angles [roll, pitch, yaw] to the body-to-world rotation.
Mat3 rotation_zyx(const Vec3& phi);

/// Attachment of a spatial vehicle SQ: fixed to the body or to an arm link.
struct BodyPoint {
  /// Position in the body frame.
  Vec3 v = Vec3::Zero();
  /// dv/dtheta (body frame).
  Mat3 jacobian = Mat3::Zero();
  /// (dJ/dt) thetadot, i.e. the second-order term sum d2v/dtheta_k dtheta_l.
  Vec3 bias = Vec3::Zero();
};

/// Body-frame pose of spatial SQ k for joint angles theta.
Pose3 vehicle_local_pose3(const VehicleGeometry& g, int k, const Vec3& theta);
Superquadric3 vehicle_shape3(const VehicleGeometry& g, int k);
std::vector<Superquadric3> vehicle_sqs3(const VehicleGeometry& g, const Vec6& q, const Vec3& theta);

/// Body-frame kinematics of the point fixed at `local` in the frame of SQ k.
BodyPoint body_point(const VehicleGeometry& g, int k, const Vec3& local, const Vec3& theta,
                     const Vec3& thetadot);

}  // namespace wbam
