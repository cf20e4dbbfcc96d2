#include "wbam/vehicle.hpp"

namespace wbam {
namespace {

const Mat3 kEz = skew(Vec3::UnitZ());
const Mat3 kEy = skew(Vec3::UnitY());

Vec3 arm_base3(const VehicleGeometry& g) { return Vec3(g.arm_base, 0.0, 0.0); }

}  // namespace

void VehicleGeometry::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string("vehicle: ") + name + " must be positive");
  };
  positive(rotor_radius, "rotor_radius");
  positive(blade_radius, "blade_radius");
  positive(blade_half_thickness, "blade_half_thickness");
  positive(l1, "l1");
  positive(l2, "l2");
  positive(link_half_width, "link_half_width");
  if (!(blade_eps > 0.0 && blade_eps <= 2.0)) throw DomainError("vehicle: blade_eps outside (0, 2]");
  if (!(link_eps > 0.0 && link_eps <= 2.0)) throw DomainError("vehicle: link_eps outside (0, 2]");
  if (!std::isfinite(arm_base)) throw DomainError("vehicle: arm_base must be finite");
}

std::array<Pose2, kVehicleSqCount> vehicle_poses2(const VehicleGeometry& g, const PlanarConfig& z) {
  const Vec2 base(z(0), z(1));
  const double psi = z(2);
  const Mat2 r = rot2(psi);
  std::array<Pose2, kVehicleSqCount> poses;
  for (int k = 0; k < 6; ++k) {
    const double b = g.blade_angles[k];
    poses[k] = Pose2{psi, base + r * Vec2(g.rotor_radius * std::cos(b), g.rotor_radius * std::sin(b))};
  }
  const Vec2 joint = base + r * Vec2(g.arm_base, 0.0);
  const double a1 = psi + z(3);
  const Vec2 wrist = joint + rot2(a1) * Vec2(g.l1, 0.0);
  const double a2 = a1 + z(4);
  poses[6] = Pose2{a1, joint + rot2(a1) * Vec2(0.5 * g.l1, 0.0)};
  poses[7] = Pose2{a2, wrist + rot2(a2) * Vec2(0.5 * g.l2, 0.0)};
  return poses;
}

Superquadric2 vehicle_shape2(const VehicleGeometry& g, int k) {
  if (k < 0 || k >= kVehicleSqCount) throw DomainError("vehicle: SQ index out of range");
  if (k < 6) return Superquadric2(g.blade_radius, g.blade_radius, g.blade_eps);
  const double half = 0.5 * (k == 6 ? g.l1 : g.l2);
  return Superquadric2(half, g.link_half_width, g.link_eps);
}

std::vector<Superquadric2> vehicle_sqs2(const VehicleGeometry& g, const PlanarConfig& z) {
  const auto poses = vehicle_poses2(g, z);
  std::vector<Superquadric2> out;
  out.reserve(kVehicleSqCount);
  for (int k = 0; k < kVehicleSqCount; ++k) out.push_back(vehicle_shape2(g, k).with_pose(poses[k]));
  return out;
}

PlanarPose forward_kinematics_eef(const VehicleGeometry& g, const PlanarConfig& z) {
  const Vec2 base(z(0), z(1));
  const Vec2 joint = base + rot2(z(2)) * Vec2(g.arm_base, 0.0);
  const double a1 = z(2) + z(3);
  const double a2 = a1 + z(4);
  PlanarPose out;
  out.position = joint + rot2(a1) * Vec2(g.l1, 0.0) + rot2(a2) * Vec2(g.l2, 0.0);
  out.heading = wrap_angle(a2);
  return out;
}

Mat3 rotation_zyx(const Vec3& phi) {
  return rot_z(phi(2)) * rot_y(phi(1)) * Eigen::AngleAxisd(phi(0), Vec3::UnitX()).toRotationMatrix();
}

Pose3 vehicle_local_pose3(const VehicleGeometry& g, int k, const Vec3& theta) {
  if (k < 0 || k >= kVehicleSqCount) throw DomainError("vehicle: SQ index out of range");
  Pose3 p;
  if (k < 6) {
    const double b = g.blade_angles[k];
    p.translation = Vec3(g.rotor_radius * std::cos(b), g.rotor_radius * std::sin(b), 0.0);
    return p;
  }
  const Mat3 a = rot_z(theta(0)) * rot_y(theta(1));
  if (k == 6) {
    p.rotation = a;
    p.translation = arm_base3(g) + a * Vec3(0.5 * g.l1, 0, 0);
    return p;
  }
  const Mat3 c = rot_z(theta(2));
  p.rotation = a * c;
  p.translation = arm_base3(g) + a * (Vec3(g.l1, 0, 0) + c * Vec3(0.5 * g.l2, 0, 0));
  return p;
}

Superquadric3 vehicle_shape3(const VehicleGeometry& g, int k) {
  if (k < 0 || k >= kVehicleSqCount) throw DomainError("vehicle: SQ index out of range");
  if (k < 6) {
    return Superquadric3(g.blade_radius, g.blade_radius, g.blade_half_thickness, 0.3, g.blade_eps);
  }
  const double half = 0.5 * (k == 6 ? g.l1 : g.l2);
  return Superquadric3(half, g.link_half_width, g.link_half_width, g.link_eps, g.link_eps);
}

std::vector<Superquadric3> vehicle_sqs3(const VehicleGeometry& g, const Vec6& q, const Vec3& theta) {
  const Mat3 r = rotation_zyx(q.tail<3>());
  const Vec3 p = q.head<3>();
  std::vector<Superquadric3> out;
  out.reserve(kVehicleSqCount);
  for (int k = 0; k < kVehicleSqCount; ++k) {
    const Pose3 local = vehicle_local_pose3(g, k, theta);
    Pose3 world;
    world.rotation = r * local.rotation;
    world.translation = p + r * local.translation;
    out.push_back(vehicle_shape3(g, k).with_pose(world));
  }
  return out;
}

BodyPoint body_point(const VehicleGeometry& g, int k, const Vec3& local, const Vec3& theta,
                     const Vec3& thetadot) {
  if (k < 0 || k >= kVehicleSqCount) throw DomainError("vehicle: SQ index out of range");
  BodyPoint out;
  if (k < 6) {
    out.v = vehicle_local_pose3(g, k, theta).translation + local;
    return out;
  }
  // A = Rz(t1) Ry(t2) and its partials; link 2 adds C = Rz(t3).
  const Mat3 rz = rot_z(theta(0)), ry = rot_y(theta(1));
  const Mat3 a = rz * ry;
  const Mat3 a1 = rz * kEz * ry, a2 = rz * ry * kEy;
  const Mat3 a11 = rz * kEz * kEz * ry, a12 = rz * kEz * ry * kEy, a22 = rz * ry * kEy * kEy;
  const double t1 = thetadot(0), t2 = thetadot(1), t3 = thetadot(2);

  Vec3 u;
  if (k == 6) {
    u = Vec3(0.5 * g.l1, 0, 0) + local;
  } else {
    const Mat3 c = rot_z(theta(2));
    const Vec3 w = Vec3(0.5 * g.l2, 0, 0) + local;
    u = Vec3(g.l1, 0, 0) + c * w;
    const Mat3 c3 = c * kEz, c33 = c * kEz * kEz;
    out.jacobian.col(2) = a * c3 * w;
    out.bias += 2.0 * t1 * t3 * (a1 * c3 * w) + 2.0 * t2 * t3 * (a2 * c3 * w) + t3 * t3 * (a * c33 * w);
  }
  out.v = arm_base3(g) + a * u;
  out.jacobian.col(0) = a1 * u;
  out.jacobian.col(1) = a2 * u;
  out.bias += t1 * t1 * (a11 * u) + 2.0 * t1 * t2 * (a12 * u) + t2 * t2 * (a22 * u);
  return out;
}

}  // namespace wbam
