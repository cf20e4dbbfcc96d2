#pragma once

// Superquadric (SQ) shapes, inside-outside evaluation, boundary proxies,
// the distance-dependent proxy stiffness, and closest-pair queries.

#include "wbam/common.hpp"

namespace wbam {

/// Planar rigid transform (body -> world).
struct Pose2 {
  double angle = 0.0;
  Vec2 translation = Vec2::Zero();

  Vec2 to_world(const Vec2& body) const { return rot2(angle) * body + translation; }
  Vec2 to_body(const Vec2& world) const {
    return rot2(angle).transpose() * (world - translation);
  }
};

/// Spatial rigid transform (body -> world).
struct Pose3 {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 to_world(const Vec3& body) const { return rotation * body + translation; }
  Vec3 to_body(const Vec3& world) const {
    return rotation.transpose() * (world - translation);
  }
};

/// 2D superellipse |x/a1|^(2/eps) + |y/a2|^(2/eps) = 1 placed by an SE(2) pose.
class Superquadric2 {
 public:
  Superquadric2(double a1, double a2, double eps, Pose2 pose = {});

  double a1() const { return a1_; }
  double a2() const { return a2_; }
  double eps() const { return eps_; }
  const Pose2& pose() const { return pose_; }
  Vec2 center() const { return pose_.translation; }

  Superquadric2 with_pose(const Pose2& pose) const { return {a1_, a2_, eps_, pose}; }

 private:
  double a1_, a2_, eps_;
  Pose2 pose_;
};

/// 3D superquadric with exponents (eps1: vertical profile, eps2: cross-section).
class Superquadric3 {
 public:
  Superquadric3(double a1, double a2, double a3, double eps1, double eps2,
                Pose3 pose = {});

  double a1() const { return a1_; }
  double a2() const { return a2_; }
  double a3() const { return a3_; }
  double eps1() const { return eps1_; }
  double eps2() const { return eps2_; }
  const Pose3& pose() const { return pose_; }
  Vec3 center() const { return pose_.translation; }

  Superquadric3 with_pose(const Pose3& pose) const {
    return {a1_, a2_, a3_, eps1_, eps2_, pose};
  }

 private:
  double a1_, a2_, a3_, eps1_, eps2_;
  Pose3 pose_;
};

// -- inside-outside ----------------------------------------------------------

/// Body-frame inside-outside value (negative inside, zero on the boundary).
double inside_outside_body(const Superquadric2& sq, const Vec2& body);
double inside_outside_body(const Superquadric3& sq, const Vec3& body);

double inside_outside(const Superquadric2& sq, const Vec2& world);
double inside_outside(const Superquadric3& sq, const Vec3& world);

/// Gradient of the body-frame inside-outside function w.r.t. the body point.
Vec2 inside_outside_gradient_body(const Superquadric2& sq, const Vec2& body);

// -- proxies -------------------------------------------------------------------

double wrap_gamma2(double gamma);
/// Maps (gamma1, gamma2) into [-pi/2, pi/2] x (-pi, pi].
Vec2 wrap_gamma3(const Vec2& gamma);

Vec2 proxy_point_body(const Superquadric2& sq, double gamma);
Vec3 proxy_point_body(const Superquadric3& sq, const Vec2& gamma);
/// Derivative of the body-frame proxy point w.r.t. gamma.
Vec2 proxy_tangent_body(const Superquadric2& sq, double gamma);

Vec2 proxy_point(const Superquadric2& sq, double gamma);
Vec3 proxy_point(const Superquadric3& sq, const Vec2& gamma);

/// Inverse of proxy_point_body for points on the boundary.
double gamma_of_body_point(const Superquadric2& sq, const Vec2& body);
Vec2 gamma_of_body_point(const Superquadric3& sq, const Vec3& body);

/// Boundary point whose outward normal is `direction` (world frame).
Vec2 support_point(const Superquadric2& sq, const Vec2& direction);
Vec3 support_point(const Superquadric3& sq, const Vec3& direction);

// -- stiffness -----------------------------------------------------------------

struct StiffnessParams {
  double k_min = 1.0e-7;
  double k_max = 1.0e3;
  double d0 = 1.0e-3;
  double d_prime = 0.05;

  void validate() const;
};

/// k(d) = k_min + (1 - tanh(d / d0)) / 2 * k_max.
double stiffness(double d, const StiffnessParams& p);
/// dk/dd.
double stiffness_slope(double d, const StiffnessParams& p);

// -- closest pair --------------------------------------------------------------

struct ProxyPair2 {
  double gamma_i = 0.0;
  double gamma_j = 0.0;
};

struct ProxyPair3 {
  Vec2 gamma_i = Vec2::Zero();
  Vec2 gamma_j = Vec2::Zero();
};

struct ClosestPairOptions {
  double tol = 1e-8;
  int max_iter = 200;
  /// Scan a fixed direction grid before refining. Disable only for warm starts
  /// whose previous answer is known to be close.
  bool global_search = true;
};

template <typename Point, typename Proxies>
struct ClosestPairResult {
  Proxies proxies;
  /// Signed gap: distance when disjoint, minus penetration depth when overlapping.
  double gap = 0.0;
  Point point_i;
  Point point_j;
  /// Unit separating direction pointing from SQ_i towards SQ_j.
  Point normal;
  bool converged = false;
  int iterations = 0;
};

using ClosestPair2 = ClosestPairResult<Vec2, ProxyPair2>;
using ClosestPair3 = ClosestPairResult<Vec3, ProxyPair3>;

ClosestPair2 closest_pair(const Superquadric2& sq_i, const Superquadric2& sq_j,
                          const ProxyPair2& init, const ClosestPairOptions& opts = {});
ClosestPair2 closest_pair(const Superquadric2& sq_i, const Superquadric2& sq_j,
                          const ClosestPairOptions& opts = {});
ClosestPair3 closest_pair(const Superquadric3& sq_i, const Superquadric3& sq_j,
                          const ProxyPair3& init, const ClosestPairOptions& opts = {});
ClosestPair3 closest_pair(const Superquadric3& sq_i, const Superquadric3& sq_j,
                          const ClosestPairOptions& opts = {});

// -- derived shapes --------------------------------------------------------------

/// Same-center ellipse (eps = 1) with axes scaled so it contains the SQ.
Superquadric2 circumscribing_ellipse(const Superquadric2& sq);

/// Vertical prism-like extrusion from z = 0 up to `height`.
Superquadric3 extrude(const Superquadric2& sq, double height, double eps_vertical);

}  // namespace wbam
