#pragma once

// Local planner on the equilibrium manifold of the manipulation potential
// W = W_proxy + W_tgt. The attractor u slides along the Voronoi solution path
// and the configuration follows the adaptive ODE; proxies follow -alpha dW/dGamma.

#include <vector>

#include "wbam/sq_geometry.hpp"
#include "wbam/vehicle.hpp"
#include "wbam/voronoi.hpp"

namespace wbam {

struct PlannerParams {
  Mat3 K_tgt = 800.0 * Vec3(2.0, 2.0, 1.0).asDiagonal().toDenseMatrix();
  double eta = 20.0;
  double alpha = 20.0;
  StiffnessParams stiffness;
  double T_d = 30.0;
  double h_t = 1.0;
  int n_steps = 400;
  double fd_grad = 1e-6;
  double fd_hess = 1e-4;
  /// Pre-relaxation stops once |dW/dz| drops below this.
  double relax_tol = 1e-4;
  int relax_max_iter = 500;
  /// Eigenvalues of d2W/dz2 are floored at this fraction of the largest one.
  double hessian_floor = 1e-4;
  VehicleGeometry vehicle;

  void validate() const;
};

/// Attractor pose [u_x, u_y, u_theta].
using Attractor = Vec3;

/// Configuration plus proxies. gamma[2 * (v * m + o)] belongs to vehicle SQ v,
/// gamma[2 * (v * m + o) + 1] to obstacle o, for m obstacles.
struct PlannerState {
  PlanarConfig z = PlanarConfig::Zero();
  Eigen::VectorXd gamma;
};

struct PlannerSample {
  double s = 0.0;
  PlanarConfig z = PlanarConfig::Zero();
  Eigen::VectorXd gamma;
  Attractor u = Attractor::Zero();
  /// |dW/dz| at the sample.
  double residual = 0.0;
};

struct PlannedTrajectory {
  std::vector<PlannerSample> samples;
  /// True when integration stopped early on a non-finite state.
  bool aborted = false;
  /// Wall-clock time spent in the RK4 loop only.
  double integration_seconds = 0.0;
};

/// Manipulation potential over a fixed obstacle set.
class Potential {
 public:
  Potential(std::vector<Superquadric2> obstacles, PlannerParams params);

  const std::vector<Superquadric2>& obstacles() const { return obstacles_; }
  const PlannerParams& params() const { return params_; }
  int gamma_size() const { return 2 * kVehicleSqCount * static_cast<int>(obstacles_.size()); }

  double w_proxy(const PlanarConfig& z, const Eigen::VectorXd& gamma) const;
  double w_target(const PlanarConfig& z, const Attractor& u) const;
  double value(const PlanarConfig& z, const Eigen::VectorXd& gamma, const Attractor& u) const;

  Eigen::Matrix<double, 5, 1> grad_z(const PlanarConfig& z, const Eigen::VectorXd& gamma,
                                     const Attractor& u) const;
  Eigen::VectorXd grad_gamma(const PlanarConfig& z, const Eigen::VectorXd& gamma) const;
  /// Symmetrized d2W/dz2.
  Eigen::Matrix<double, 5, 5> hess_zz(const PlanarConfig& z, const Eigen::VectorXd& gamma,
                                      const Attractor& u) const;
  /// d2W/(dz du), rows indexed by z.
  Eigen::Matrix<double, 5, 3> hess_zu(const PlanarConfig& z, const Attractor& u) const;
  /// Analytic dW_tgt/dz and d2W_tgt/dz2.
  Eigen::Matrix<double, 5, 1> target_grad(const PlanarConfig& z, const Attractor& u) const;
  Eigen::Matrix<double, 5, 5> target_hess(const PlanarConfig& z, const Attractor& u) const;

  /// Proxies set to the closest pair of every vehicle/obstacle pair.
  Eigen::VectorXd closest_proxies(const PlanarConfig& z) const;

 private:
  /// Proxy points depend on gamma only; cached across configuration perturbations.
  struct ProxyPoints {
    std::vector<Vec2> vehicle_body;
    std::vector<Vec2> obstacle_world;
  };
  ProxyPoints proxy_points(const Eigen::VectorXd& gamma) const;
  double sq_terms(int v, const Pose2& pose, const ProxyPoints& pts) const;
  double proxy_partial(const PlanarConfig& z, const ProxyPoints& pts, unsigned mask) const;

  std::vector<Superquadric2> obstacles_;
  std::vector<Superquadric2> vehicle_shapes_;
  PlannerParams params_;
};

/// Regularized Newton-type solve H^-1 b with |eigenvalues| floored at
/// floor * max|eigenvalue|. Throws RuntimeFailure("lost equilibrium manifold")
/// if H is not finite or vanishes.
Eigen::Matrix<double, 5, 1> regularized_solve(const Eigen::Matrix<double, 5, 5>& h,
                                              const Eigen::Matrix<double, 5, 1>& b, double floor);

/// Attractor schedule: one pose per path node, u_theta from the edge normals.
struct AttractorSchedule {
  std::vector<Attractor> poses;

  Attractor at(double s) const;
  /// du/ds on the segment containing s (right-continuous).
  Attractor rate(double s) const;
  /// Segment boundaries k / (n - 1) in (0, 1).
  std::vector<double> breakpoints() const;
};

/// Orients each edge normal (defined up to pi) closest to the previous
/// attractor heading, starting from `heading0`.
AttractorSchedule make_schedule(const SolutionPath& path, double heading0);

/// Damped Newton on z with u and proxies frozen until |dW/dz| < relax_tol.
PlanarConfig relax(const Potential& w, const PlanarConfig& z0, const Eigen::VectorXd& gamma,
                   const Attractor& u);

/// Integrates the augmented ODE from z0 (pre-relaxed internally) over s in [0, 1].
PlannedTrajectory integrate_em(const Potential& w, const PlanarConfig& z0,
                               const AttractorSchedule& schedule);

/// Smallest signed gap between the vehicle SQs at z and any obstacle.
double min_vehicle_gap(const VehicleGeometry& g, const PlanarConfig& z,
                       const std::vector<Superquadric2>& obstacles);

struct TargetPose {
  Vec6 q = Vec6::Zero();
  Vec3 theta = Vec3::Zero();
  bool clamped = false;
};

/// s = t / T_d with linear interpolation between samples.
TargetPose target_pose(const PlannedTrajectory& traj, double t, const PlannerParams& params);

}  // namespace wbam
