#pragma once

// DOB-based inner loop, thrust-limit and HOCBF rows, and the QP outer loop
// that produces (qdot_d, thetaddot_d).

#include <limits>
#include <string>
#include <vector>

#include "wbam/dynamics.hpp"
#include "wbam/qp_solver.hpp"
#include "wbam/vehicle.hpp"

namespace wbam {

using Vec9 = Eigen::Matrix<double, 9, 1>;
using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat12 = Eigen::Matrix<double, 12, 12>;
using Row9 = Eigen::Matrix<double, 1, 9>;
using Mat39 = Eigen::Matrix<double, 3, 9>;

struct GainSet {
  Mat6 Kp = Vec6(6, 6, 8, 80, 80, 35).asDiagonal();
  Mat6 Kd = Vec6(5, 5, 6, 35, 35, 20).asDiagonal();
  Vec6 a0 = Vec6::Ones();
  Vec6 a1 = Vec6::Constant(2.0);
  Vec6 eps = Vec6::Constant(0.95);

  void validate() const;
  Mat12 a_dob() const;
  /// Input matrix of either filter (12x6).
  Eigen::Matrix<double, 12, 6> b_dob() const;
  /// Per channel: time after a unit step until the filter output stays within `tol`.
  double settling_time(int channel, double tol) const;
};

struct SafetyParams {
  double T_lo = 1.0;
  double T_hi = 15.0;
  double alpha_co = 5.0;
  double sigma_co = 1.0;
  Mat6 Q_qdot = Vec6(1, 1, 1, 3, 3, 3).asDiagonal();
  Mat3 Q_thetaddot = 4.0 * Mat3::Identity();
  Mat6 Gamma_q = 4.0 * Mat6::Identity();
  Mat3 Gamma_theta = 5.0 * Mat3::Identity();
  /// Controller tick [Hz].
  double rate = 200.0;
  /// Collision rows kept per tick (nearest first); thrust rows come on top.
  int max_cbf_rows = QpSolver::kMaxRows - 12;

  void validate() const;
};

/// Stacked filter states: [filtered signal (6); its derivative (6)].
struct DobState {
  Vec12 q_dob = Vec12::Zero();
  Vec12 p_dob = Vec12::Zero();

  /// Filters at rest on a constant configuration q and applied wrench B T.
  static DobState steady(const ModelParams& nominal, const Vec6& q, const Vec6& wrench);
};

/// d_hat from the current filter states.
Vec6 dob_estimate(const DobState& dob, const Vec6& q, const Vec6& qdot, const ModelParams& nominal,
                  const GainSet& gains);
/// One Euler step of both filters driven by q and the wrench of the applied
/// thrust `T`; returns the new d_hat.
Vec6 dob_update(DobState& dob, const Vec6& q, const Vec6& qdot, const Vec6& T, const ModelParams& nominal,
                const GainSet& gains, double dt);

/// T = B^-1 [M (Kd edot + Kp e) + C + G - d_hat], e = q_d - q. Not clamped.
Vec6 inner_loop(const Vec6& q, const Vec6& qdot, const Vec6& q_d, const Vec6& qdot_d, const Vec6& d_hat,
                const GainSet& gains, const ModelParams& nominal);

/// A_lo x <= b_lo encodes T >= T_lo and A_hi x <= b_hi encodes T <= T_hi for
/// the decision x = [qdot_d; thetaddot_d].
struct ThrustRows {
  Eigen::Matrix<double, 6, 9> A_lo, A_hi;
  Vec6 b_lo, b_hi;
};

ThrustRows thrust_limit_rows(const Vec6& q, const Vec6& qdot, const Vec6& q_d, const Vec6& d_hat,
                             const GainSet& gains, const ModelParams& nominal, const SafetyParams& sp);

/// Position of a world point in the obstacle frame.
Vec3 delta_x(const Pose3& obstacle, const Vec3& world);

struct DeltaXDerivs {
  Vec3 dx = Vec3::Zero();
  Vec3 dx_dot = Vec3::Zero();
  /// ddx = A [qddot; thetaddot] + b.
  Mat39 A = Mat39::Zero();
  Vec3 b = Vec3::Zero();
};

/// Kinematics of the point at `local` (frame of vehicle SQ k) seen from the obstacle.
DeltaXDerivs delta_x_derivs(const VehicleGeometry& g, int k, const Vec3& local, const VehicleState& s,
                            const Pose3& obstacle);

struct HcoDerivs {
  double h = 0.0;
  Vec3 grad = Vec3::Zero();
  Mat3 hess = Mat3::Zero();
};

/// h = ln of the inside-outside bracket of `obstacle` at body-frame point dx.
/// Throws RuntimeFailure("degenerate proxy") at the center.
HcoDerivs h_co(const Superquadric3& obstacle, const Vec3& dx);

struct CbfRow {
  Row9 A = Row9::Zero();
  double b = 0.0;
  double h = 0.0;
  double hdot = 0.0;
  int i = 0;
  int j = 0;
};

/// Row A x + sigma_co <= b keeping hddot + 2 alpha hdot + alpha^2 h >= sigma_co.
CbfRow cbf_row(const DeltaXDerivs& d, const HcoDerivs& h, const Vec6& q, const Vec6& qdot, const Vec6& q_d,
               const GainSet& gains, const SafetyParams& sp);

/// Warm-started proxies for every (vehicle SQ, obstacle) pair. Pairs whose
/// bounding-box clearance exceeds `far_distance` are not solved; their gap is
/// the box lower bound and they produce no constraint row.
class ProxyTracker {
 public:
  ProxyTracker(const VehicleGeometry& g, std::vector<Superquadric3> obstacles, double far_distance = 1.0);

  /// Re-solves all near pairs at the given configuration.
  void update(const Vec6& q, const Vec3& theta);
  bool near(int i, int j) const { return near_[index(i, j)]; }
  /// Body-frame proxy on vehicle SQ i for obstacle j (frame of SQ i).
  Vec3 local_proxy(int i, int j) const;
  double gap(int i, int j) const { return gaps_[index(i, j)]; }
  const std::vector<Superquadric3>& obstacles() const { return obstacles_; }
  const VehicleGeometry& geometry() const { return geom_; }
  int obstacle_count() const { return static_cast<int>(obstacles_.size()); }

 private:
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * obstacles_.size() + j; }

  VehicleGeometry geom_;
  std::vector<Superquadric3> obstacles_;
  std::vector<ProxyPair3> proxies_;
  std::vector<double> gaps_;
  std::vector<bool> near_, fresh_;
  double far_distance_;
};

struct CbfAssembly {
  std::vector<CbfRow> rows;
  /// Smallest h over the near pairs, including rows dropped by the cap.
  double h_min = std::numeric_limits<double>::infinity();
  std::vector<std::pair<int, int>> degenerate;
};

/// One row per pair, capped to the smallest-h rows, sorted by (i, j).
CbfAssembly cbf_rows(const ProxyTracker& proxies, const VehicleState& s, const Vec6& q_d, const GainSet& gains,
                     const SafetyParams& sp);

struct OuterLoopResult {
  Vec6 qdot_d = Vec6::Zero();
  Vec3 thetaddot_d = Vec3::Zero();
  bool feasible = true;
  QpSolution qp;
};

/// Weighted tracking of the reference rates subject to thrust and collision rows.
/// On infeasibility returns 0.5 * `previous` and feasible = false.
OuterLoopResult outer_loop(const Vec6& q_t, const Vec3& theta_t, const Vec6& q_d, const Vec3& theta_d,
                           const Vec3& thetadot_d, const ThrustRows& thrust, const std::vector<CbfRow>& cbf,
                           const SafetyParams& sp, QpSolver& solver, const Vec9& previous);

struct TickOutput {
  Vec6 thrust = Vec6::Zero();
  ArmCommand arm;
  Vec6 d_hat = Vec6::Zero();
  double h_min = std::numeric_limits<double>::infinity();
  bool feasible = true;
  /// Constraint rows active at the QP solution: thrust rows 0..11, then "i:j" per CBF row.
  std::vector<std::string> active;
  /// max over CBF rows of (A x + sigma_co - b), positive when violated.
  double cbf_slack = 0.0;
};

/// Full controller state: DOB filters, desired references, QP warm start.
class SafetyController {
 public:
  SafetyController(const VehicleGeometry& geom, const ModelParams& nominal, const GainSet& gains,
                   const SafetyParams& sp, std::vector<Superquadric3> obstacles);

  /// Starts at rest: references at the current state, DOB at hover.
  void reset(const VehicleState& s);
  /// One tick: DOB update, rows, QP, inner loop, reference integration.
  /// `last_thrust` is the thrust applied since the previous tick.
  TickOutput tick(const VehicleState& s, const Vec6& last_thrust, const Vec6& q_t, const Vec3& theta_t);

  const Vec6& q_d() const { return q_d_; }
  const Vec3& theta_d() const { return theta_d_; }
  double dt() const { return 1.0 / sp_.rate; }

 private:
  VehicleGeometry geom_;
  ModelParams nominal_;
  GainSet gains_;
  SafetyParams sp_;
  ProxyTracker proxies_;
  QpSolver solver_;
  DobState dob_;
  Vec6 q_d_ = Vec6::Zero();
  Vec3 theta_d_ = Vec3::Zero();
  Vec3 thetadot_d_ = Vec3::Zero();
  Vec9 previous_ = Vec9::Zero();
};

}  // namespace wbam
