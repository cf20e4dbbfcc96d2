#include "wbam/safety_controller.hpp"

#include <algorithm>
#include <complex>
#include <cstdio>

namespace wbam {
namespace {

Mat6 allocation_inverse(const ModelParams& m, const Vec3& phi) {
  const Eigen::FullPivLU<Mat6> lu(allocation(m, phi));
  if (!lu.isInvertible()) throw RuntimeFailure("controller: singular allocation matrix");
  return lu.inverse();
}

// Monomial (|x| / a)^p and its first two derivatives in x.
struct Power {
  double f, d1, d2;
};

Power power_term(double x, double a, double p) {
  const double ax = std::abs(x) / a;
  if (ax == 0.0) return {0.0, 0.0, p == 2.0 ? 2.0 / (a * a) : 0.0};
  const double f = std::pow(ax, p);
  const double s = x < 0 ? -1.0 : 1.0;
  return {f, s * p * f / std::abs(x), p * (p - 1.0) * f / (x * x)};
}

}  // namespace

void GainSet::validate() const {
  auto pd = [](const Mat6& k) {
    return k.isApprox(k.transpose(), 1e-12) && Eigen::SelfAdjointEigenSolver<Mat6>(k).eigenvalues().minCoeff() > 0.0;
  };
  if (!pd(Kp) || !pd(Kd)) throw DomainError("gains: Kp and Kd must be symmetric positive definite");
  for (int i = 0; i < 6; ++i) {
    if (!(a0(i) > 0.0 && a1(i) > 0.0)) throw DomainError("gains: DOB a0, a1 must be positive");
    if (!(eps(i) > 0.0 && eps(i) < 1.0)) throw DomainError("gains: DOB eps must lie in (0, 1)");
    if (!(a1(i) * a1(i) / a0(i) > 0.5)) throw DomainError("gains: DOB requires a1^2 / a0 > 1/2");
  }
}

Mat12 GainSet::a_dob() const {
  Mat12 a = Mat12::Zero();
  a.topRightCorner<6, 6>() = Mat6::Identity();
  for (int i = 0; i < 6; ++i) {
    a(6 + i, i) = -a0(i) / (eps(i) * eps(i));
    a(6 + i, 6 + i) = -a1(i) / eps(i);
  }
  return a;
}

Eigen::Matrix<double, 12, 6> GainSet::b_dob() const {
  Eigen::Matrix<double, 12, 6> b = Eigen::Matrix<double, 12, 6>::Zero();
  for (int i = 0; i < 6; ++i) b(6 + i, i) = a0(i) / (eps(i) * eps(i));
  return b;
}

double GainSet::settling_time(int channel, double tol) const {
  if (channel < 0 || channel >= 6 || !(tol > 0.0 && tol < 1.0)) throw DomainError("gains: bad settling query");
  // Unit step of s^2 + c1 s + c0 with unit DC gain.
  using C = std::complex<double>;
  const double c1 = a1(channel) / eps(channel), c0 = a0(channel) / (eps(channel) * eps(channel));
  const C disc = std::sqrt(C(c1 * c1 - 4.0 * c0, 0.0));
  const C r1 = 0.5 * (-c1 + disc), r2 = 0.5 * (-c1 - disc);
  const bool repeated = std::abs(r1 - r2) < 1e-9 * std::abs(r1);
  auto error = [&](double t) {
    if (repeated) return std::abs((1.0 - r1.real() * t) * std::exp(r1.real() * t));
    return std::abs(((r2 * std::exp(r1 * t) - r1 * std::exp(r2 * t)) / (r2 - r1)).real());
  };
  const double slow = std::min(std::abs(r1.real()), std::abs(r2.real()));
  const double horizon = 50.0 / slow, h = 1e-4 / std::max(std::abs(r1), std::abs(r2));
  double last = 0.0;
  for (double t = 0.0; t < horizon; t += h) {
    if (error(t) > tol) last = t;
  }
  // Refine the last crossing.
  double lo = last, hi = last + h;
  for (int k = 0; k < 60; ++k) {
    const double mid = 0.5 * (lo + hi);
    (error(mid) > tol ? lo : hi) = mid;
  }
  return hi;
}

void SafetyParams::validate() const {
  if (!(T_lo < T_hi)) throw DomainError("safety: T_lo must be below T_hi");
  if (!(alpha_co > 0.0) || !(sigma_co > 0.0)) throw DomainError("safety: alpha_co and sigma_co must be positive");
  auto pd6 = [](const Mat6& k) { return Eigen::SelfAdjointEigenSolver<Mat6>(k).eigenvalues().minCoeff() > 0.0; };
  auto pd3 = [](const Mat3& k) { return Eigen::SelfAdjointEigenSolver<Mat3>(k).eigenvalues().minCoeff() > 0.0; };
  if (!pd6(Q_qdot) || !pd3(Q_thetaddot) || !pd6(Gamma_q) || !pd3(Gamma_theta)) {
    throw DomainError("safety: weights and target gains must be positive definite");
  }
  if (!(rate > 0.0)) throw DomainError("safety: rate must be positive");
  if (max_cbf_rows < 0 || max_cbf_rows + 12 > QpSolver::kMaxRows) throw DomainError("safety: max_cbf_rows out of range");
}

DobState DobState::steady(const ModelParams& nominal, const Vec6& q, const Vec6& wrench) {
  DobState d;
  d.q_dob.head<6>() = q;
  d.p_dob.head<6>() = mass_matrix(nominal, q.tail<3>()).ldlt().solve(wrench);
  return d;
}

Vec6 dob_estimate(const DobState& dob, const Vec6& q, const Vec6& qdot, const ModelParams& nominal,
                  const GainSet& gains) {
  const Vec3 phi = q.tail<3>();
  const Vec12 qdob_dot = gains.a_dob() * dob.q_dob + gains.b_dob() * q;
  return -mass_matrix(nominal, phi) * (dob.p_dob.head<6>() - qdob_dot.tail<6>()) +
         coriolis_vec(nominal, phi, qdot.tail<3>()) + gravity_vec(nominal);
}

Vec6 dob_update(DobState& dob, const Vec6& q, const Vec6& qdot, const Vec6& T, const ModelParams& nominal,
                const GainSet& gains, double dt) {
  if (!(dt > 0.0)) throw DomainError("dob: dt must be positive");
  const Vec3 phi = q.tail<3>();
  const Vec6 u = mass_matrix(nominal, phi).ldlt().solve(allocation(nominal, phi) * T);
  const Mat12 a = gains.a_dob();
  const auto b = gains.b_dob();
  dob.q_dob += dt * (a * dob.q_dob + b * q);
  dob.p_dob += dt * (a * dob.p_dob + b * u);
  if (!dob.q_dob.allFinite() || !dob.p_dob.allFinite()) throw RuntimeFailure("dob: non-finite state");
  return dob_estimate(dob, q, qdot, nominal, gains);
}

Vec6 inner_loop(const Vec6& q, const Vec6& qdot, const Vec6& q_d, const Vec6& qdot_d, const Vec6& d_hat,
                const GainSet& gains, const ModelParams& nominal) {
  const Vec3 phi = q.tail<3>();
  const Vec6 w = mass_matrix(nominal, phi) * (gains.Kd * (qdot_d - qdot) + gains.Kp * (q_d - q)) +
                 coriolis_vec(nominal, phi, qdot.tail<3>()) + gravity_vec(nominal) - d_hat;
  return allocation_inverse(nominal, phi) * w;
}

ThrustRows thrust_limit_rows(const Vec6& q, const Vec6& qdot, const Vec6& q_d, const Vec6& d_hat,
                             const GainSet& gains, const ModelParams& nominal, const SafetyParams& sp) {
  const Vec3 phi = q.tail<3>();
  const Mat6 binv = allocation_inverse(nominal, phi);
  const Mat6 m = mass_matrix(nominal, phi);
  const Vec6 c = binv * (m * (-gains.Kd * qdot + gains.Kp * (q_d - q)) + coriolis_vec(nominal, phi, qdot.tail<3>()) +
                         gravity_vec(nominal) - d_hat);
  ThrustRows r;
  r.A_lo.setZero();
  r.A_lo.leftCols<6>() = -binv * m * gains.Kd;
  r.A_hi = -r.A_lo;
  r.b_lo = c - sp.T_lo * Vec6::Ones();
  r.b_hi = sp.T_hi * Vec6::Ones() - c;
  return r;
}

Vec3 delta_x(const Pose3& obstacle, const Vec3& world) { return obstacle.to_body(world); }

DeltaXDerivs delta_x_derivs(const VehicleGeometry& g, int k, const Vec3& local, const VehicleState& s,
                            const Pose3& obstacle) {
  const Vec3 phi = s.q.tail<3>(), phidot = s.qdot.tail<3>();
  const Mat3 r = rotation_zyx(phi), q = euler_rate_map(phi);
  const Vec3 w = q * phidot;
  const BodyPoint bp = body_point(g, k, local, s.theta, s.thetadot);
  const Mat3 rjt = obstacle.rotation.transpose();
  const Vec3 vdot = bp.jacobian * s.thetadot;

  DeltaXDerivs d;
  d.dx = rjt * (s.q.head<3>() + r * bp.v - obstacle.translation);
  d.dx_dot = rjt * (s.qdot.head<3>() + r * (w.cross(bp.v) + vdot));
  d.A.leftCols<3>() = rjt;
  d.A.middleCols<3>(3) = -rjt * r * skew(bp.v) * q;
  d.A.rightCols<3>() = rjt * r * bp.jacobian;
  d.b = rjt * r *
        (-skew(bp.v) * euler_rate_map_dot(phi, phidot) * phidot + w.cross(w.cross(bp.v)) + 2.0 * w.cross(vdot) +
         bp.bias);
  return d;
}

HcoDerivs h_co(const Superquadric3& obstacle, const Vec3& dx) {
  const double e1 = obstacle.eps1(), e2 = obstacle.eps2();
  const Power u = power_term(dx(0), obstacle.a1(), 2.0 / e2);
  const Power v = power_term(dx(1), obstacle.a2(), 2.0 / e2);
  const Power w = power_term(dx(2), obstacle.a3(), 2.0 / e1);
  const double r = e2 / e1;
  const double s = u.f + v.f;
  const double f = (s > 0.0 ? std::pow(s, r) : 0.0) + w.f;
  if (!(f > 0.0) || !std::isfinite(f)) throw RuntimeFailure("degenerate proxy");

  Vec3 gf = Vec3::Zero();
  Mat3 hf = Mat3::Zero();
  if (s > 0.0) {
    const double g1 = r * std::pow(s, r - 1.0), g2 = r * (r - 1.0) * std::pow(s, r - 2.0);
    gf(0) = g1 * u.d1;
    gf(1) = g1 * v.d1;
    hf(0, 0) = g2 * u.d1 * u.d1 + g1 * u.d2;
    hf(1, 1) = g2 * v.d1 * v.d1 + g1 * v.d2;
    hf(0, 1) = hf(1, 0) = g2 * u.d1 * v.d1;
  }
  gf(2) = w.d1;
  hf(2, 2) = w.d2;

  HcoDerivs out;
  out.h = std::log(f);
  out.grad = gf / f;
  out.hess = hf / f - gf * gf.transpose() / (f * f);
  return out;
}

CbfRow cbf_row(const DeltaXDerivs& d, const HcoDerivs& h, const Vec6& q, const Vec6& qdot, const Vec6& q_d,
               const GainSet& gains, const SafetyParams& sp) {
  const Eigen::RowVector3d g = h.grad.transpose();
  const Eigen::Matrix<double, 1, 6> gq = g * d.A.leftCols<6>();
  CbfRow row;
  row.h = h.h;
  row.hdot = g.dot(d.dx_dot.transpose());
  row.A.head<6>() = -gq * gains.Kd;
  row.A.tail<3>() = -g * d.A.rightCols<3>();
  const double a = sp.alpha_co;
  row.b = gq.dot((-gains.Kd * qdot + gains.Kp * (q_d - q)).transpose()) + g.dot(d.b.transpose()) +
          d.dx_dot.dot(h.hess * d.dx_dot) +
          2.0 * a * row.hdot + a * a * row.h;
  return row;
}

ProxyTracker::ProxyTracker(const VehicleGeometry& g, std::vector<Superquadric3> obstacles, double far_distance)
    : geom_(g), obstacles_(std::move(obstacles)), far_distance_(far_distance) {
  const std::size_t n = kVehicleSqCount * obstacles_.size();
  proxies_.assign(n, ProxyPair3{});
  gaps_.assign(n, std::numeric_limits<double>::infinity());
  near_.assign(n, false);
  fresh_.assign(n, true);
}

void ProxyTracker::update(const Vec6& q, const Vec3& theta) {
  const auto sqs = vehicle_sqs3(geom_, q, theta);
  ClosestPairOptions warm;
  warm.global_search = false;
  warm.tol = 1e-5;
  warm.max_iter = 20;
  for (int i = 0; i < kVehicleSqCount; ++i) {
    const Superquadric3& v = sqs[i];
    const double radius = Vec3(v.a1(), v.a2(), v.a3()).norm();
    for (int j = 0; j < obstacle_count(); ++j) {
      const std::size_t k = index(i, j);
      const Superquadric3& o = obstacles_[j];
      // The SQ lies inside its axis box, so this bounds the gap from below.
      const Vec3 local = o.pose().to_body(v.center()).cwiseAbs() - Vec3(o.a1(), o.a2(), o.a3());
      const double bound = local.cwiseMax(0.0).norm() - radius;
      if (bound > far_distance_) {
        near_[k] = false;
        fresh_[k] = true;
        gaps_[k] = bound;
        continue;
      }
      const ClosestPair3 cp = fresh_[k] ? closest_pair(v, o) : closest_pair(v, o, proxies_[k], warm);
      proxies_[k] = cp.proxies;
      gaps_[k] = cp.gap;
      near_[k] = true;
      fresh_[k] = false;
    }
  }
}

Vec3 ProxyTracker::local_proxy(int i, int j) const {
  return proxy_point_body(vehicle_shape3(geom_, i), proxies_[index(i, j)].gamma_i);
}

CbfAssembly cbf_rows(const ProxyTracker& proxies, const VehicleState& s, const Vec6& q_d, const GainSet& gains,
                     const SafetyParams& sp) {
  CbfAssembly out;
  std::vector<CbfRow> all;
  for (int i = 0; i < kVehicleSqCount; ++i) {
    for (int j = 0; j < proxies.obstacle_count(); ++j) {
      if (!proxies.near(i, j)) continue;
      const Superquadric3& obs = proxies.obstacles()[j];
      try {
        const DeltaXDerivs d = delta_x_derivs(proxies.geometry(), i, proxies.local_proxy(i, j), s, obs.pose());
        const HcoDerivs h = h_co(obs, d.dx);
        CbfRow row = cbf_row(d, h, s.q, s.qdot, q_d, gains, sp);
        row.i = i;
        row.j = j;
        out.h_min = std::min(out.h_min, row.h);
        all.push_back(row);
      } catch (const RuntimeFailure&) {
        out.degenerate.emplace_back(i, j);
      }
    }
  }
  const std::size_t cap = static_cast<std::size_t>(sp.max_cbf_rows);
  if (all.size() > cap) {
    std::stable_sort(all.begin(), all.end(), [](const CbfRow& a, const CbfRow& b) { return a.h < b.h; });
    all.resize(cap);
  }
  std::sort(all.begin(), all.end(), [](const CbfRow& a, const CbfRow& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  out.rows = std::move(all);
  return out;
}

OuterLoopResult outer_loop(const Vec6& q_t, const Vec3& theta_t, const Vec6& q_d, const Vec3& theta_d,
                           const Vec3& thetadot_d, const ThrustRows& thrust, const std::vector<CbfRow>& cbf,
                           const SafetyParams& sp, QpSolver& solver, const Vec9& previous) {
  Vec9 ref;
  ref.head<6>() = sp.Gamma_q * (q_t - q_d);
  ref.tail<3>() = -2.0 * sp.Gamma_theta * thetadot_d + sp.Gamma_theta * sp.Gamma_theta * (theta_t - theta_d);
  Eigen::Matrix<double, 9, 9> w = Eigen::Matrix<double, 9, 9>::Zero();
  w.topLeftCorner<6, 6>() = sp.Q_qdot;
  w.bottomRightCorner<3, 3>() = sp.Q_thetaddot;

  QpProblem p;
  p.H = 2.0 * w;
  p.g = -2.0 * w * ref;
  const int m = 12 + static_cast<int>(cbf.size());
  p.A.resize(m, 9);
  p.b.resize(m);
  p.A.topRows<6>() = thrust.A_lo;
  p.b.head<6>() = thrust.b_lo;
  p.A.middleRows<6>(6) = thrust.A_hi;
  p.b.segment<6>(6) = thrust.b_hi;
  for (std::size_t k = 0; k < cbf.size(); ++k) {
    p.A.row(12 + k) = cbf[k].A;
    p.b(12 + k) = cbf[k].b - sp.sigma_co;
  }

  OuterLoopResult out;
  out.qp = solver.solve(p);
  if (out.qp.status == QpStatus::kOptimal) {
    out.qdot_d = out.qp.x.head<6>();
    out.thetaddot_d = out.qp.x.tail<3>();
  } else {
    out.feasible = false;
    out.qdot_d = 0.5 * previous.head<6>();
    out.thetaddot_d = 0.5 * previous.tail<3>();
    solver.reset();
  }
  return out;
}

SafetyController::SafetyController(const VehicleGeometry& geom, const ModelParams& nominal, const GainSet& gains,
                                   const SafetyParams& sp, std::vector<Superquadric3> obstacles)
    : geom_(geom), nominal_(nominal), gains_(gains), sp_(sp), proxies_(geom, std::move(obstacles)) {
  nominal_.validate();
  gains_.validate();
  sp_.validate();
}

void SafetyController::reset(const VehicleState& s) {
  q_d_ = s.q;
  theta_d_ = s.theta;
  thetadot_d_ = s.thetadot;
  previous_.setZero();
  solver_.reset();
  dob_ = DobState::steady(nominal_, s.q, gravity_vec(nominal_));
}

TickOutput SafetyController::tick(const VehicleState& s, const Vec6& last_thrust, const Vec6& q_t,
                                  const Vec3& theta_t) {
  const double dt = 1.0 / sp_.rate;
  TickOutput out;
  out.d_hat = dob_update(dob_, s.q, s.qdot, last_thrust, nominal_, gains_, dt);

  proxies_.update(s.q, s.theta);
  const CbfAssembly cbf = cbf_rows(proxies_, s, q_d_, gains_, sp_);
  out.h_min = cbf.h_min;

  const ThrustRows thrust = thrust_limit_rows(s.q, s.qdot, q_d_, out.d_hat, gains_, nominal_, sp_);
  const OuterLoopResult ol =
      outer_loop(q_t, theta_t, q_d_, theta_d_, thetadot_d_, thrust, cbf.rows, sp_, solver_, previous_);
  out.feasible = ol.feasible;
  previous_ << ol.qdot_d, ol.thetaddot_d;

  if (ol.feasible) {
    char buf[32];
    for (int r : ol.qp.active_set) {
      if (r < 6) {
        std::snprintf(buf, sizeof buf, "T_lo:%d", r);
      } else if (r < 12) {
        std::snprintf(buf, sizeof buf, "T_hi:%d", r - 6);
      } else {
        const CbfRow& c = cbf.rows[r - 12];
        std::snprintf(buf, sizeof buf, "co:%d:%d", c.i, c.j);
      }
      out.active.emplace_back(buf);
    }
  }
  out.cbf_slack = -std::numeric_limits<double>::infinity();
  for (const CbfRow& c : cbf.rows) out.cbf_slack = std::max(out.cbf_slack, c.A.dot(previous_) + sp_.sigma_co - c.b);

  out.thrust = inner_loop(s.q, s.qdot, q_d_, ol.qdot_d, out.d_hat, gains_, nominal_);
  out.arm.theta = theta_d_;
  out.arm.thetadot = thetadot_d_;
  out.arm.thetaddot = ol.thetaddot_d;

  q_d_ += dt * ol.qdot_d;
  thetadot_d_ += dt * ol.thetaddot_d;
  theta_d_ += dt * thetadot_d_;
  return out;
}

}  // namespace wbam
