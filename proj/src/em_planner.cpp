#include "wbam/em_planner.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <limits>
#include <string>

namespace wbam {
namespace {

using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

// Configuration coordinates each vehicle SQ depends on (bit c = z(c)).
constexpr unsigned kBladeDeps = 0b00111;
constexpr unsigned kLink1Deps = 0b01111;
constexpr unsigned kLink2Deps = 0b11111;

unsigned deps_of(int v) { return v < 6 ? kBladeDeps : (v == 6 ? kLink1Deps : kLink2Deps); }

// Vehicle SQs whose pose depends on every coordinate in `coords`.
unsigned sq_mask(unsigned coords) {
  unsigned mask = 0;
  for (int v = 0; v < kVehicleSqCount; ++v) {
    if ((deps_of(v) & coords) == coords) mask |= 1u << v;
  }
  return mask;
}

Vec3 eef_vector(const VehicleGeometry& g, const PlanarConfig& z) {
  const PlanarPose e = forward_kinematics_eef(g, z);
  return Vec3(e.position.x(), e.position.y(), e.heading);
}

// Planar end-effector pose [x, y, heading] with its Jacobian and the
// position Hessians (heading is linear in z).
struct EefDerivs {
  Vec3 e;
  Eigen::Matrix<double, 3, 5> jac = Eigen::Matrix<double, 3, 5>::Zero();
  std::array<Mat5, 2> hess;
};

EefDerivs eef_derivs(const VehicleGeometry& g, const PlanarConfig& z) {
  const double a0 = z(2), a1 = a0 + z(3), a2 = a1 + z(4);
  const Vec2 t[3] = {g.arm_base * Vec2(std::cos(a0), std::sin(a0)), g.l1 * Vec2(std::cos(a1), std::sin(a1)),
                     g.l2 * Vec2(std::cos(a2), std::sin(a2))};
  // Angle k depends on z(2) .. z(2 + k).
  EefDerivs out;
  const Vec2 pos = Vec2(z(0), z(1)) + t[0] + t[1] + t[2];
  out.e = Vec3(pos.x(), pos.y(), wrap_angle(a2));
  out.jac(0, 0) = 1.0;
  out.jac(1, 1) = 1.0;
  out.hess[0].setZero();
  out.hess[1].setZero();
  for (int k = 0; k < 3; ++k) {
    const Vec2 perp(-t[k].y(), t[k].x());
    for (int c = 2; c <= 2 + k; ++c) {
      out.jac.block<2, 1>(0, c) += perp;
      for (int d = 2; d <= 2 + k; ++d) {
        out.hess[0](c, d) -= t[k].x();
        out.hess[1](c, d) -= t[k].y();
      }
    }
  }
  out.jac.block<1, 3>(2, 2).setOnes();
  return out;
}

Vec3 target_residual(const Attractor& u, const Vec3& e) {
  Vec3 r = u - e;
  r(2) = wrap_angle(r(2));
  return r;
}

}  // namespace

void PlannerParams::validate() const {
  if (!K_tgt.isApprox(K_tgt.transpose()) ||
      Eigen::SelfAdjointEigenSolver<Mat3>(K_tgt).eigenvalues().minCoeff() <= 0.0) {
    throw DomainError("planner: K_tgt must be symmetric positive definite");
  }
  if (!(eta > 0.0)) throw DomainError("planner: eta must be positive");
  if (!(alpha > 0.0)) throw DomainError("planner: alpha must be positive");
  if (!(T_d > 0.0)) throw DomainError("planner: T_d must be positive");
  if (!std::isfinite(h_t)) throw DomainError("planner: h_t must be finite");
  if (n_steps < 1) throw DomainError("planner: n_steps must be at least 1");
  if (!(fd_grad > 0.0) || !(fd_hess > 0.0)) throw DomainError("planner: FD steps must be positive");
  if (!(hessian_floor > 0.0 && hessian_floor < 1.0)) {
    throw DomainError("planner: hessian_floor must lie in (0, 1)");
  }
  stiffness.validate();
  vehicle.validate();
}

Potential::Potential(std::vector<Superquadric2> obstacles, PlannerParams params)
    : obstacles_(std::move(obstacles)), params_(std::move(params)) {
  params_.validate();
  for (int v = 0; v < kVehicleSqCount; ++v) vehicle_shapes_.push_back(vehicle_shape2(params_.vehicle, v));
}

Potential::ProxyPoints Potential::proxy_points(const Eigen::VectorXd& gamma) const {
  const int m = static_cast<int>(obstacles_.size());
  ProxyPoints pts;
  pts.vehicle_body.resize(static_cast<std::size_t>(kVehicleSqCount * m));
  pts.obstacle_world.resize(pts.vehicle_body.size());
  for (int v = 0; v < kVehicleSqCount; ++v) {
    for (int o = 0; o < m; ++o) {
      const int k = v * m + o;
      pts.vehicle_body[k] = proxy_point_body(vehicle_shapes_[v], gamma(2 * k));
      pts.obstacle_world[k] = proxy_point(obstacles_[o], gamma(2 * k + 1));
    }
  }
  return pts;
}

double Potential::sq_terms(int v, const Pose2& pose, const ProxyPoints& pts) const {
  const int m = static_cast<int>(obstacles_.size());
  double sum = 0.0;
  for (int o = 0; o < m; ++o) {
    const int k = v * m + o;
    const Vec2 pv = pose.to_world(pts.vehicle_body[k]);
    const Vec2& po = pts.obstacle_world[k];
    const double d = inside_outside(obstacles_[o], pv);
    sum += 0.5 * stiffness(d - params_.stiffness.d_prime, params_.stiffness) * (pv - po).squaredNorm();
  }
  return sum;
}

double Potential::proxy_partial(const PlanarConfig& z, const ProxyPoints& pts, unsigned mask) const {
  const auto poses = vehicle_poses2(params_.vehicle, z);
  double sum = 0.0;
  for (int v = 0; v < kVehicleSqCount; ++v) {
    if (mask & (1u << v)) sum += sq_terms(v, poses[v], pts);
  }
  return sum;
}

double Potential::w_proxy(const PlanarConfig& z, const Eigen::VectorXd& gamma) const {
  if (gamma.size() != gamma_size()) throw DomainError("planner: proxy vector has the wrong size");
  return proxy_partial(z, proxy_points(gamma), (1u << kVehicleSqCount) - 1);
}

double Potential::w_target(const PlanarConfig& z, const Attractor& u) const {
  const Vec3 r = target_residual(u, eef_vector(params_.vehicle, z));
  return 0.5 * r.dot(params_.K_tgt * r);
}

double Potential::value(const PlanarConfig& z, const Eigen::VectorXd& gamma,
                        const Attractor& u) const {
  return w_proxy(z, gamma) + w_target(z, u);
}

Eigen::Matrix<double, 5, 1> Potential::grad_z(const PlanarConfig& z, const Eigen::VectorXd& gamma,
                                              const Attractor& u) const {
  if (gamma.size() != gamma_size()) throw DomainError("planner: proxy vector has the wrong size");
  const double h = params_.fd_grad;
  const ProxyPoints pts = proxy_points(gamma);
  Vec5 g;
  for (int c = 0; c < 5; ++c) {
    const unsigned mask = sq_mask(1u << c);
    PlanarConfig zp = z, zm = z;
    zp(c) += h;
    zm(c) -= h;
    const double fp = proxy_partial(zp, pts, mask);
    const double fm = proxy_partial(zm, pts, mask);
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw RuntimeFailure("planner: non-finite potential along coordinate " + std::to_string(c));
    }
    g(c) = (fp - fm) / (2.0 * h);
  }
  return g + target_grad(z, u);
}

Eigen::VectorXd Potential::grad_gamma(const PlanarConfig& z, const Eigen::VectorXd& gamma) const {
  if (gamma.size() != gamma_size()) throw DomainError("planner: proxy vector has the wrong size");
  const int m = static_cast<int>(obstacles_.size());
  const auto poses = vehicle_poses2(params_.vehicle, z);
  const double h = params_.fd_grad;
  const StiffnessParams& sp = params_.stiffness;
  Eigen::VectorXd g(gamma.size());
  for (int v = 0; v < kVehicleSqCount; ++v) {
    for (int o = 0; o < m; ++o) {
      const int idx = 2 * (v * m + o);
      auto term = [&](double gv, double go) {
        const Vec2 pv = poses[v].to_world(proxy_point_body(vehicle_shapes_[v], gv));
        const Vec2 po = proxy_point(obstacles_[o], go);
        const double d = inside_outside(obstacles_[o], pv);
        return 0.5 * stiffness(d - sp.d_prime, sp) * (pv - po).squaredNorm();
      };
      const double gv = gamma(idx), go = gamma(idx + 1);
      g(idx) = (term(gv + h, go) - term(gv - h, go)) / (2.0 * h);
      g(idx + 1) = (term(gv, go + h) - term(gv, go - h)) / (2.0 * h);
    }
  }
  return g;
}

Eigen::Matrix<double, 5, 5> Potential::hess_zz(const PlanarConfig& z, const Eigen::VectorXd& gamma,
                                               const Attractor& u) const {
  if (gamma.size() != gamma_size()) throw DomainError("planner: proxy vector has the wrong size");
  const double h = params_.fd_hess;
  const ProxyPoints pts = proxy_points(gamma);
  Mat5 hm;
  for (int c = 0; c < 5; ++c) {
    const unsigned mask = sq_mask(1u << c);
    auto f = [&](const PlanarConfig& zz) { return proxy_partial(zz, pts, mask); };
    PlanarConfig zp = z, zm = z;
    zp(c) += h;
    zm(c) -= h;
    hm(c, c) = (f(zp) - 2.0 * f(z) + f(zm)) / (h * h);
  }
  for (int c = 0; c < 5; ++c) {
    for (int d = c + 1; d < 5; ++d) {
      const unsigned mask = sq_mask((1u << c) | (1u << d));
      auto f = [&](double sc, double sd) {
        PlanarConfig zz = z;
        zz(c) += sc * h;
        zz(d) += sd * h;
        return proxy_partial(zz, pts, mask);
      };
      hm(c, d) = hm(d, c) = (f(1, 1) - f(1, -1) - f(-1, 1) + f(-1, -1)) / (4.0 * h * h);
    }
  }
  hm += target_hess(z, u);
  if (!hm.allFinite()) throw RuntimeFailure("planner: non-finite Hessian");
  return 0.5 * (hm + hm.transpose());
}

Eigen::Matrix<double, 5, 1> Potential::target_grad(const PlanarConfig& z, const Attractor& u) const {
  const EefDerivs d = eef_derivs(params_.vehicle, z);
  return -d.jac.transpose() * (params_.K_tgt * target_residual(u, d.e));
}

Eigen::Matrix<double, 5, 5> Potential::target_hess(const PlanarConfig& z, const Attractor& u) const {
  const EefDerivs d = eef_derivs(params_.vehicle, z);
  const Vec3 kr = params_.K_tgt * target_residual(u, d.e);
  return d.jac.transpose() * params_.K_tgt * d.jac - kr(0) * d.hess[0] - kr(1) * d.hess[1];
}

Eigen::Matrix<double, 5, 3> Potential::hess_zu(const PlanarConfig& z, const Attractor&) const {
  return -eef_derivs(params_.vehicle, z).jac.transpose() * params_.K_tgt;
}

Eigen::VectorXd Potential::closest_proxies(const PlanarConfig& z) const {
  const int m = static_cast<int>(obstacles_.size());
  const auto sqs = vehicle_sqs2(params_.vehicle, z);
  Eigen::VectorXd gamma(gamma_size());
  for (int v = 0; v < kVehicleSqCount; ++v) {
    for (int o = 0; o < m; ++o) {
      const ClosestPair2 cp = closest_pair(sqs[v], obstacles_[o]);
      gamma(2 * (v * m + o)) = cp.proxies.gamma_i;
      gamma(2 * (v * m + o) + 1) = cp.proxies.gamma_j;
    }
  }
  return gamma;
}

Eigen::Matrix<double, 5, 1> regularized_solve(const Eigen::Matrix<double, 5, 5>& h,
                                              const Eigen::Matrix<double, 5, 1>& b, double floor) {
  if (!h.allFinite() || !b.allFinite()) throw RuntimeFailure("lost equilibrium manifold");
  const Eigen::SelfAdjointEigenSolver<Mat5> es(h);
  const Vec5 lam = es.eigenvalues().cwiseAbs();
  const double top = lam.maxCoeff();
  if (!(top > 0.0)) throw RuntimeFailure("lost equilibrium manifold");
  const Vec5 inv = lam.cwiseMax(floor * top).cwiseInverse();
  if (inv.maxCoeff() * top > 1e10) throw RuntimeFailure("lost equilibrium manifold");
  return es.eigenvectors() * inv.asDiagonal() * (es.eigenvectors().transpose() * b);
}

Attractor AttractorSchedule::at(double s) const {
  const int n = static_cast<int>(poses.size());
  if (n == 1) return poses[0];
  const double x = std::clamp(s, 0.0, 1.0) * (n - 1);
  const int seg = std::min(static_cast<int>(std::floor(x)), n - 2);
  return poses[seg] + (x - seg) * (poses[seg + 1] - poses[seg]);
}

Attractor AttractorSchedule::rate(double s) const {
  const int n = static_cast<int>(poses.size());
  if (n == 1) return Attractor::Zero();
  const int seg = std::clamp(static_cast<int>(std::floor(s * (n - 1))), 0, n - 2);
  return (n - 1) * (poses[seg + 1] - poses[seg]);
}

std::vector<double> AttractorSchedule::breakpoints() const {
  std::vector<double> out;
  const int n = static_cast<int>(poses.size());
  for (int k = 1; k + 1 < n; ++k) out.push_back(static_cast<double>(k) / (n - 1));
  return out;
}

AttractorSchedule make_schedule(const SolutionPath& path, double heading0) {
  if (!path.found || path.nodes.empty()) throw DomainError("planner: no solution path");
  AttractorSchedule sched;
  double prev = heading0;
  const std::size_t n = path.nodes.size();
  for (std::size_t i = 0; i < n; ++i) {
    double angle = prev;
    if (!path.edges.empty()) {
      const double a = path.edges[std::min(i, path.edges.size() - 1)].normal_angle;
      // Normal is defined up to pi: take the representative nearest to prev.
      double d = wrap_angle(a - prev);
      if (d > kPi / 2) d -= kPi;
      if (d <= -kPi / 2) d += kPi;
      angle = prev + d;
    }
    sched.poses.emplace_back(path.nodes[i].x(), path.nodes[i].y(), angle);
    prev = angle;
  }
  return sched;
}

PlanarConfig relax(const Potential& w, const PlanarConfig& z0, const Eigen::VectorXd& gamma,
                   const Attractor& u) {
  const PlannerParams& p = w.params();
  PlanarConfig z = z0;
  for (int it = 0; it < p.relax_max_iter; ++it) {
    const Vec5 g = w.grad_z(z, gamma, u);
    if (g.norm() < p.relax_tol) return z;
    const Vec5 step = regularized_solve(w.hess_zz(z, gamma, u), g, p.hessian_floor);
    const double w0 = w.value(z, gamma, u);
    double t = 1.0;
    PlanarConfig cand = z - step;
    while (t > 1e-6 && !(w.value(cand, gamma, u) <= w0)) {
      t *= 0.5;
      cand = z - t * step;
    }
    if (t <= 1e-6) {
      // Newton direction stalled: fall back to a short gradient step.
      cand = z - 1e-4 * g / std::max(1.0, g.norm());
    }
    z = cand;
  }
  const double res = w.grad_z(z, gamma, u).norm();
  if (res >= p.relax_tol) {
    throw RuntimeFailure("planner: pre-relaxation did not converge (|dW/dz| = " +
                         std::to_string(res) + ")");
  }
  return z;
}

PlannedTrajectory integrate_em(const Potential& w, const PlanarConfig& z0,
                               const AttractorSchedule& schedule) {
  const PlannerParams& p = w.params();
  if (!z0.allFinite()) throw DomainError("planner: non-finite initial configuration");
  const Attractor u0 = schedule.at(0.0);

  // Proxies start at the closest pairs; the configuration is relaxed onto the
  // manifold for u(0) twice so proxies and configuration agree.
  Eigen::VectorXd gamma = w.closest_proxies(z0);
  PlanarConfig z = relax(w, z0, gamma, u0);
  gamma = w.closest_proxies(z);
  z = relax(w, z, gamma, u0);

  struct Deriv {
    Vec5 dz;
    Eigen::VectorXd dgamma;
  };
  auto rhs = [&](double s, const PlanarConfig& zz, const Eigen::VectorXd& gg, const Attractor& du) {
    const Attractor u = schedule.at(s);
    const Vec5 g = w.grad_z(zz, gg, u);
    const Mat5 h = w.hess_zz(zz, gg, u);
    const Vec5 b = w.hess_zu(zz, u) * du + p.eta * g;
    return Deriv{-regularized_solve(h, b, p.hessian_floor), -p.alpha * w.grad_gamma(zz, gg)};
  };

  PlannedTrajectory traj;
  auto record = [&](double s) {
    PlannerSample smp;
    smp.s = s;
    smp.z = z;
    smp.gamma = gamma;
    smp.u = schedule.at(s);
    smp.residual = w.grad_z(z, gamma, smp.u).norm();
    traj.samples.push_back(std::move(smp));
  };
  record(0.0);

  const std::vector<double> bps = schedule.breakpoints();
  const int n = p.n_steps;
  const auto t0 = std::chrono::steady_clock::now();
  for (int k = 0; k < n; ++k) {
    const double s0 = static_cast<double>(k) / n;
    const double s1 = static_cast<double>(k + 1) / n;
    std::vector<double> cuts{s0};
    for (double b : bps) {
      if (b > s0 + 1e-12 && b < s1 - 1e-12) cuts.push_back(b);
    }
    cuts.push_back(s1);
    try {
      for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
        const double a = cuts[c], hstep = cuts[c + 1] - cuts[c];
        const Attractor du = schedule.rate(0.5 * (cuts[c] + cuts[c + 1]));
        const Deriv k1 = rhs(a, z, gamma, du);
        const Deriv k2 = rhs(a + 0.5 * hstep, z + 0.5 * hstep * k1.dz, gamma + 0.5 * hstep * k1.dgamma, du);
        const Deriv k3 = rhs(a + 0.5 * hstep, z + 0.5 * hstep * k2.dz, gamma + 0.5 * hstep * k2.dgamma, du);
        const Deriv k4 = rhs(a + hstep, z + hstep * k3.dz, gamma + hstep * k3.dgamma, du);
        const PlanarConfig zn = z + hstep / 6.0 * (k1.dz + 2.0 * k2.dz + 2.0 * k3.dz + k4.dz);
        const Eigen::VectorXd gn =
            gamma + hstep / 6.0 * (k1.dgamma + 2.0 * k2.dgamma + 2.0 * k3.dgamma + k4.dgamma);
        if (!zn.allFinite() || !gn.allFinite()) throw RuntimeFailure("planner: non-finite state");
        z = zn;
        gamma = gn;
      }
    } catch (const RuntimeFailure& e) {
      if (std::string(e.what()) == "lost equilibrium manifold") throw;
      traj.aborted = true;
      break;
    }
    record(s1);
  }
  traj.integration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return traj;
}

double min_vehicle_gap(const VehicleGeometry& g, const PlanarConfig& z,
                       const std::vector<Superquadric2>& obstacles) {
  double best = std::numeric_limits<double>::infinity();
  for (const Superquadric2& v : vehicle_sqs2(g, z)) {
    for (const Superquadric2& o : obstacles) best = std::min(best, closest_pair(v, o).gap);
  }
  return best;
}

TargetPose target_pose(const PlannedTrajectory& traj, double t, const PlannerParams& params) {
  if (traj.samples.empty()) throw DomainError("target_pose: empty trajectory");
  TargetPose out;
  double tc = t;
  if (!(t >= 0.0 && t <= params.T_d)) {
    out.clamped = true;
    tc = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, params.T_d);
  }
  const double s = tc / params.T_d;
  const auto& smp = traj.samples;
  PlanarConfig z = smp.back().z;
  if (s < smp.back().s) {
    auto it = std::upper_bound(smp.begin(), smp.end(), s,
                               [](double v, const PlannerSample& x) { return v < x.s; });
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double lam = (s - a.s) / (b.s - a.s);
    z = a.z + lam * (b.z - a.z);
  }
  out.q << z(0), z(1), params.h_t, 0.0, 0.0, z(2);
  out.theta << z(3), 0.0, z(4);
  return out;
}

}  // namespace wbam
