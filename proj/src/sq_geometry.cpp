#include "wbam/sq_geometry.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <vector>

namespace wbam {
namespace {

void require_shape(double a, const char* name) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw DomainError(std::string("superquadric: ") + name + " must be positive and finite");
  }
}

void require_exponent(double e, const char* name) {
  if (!(e > 0.0 && e <= 2.0)) {
    throw DomainError(std::string("superquadric: ") + name + " must lie in (0, 2]");
  }
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& v, const char* what) {
  if (!v.allFinite()) throw DomainError(std::string(what) + ": non-finite input");
}

// Point of the unit superellipse |x|^(2/eps) + |y|^(2/eps) = 1 maximizing w . (x, y).
Vec2 unit_superellipse_support(const Vec2& w, double eps) {
  const double wmax = w.cwiseAbs().maxCoeff();
  if (wmax == 0.0) return {1.0, 0.0};
  const Vec2 wn = w / wmax;
  if (eps >= 2.0 - 1e-12) {
    // Diamond: support is a vertex (edge midpoint on exact ties).
    const double ax = std::abs(wn.x()), ay = std::abs(wn.y());
    if (ax > ay) return {std::copysign(1.0, wn.x()), 0.0};
    if (ay > ax) return {0.0, std::copysign(1.0, wn.y())};
    return {std::copysign(0.5, wn.x()), std::copysign(0.5, wn.y())};
  }
  const double hoelder = eps / (2.0 - eps);
  const double p = 2.0 / eps;
  const double ux = std::pow(std::abs(wn.x()), hoelder);
  const double uy = std::pow(std::abs(wn.y()), hoelder);
  const double norm = std::pow(std::pow(ux, p) + std::pow(uy, p), 1.0 / p);
  return {std::copysign(ux / norm, wn.x()), std::copysign(uy / norm, wn.y())};
}

Vec2 support_body(const Superquadric2& sq, const Vec2& n) {
  const Vec2 u = unit_superellipse_support({sq.a1() * n.x(), sq.a2() * n.y()}, sq.eps());
  return {sq.a1() * u.x(), sq.a2() * u.y()};
}

Vec3 support_body(const Superquadric3& sq, const Vec3& n) {
  const Vec2 w(sq.a1() * n.x(), sq.a2() * n.y());
  if (w.norm() == 0.0) return {0.0, 0.0, std::copysign(sq.a3(), n.z())};
  const Vec2 uv = unit_superellipse_support(w, sq.eps2());
  const double h0 = w.dot(uv);
  const Vec2 rz = unit_superellipse_support({h0, sq.a3() * n.z()}, sq.eps1());
  return {sq.a1() * rz.x() * uv.x(), sq.a2() * rz.x() * uv.y(), sq.a3() * rz.y()};
}

Vec2 unit_dir(double theta) { return {std::cos(theta), std::sin(theta)}; }

// Separation of the two shapes along n: min_b n.b - max_a n.a.
struct Probe2 {
  double sep;
  Vec2 a, b;
};

// First boundary point of `sq` along p + t n, t >= 0. False if the ray misses.
bool ray_hit(const Superquadric2& sq, const Vec2& p, const Vec2& n, Vec2& hit) {
  double hi = n.dot(sq.center() - p);
  if (!(hi > 0.0) || inside_outside(sq, p + hi * n) > 0.0) return false;
  double lo = 0.0;
  if (inside_outside(sq, p) <= 0.0) return false;
  for (int k = 0; k < 200 && hi - lo > 1e-15 * (1.0 + hi); ++k) {
    const double mid = 0.5 * (lo + hi);
    if (inside_outside(sq, p + mid * n) > 0.0) lo = mid;
    else hi = mid;
  }
  hit = p + hi * n;
  return true;
}

Probe2 probe(const Superquadric2& si, const Superquadric2& sj, double theta) {
  const Vec2 n = unit_dir(theta);
  Probe2 out;
  out.a = support_point(si, n);
  out.b = support_point(sj, -n);
  out.sep = n.dot(out.b) - n.dot(out.a);
  return out;
}

struct Probe3 {
  double sep;
  Vec3 a, b;
};

Probe3 probe(const Superquadric3& si, const Superquadric3& sj, const Vec3& n) {
  Probe3 out;
  out.a = support_point(si, n);
  out.b = support_point(sj, -n);
  out.sep = n.dot(out.b) - n.dot(out.a);
  return out;
}

constexpr int kGrid2 = 360;
constexpr int kGrid3 = 600;

std::array<Vec3, 2> tangent_basis(const Vec3& n) {
  const Vec3 helper = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 t1 = n.cross(helper).normalized();
  return {t1, n.cross(t1)};
}

}  // namespace

Superquadric2::Superquadric2(double a1, double a2, double eps, Pose2 pose)
    : a1_(a1), a2_(a2), eps_(eps), pose_(pose) {
  require_shape(a1, "a1");
  require_shape(a2, "a2");
  require_exponent(eps, "eps");
  if (!std::isfinite(pose.angle) || !pose.translation.allFinite()) {
    throw DomainError("superquadric: non-finite pose");
  }
}

Superquadric3::Superquadric3(double a1, double a2, double a3, double eps1, double eps2,
                             Pose3 pose)
    : a1_(a1), a2_(a2), a3_(a3), eps1_(eps1), eps2_(eps2), pose_(pose) {
  require_shape(a1, "a1");
  require_shape(a2, "a2");
  require_shape(a3, "a3");
  require_exponent(eps1, "eps1");
  require_exponent(eps2, "eps2");
  const Mat3& r = pose.rotation;
  if (!r.allFinite() || !pose.translation.allFinite()) {
    throw DomainError("superquadric: non-finite pose");
  }
  if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
      std::abs(r.determinant() - 1.0) > 1e-9) {
    throw DomainError("superquadric: pose rotation is not in SO(3)");
  }
}

double inside_outside_body(const Superquadric2& sq, const Vec2& body) {
  require_finite(body, "inside_outside");
  const double p = 2.0 / sq.eps();
  return std::pow(std::abs(body.x() / sq.a1()), p) + std::pow(std::abs(body.y() / sq.a2()), p) -
         1.0;
}

double inside_outside_body(const Superquadric3& sq, const Vec3& body) {
  require_finite(body, "inside_outside");
  const double p2 = 2.0 / sq.eps2();
  const double xy = std::pow(std::abs(body.x() / sq.a1()), p2) +
                    std::pow(std::abs(body.y() / sq.a2()), p2);
  return std::pow(xy, sq.eps2() / sq.eps1()) +
         std::pow(std::abs(body.z() / sq.a3()), 2.0 / sq.eps1()) - 1.0;
}

double inside_outside(const Superquadric2& sq, const Vec2& world) {
  require_finite(world, "inside_outside");
  return inside_outside_body(sq, sq.pose().to_body(world));
}

double inside_outside(const Superquadric3& sq, const Vec3& world) {
  require_finite(world, "inside_outside");
  return inside_outside_body(sq, sq.pose().to_body(world));
}

Vec2 inside_outside_gradient_body(const Superquadric2& sq, const Vec2& body) {
  const double p = 2.0 / sq.eps();
  const double ux = body.x() / sq.a1(), uy = body.y() / sq.a2();
  return {p * signed_pow(ux, p - 1.0) / sq.a1(), p * signed_pow(uy, p - 1.0) / sq.a2()};
}

double wrap_gamma2(double gamma) { return wrap_angle(gamma); }

Vec2 wrap_gamma3(const Vec2& gamma) {
  double g1 = wrap_angle(gamma.x());
  double g2 = gamma.y();
  if (g1 > kPi / 2) {
    g1 = kPi - g1;
    g2 += kPi;
  } else if (g1 < -kPi / 2) {
    g1 = -kPi - g1;
    g2 += kPi;
  }
  return {g1, wrap_angle(g2)};
}

Vec2 proxy_point_body(const Superquadric2& sq, double gamma) {
  return {sq.a1() * signed_pow(std::cos(gamma), sq.eps()),
          sq.a2() * signed_pow(std::sin(gamma), sq.eps())};
}

Vec3 proxy_point_body(const Superquadric3& sq, const Vec2& gamma) {
  const double c1 = signed_pow(std::cos(gamma.x()), sq.eps1());
  const double s1 = signed_pow(std::sin(gamma.x()), sq.eps1());
  return {sq.a1() * c1 * signed_pow(std::cos(gamma.y()), sq.eps2()),
          sq.a2() * c1 * signed_pow(std::sin(gamma.y()), sq.eps2()), sq.a3() * s1};
}

Vec2 proxy_tangent_body(const Superquadric2& sq, double gamma) {
  const double c = std::cos(gamma), s = std::sin(gamma);
  const double e = sq.eps();
  const double dc = c == 0.0 ? 0.0 : e * std::pow(std::abs(c), e - 1.0) * (-s);
  const double ds = s == 0.0 ? 0.0 : e * std::pow(std::abs(s), e - 1.0) * c;
  return {sq.a1() * dc, sq.a2() * ds};
}

Vec2 proxy_point(const Superquadric2& sq, double gamma) {
  return sq.pose().to_world(proxy_point_body(sq, gamma));
}

Vec3 proxy_point(const Superquadric3& sq, const Vec2& gamma) {
  return sq.pose().to_world(proxy_point_body(sq, gamma));
}

double gamma_of_body_point(const Superquadric2& sq, const Vec2& body) {
  const double inv = 1.0 / sq.eps();
  return std::atan2(signed_pow(body.y() / sq.a2(), inv), signed_pow(body.x() / sq.a1(), inv));
}

Vec2 gamma_of_body_point(const Superquadric3& sq, const Vec3& body) {
  const double s1 = std::clamp(signed_pow(body.z() / sq.a3(), 1.0 / sq.eps1()), -1.0, 1.0);
  const double g1 = std::asin(s1);
  const double ce = std::pow(std::cos(g1), sq.eps1());
  if (ce < 1e-300) return {g1, 0.0};
  const double inv = 1.0 / sq.eps2();
  const double g2 = std::atan2(signed_pow(body.y() / (sq.a2() * ce), inv),
                               signed_pow(body.x() / (sq.a1() * ce), inv));
  return {g1, g2};
}

Vec2 support_point(const Superquadric2& sq, const Vec2& direction) {
  const Vec2 n = rot2(sq.pose().angle).transpose() * direction;
  return sq.pose().to_world(support_body(sq, n));
}

Vec3 support_point(const Superquadric3& sq, const Vec3& direction) {
  const Vec3 n = sq.pose().rotation.transpose() * direction;
  return sq.pose().to_world(support_body(sq, n));
}

void StiffnessParams::validate() const {
  if (!(k_min > 0.0 && k_min < k_max)) throw DomainError("stiffness: need 0 < k_min < k_max");
  if (!(d0 > 0.0)) throw DomainError("stiffness: need d0 > 0");
  if (!(d_prime >= 0.0)) throw DomainError("stiffness: need d_prime >= 0");
}

double stiffness(double d, const StiffnessParams& p) {
  return p.k_min + 0.5 * (1.0 - std::tanh(d / p.d0)) * p.k_max;
}

double stiffness_slope(double d, const StiffnessParams& p) {
  const double t = std::tanh(d / p.d0);
  return -0.5 * p.k_max * (1.0 - t * t) / p.d0;
}

ClosestPair2 closest_pair(const Superquadric2& sq_i, const Superquadric2& sq_j,
                          const ProxyPair2& init, const ClosestPairOptions& opts) {
  if (!std::isfinite(init.gamma_i) || !std::isfinite(init.gamma_j)) {
    throw DomainError("closest_pair: non-finite initial proxies");
  }
  // Candidate separating directions; the first maximum wins ties.
  std::vector<double> candidates;
  if (opts.global_search) {
    for (int k = 0; k < kGrid2; ++k) candidates.push_back(wrap_angle(2.0 * kPi * k / kGrid2));
  }
  const Vec2 dc = sq_j.center() - sq_i.center();
  if (dc.norm() > 0.0) candidates.push_back(std::atan2(dc.y(), dc.x()));
  const Vec2 dp = proxy_point(sq_j, init.gamma_j) - proxy_point(sq_i, init.gamma_i);
  if (dp.norm() > 1e-12) {
    const double t = std::atan2(dp.y(), dp.x());
    candidates.push_back(t);
    candidates.push_back(wrap_angle(t + kPi));
  }
  if (candidates.empty()) candidates.push_back(0.0);

  double best = candidates.front();
  double best_sep = -std::numeric_limits<double>::infinity();
  for (double t : candidates) {
    const double s = probe(sq_i, sq_j, t).sep;
    if (s > best_sep) {
      best_sep = s;
      best = t;
    }
  }

  // Golden-section refinement around the best candidate.
  double half = opts.global_search ? 2.0 * kPi / kGrid2 : 0.3;
  if (!opts.global_search) {
    if (probe(sq_i, sq_j, best - half).sep > best_sep ||
        probe(sq_i, sq_j, best + half).sep > best_sep) {
      ClosestPairOptions global = opts;
      global.global_search = true;
      return closest_pair(sq_i, sq_j, init, global);
    }
  }
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = best - half, hi = best + half;
  double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo);
  double f1 = probe(sq_i, sq_j, x1).sep, f2 = probe(sq_i, sq_j, x2).sep;
  int iter = 0;
  while (hi - lo > opts.tol && iter < opts.max_iter) {
    if (f1 >= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - ratio * (hi - lo);
      f1 = probe(sq_i, sq_j, x1).sep;
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + ratio * (hi - lo);
      f2 = probe(sq_i, sq_j, x2).sep;
    }
    ++iter;
  }
  double theta = 0.5 * (lo + hi);
  Probe2 pr = probe(sq_i, sq_j, theta);
  if (pr.sep < best_sep) {
    theta = best;
    pr = probe(sq_i, sq_j, theta);
  }

  ClosestPair2 out;
  out.gap = pr.sep;
  out.point_i = pr.a;
  out.point_j = pr.b;
  out.normal = unit_dir(theta);
  if (pr.sep > 0.0) {
    // Support points slide along nearly flat faces. Keep the one whose ray
    // along the normal lands closest on the other shape so the pair is
    // aligned with the separating direction.
    Vec2 hb, ha;
    const bool okb = ray_hit(sq_j, pr.a, out.normal, hb);
    const bool oka = ray_hit(sq_i, pr.b, -out.normal, ha);
    const double db = okb ? (hb - pr.a).norm() : std::numeric_limits<double>::infinity();
    const double da = oka ? (pr.b - ha).norm() : std::numeric_limits<double>::infinity();
    if (okb && db <= da) {
      out.point_j = hb;
    } else if (oka) {
      out.point_i = ha;
    }
  }
  out.proxies.gamma_i = gamma_of_body_point(sq_i, sq_i.pose().to_body(out.point_i));
  out.proxies.gamma_j = gamma_of_body_point(sq_j, sq_j.pose().to_body(out.point_j));
  out.converged = hi - lo <= opts.tol;
  out.iterations = iter;
  return out;
}

ClosestPair2 closest_pair(const Superquadric2& sq_i, const Superquadric2& sq_j,
                          const ClosestPairOptions& opts) {
  const Vec2 dc = sq_j.center() - sq_i.center();
  const double t = dc.norm() > 0.0 ? std::atan2(dc.y(), dc.x()) : 0.0;
  ProxyPair2 init{gamma_of_body_point(sq_i, sq_i.pose().to_body(support_point(sq_i, unit_dir(t)))),
                  gamma_of_body_point(sq_j, sq_j.pose().to_body(support_point(sq_j, -unit_dir(t))))};
  ClosestPairOptions o = opts;
  o.global_search = true;
  return closest_pair(sq_i, sq_j, init, o);
}

ClosestPair3 closest_pair(const Superquadric3& sq_i, const Superquadric3& sq_j,
                          const ProxyPair3& init, const ClosestPairOptions& opts) {
  if (!init.gamma_i.allFinite() || !init.gamma_j.allFinite()) {
    throw DomainError("closest_pair: non-finite initial proxies");
  }
  std::vector<Vec3> candidates;
  const Vec3 dp = proxy_point(sq_j, init.gamma_j) - proxy_point(sq_i, init.gamma_i);
  if (dp.norm() > 1e-12) {
    candidates.push_back(dp.normalized());
    candidates.push_back(-dp.normalized());
  }
  const Vec3 dc = sq_j.center() - sq_i.center();
  if (dc.norm() > 0.0) candidates.push_back(dc.normalized());
  if (opts.global_search) {
    // Fibonacci sphere.
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < kGrid3; ++k) {
      const double z = 1.0 - 2.0 * (k + 0.5) / kGrid3;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      candidates.emplace_back(r * std::cos(golden * k), r * std::sin(golden * k), z);
    }
  }
  if (candidates.empty()) candidates.push_back(Vec3::UnitX());

  Vec3 n = candidates.front();
  double f = -std::numeric_limits<double>::infinity();
  for (const Vec3& c : candidates) {
    const double s = probe(sq_i, sq_j, c).sep;
    if (s > f) {
      f = s;
      n = c;
    }
  }

  // Projected gradient ascent on the sphere, then a compass search that is
  // robust to the near-kinks of box-like shapes.
  double step = opts.global_search ? 0.1 : 0.02;
  int iter = 0;
  while (iter < opts.max_iter && step > opts.tol) {
    ++iter;
    const Probe3 pr = probe(sq_i, sq_j, n);
    Vec3 g = pr.b - pr.a;
    g -= n * n.dot(g);
    if (g.norm() < 1e-15) break;
    const Vec3 trial = (n + step * g.normalized()).normalized();
    const double ft = probe(sq_i, sq_j, trial).sep;
    if (ft > f) {
      n = trial;
      f = ft;
      step *= 1.5;
    } else {
      step *= 0.5;
    }
  }
  step = std::max(step * 4.0, 1e-4);
  while (iter < 4 * opts.max_iter && step > opts.tol) {
    ++iter;
    const auto basis = tangent_basis(n);
    bool improved = false;
    for (int k = 0; k < 8 && !improved; ++k) {
      const double a = kPi * k / 4.0;
      const Vec3 trial =
          (n + step * (std::cos(a) * basis[0] + std::sin(a) * basis[1])).normalized();
      const double ft = probe(sq_i, sq_j, trial).sep;
      if (ft > f) {
        n = trial;
        f = ft;
        improved = true;
      }
    }
    if (!improved) step *= 0.5;
  }

  const Probe3 pr = probe(sq_i, sq_j, n);
  ClosestPair3 out;
  out.gap = pr.sep;
  out.point_i = pr.a;
  out.point_j = pr.b;
  out.normal = n;
  out.proxies.gamma_i = gamma_of_body_point(sq_i, sq_i.pose().to_body(out.point_i));
  out.proxies.gamma_j = gamma_of_body_point(sq_j, sq_j.pose().to_body(out.point_j));
  out.converged = step <= opts.tol;
  out.iterations = iter;
  return out;
}

ClosestPair3 closest_pair(const Superquadric3& sq_i, const Superquadric3& sq_j,
                          const ClosestPairOptions& opts) {
  ClosestPairOptions o = opts;
  o.global_search = true;
  return closest_pair(sq_i, sq_j, ProxyPair3{}, o);
}

Superquadric2 circumscribing_ellipse(const Superquadric2& sq) {
  // max over the boundary of (x/a1)^2 + (y/a2)^2 is max(1, 2^(1 - eps)).
  const double scale = std::sqrt(std::max(1.0, std::pow(2.0, 1.0 - sq.eps())));
  return {sq.a1() * scale, sq.a2() * scale, 1.0, sq.pose()};
}

Superquadric3 extrude(const Superquadric2& sq, double height, double eps_vertical) {
  Pose3 pose;
  pose.rotation = rot_z(sq.pose().angle);
  pose.translation = Vec3(sq.center().x(), sq.center().y(), 0.5 * height);
  return {sq.a1(), sq.a2(), 0.5 * height, eps_vertical, sq.eps(), pose};
}

}  // namespace wbam
