#include "wbam/sq_geometry.hpp"

#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace wbam {
namespace {

oracle::Shape2 to_oracle(const Superquadric2& s) {
  return {s.a1(), s.a2(), s.eps(), s.pose().angle, s.center()};
}

Superquadric2 circle(double r, double x, double y) {
  return Superquadric2(r, r, 1.0, Pose2{0.0, Vec2(x, y)});
}

TEST(InsideOutside, UnitSphere) {
  const Superquadric3 sphere(1, 1, 1, 1, 1);
  EXPECT_NEAR(inside_outside(sphere, Vec3(1, 0, 0)), 0.0, 1e-15);
  EXPECT_NEAR(inside_outside(sphere, Vec3(2, 0, 0)), 3.0, 1e-15);
  EXPECT_LT(inside_outside(sphere, Vec3(0.2, 0.1, 0.3)), 0.0);
}

TEST(InsideOutside, BoxLikeMatchesDirectFormula) {
  const Superquadric3 box(1, 1, 1, 0.2, 0.2);
  // Independent evaluation: ((0.9)^10 + (0.9)^10)^(0.2/0.2) + 0 - 1.
  const double expected = 2.0 * std::pow(0.9, 10.0) - 1.0;
  EXPECT_NEAR(inside_outside(box, Vec3(0.9, 0.9, 0.0)), expected, 1e-12);
}

TEST(InsideOutside, PlanarOverloadAndPose) {
  const Superquadric2 e(2.0, 1.0, 1.0, Pose2{kPi / 2, Vec2(1, 1)});
  // Body x axis points along world +y.
  EXPECT_NEAR(inside_outside(e, Vec2(1, 3)), 0.0, 1e-12);
  EXPECT_NEAR(inside_outside(e, Vec2(2, 1)), 0.0, 1e-12);
  EXPECT_GT(inside_outside(e, Vec2(3, 1)), 0.0);
}

TEST(InsideOutside, RejectsNonFinite) {
  const Superquadric2 c = circle(1, 0, 0);
  EXPECT_THROW(inside_outside(c, Vec2(std::nan(""), 0)), DomainError);
  const Superquadric3 s(1, 1, 1, 1, 1);
  EXPECT_THROW(inside_outside(s, Vec3(0, INFINITY, 0)), DomainError);
}

TEST(Superquadric, ConstructorValidation) {
  EXPECT_THROW(Superquadric2(0.0, 1.0, 1.0), DomainError);
  EXPECT_THROW(Superquadric2(1.0, 1.0, 2.5), DomainError);
  EXPECT_THROW(Superquadric2(1.0, 1.0, 0.0), DomainError);
  EXPECT_NO_THROW(Superquadric2(1.0, 1.0, 2.0));
  Pose3 bad;
  bad.rotation(0, 0) = 1.1;
  EXPECT_THROW(Superquadric3(1, 1, 1, 1, 1, bad), DomainError);
  Pose3 mirror;
  mirror.rotation(2, 2) = -1.0;
  EXPECT_THROW(Superquadric3(1, 1, 1, 1, 1, mirror), DomainError);
}

TEST(ProxyPoint, AxisAndPole) {
  const Superquadric3 sq(0.7, 0.4, 0.3, 0.6, 1.3);
  EXPECT_TRUE(proxy_point(sq, Vec2(0, 0)).isApprox(Vec3(0.7, 0, 0)));
  const Vec3 pole = proxy_point(sq, Vec2(kPi / 2, 0.8));
  EXPECT_NEAR(pole.x(), 0.0, 1e-9);
  EXPECT_NEAR(pole.y(), 0.0, 1e-9);
  EXPECT_NEAR(pole.z(), 0.3, 1e-15);
}

TEST(ProxyPoint, PlanarCircleSymmetry) {
  const Superquadric2 c(2, 2, 1.0, Pose2{0.0, Vec2(1, 1)});
  const Vec2 p = proxy_point(c, kPi);
  EXPECT_NEAR(p.x(), -1.0, 1e-12);
  EXPECT_NEAR(p.y(), 1.0, 1e-12);
}

TEST(ProxyPoint, BoundaryConsistencyAndInverse) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> eps(0.1, 2.0), axis(0.1, 2.0), ang(-kPi, kPi);
  for (int trial = 0; trial < 200; ++trial) {
    const Superquadric2 s2(axis(rng), axis(rng), eps(rng), Pose2{ang(rng), Vec2(ang(rng), ang(rng))});
    const double g = ang(rng);
    EXPECT_LT(std::abs(inside_outside(s2, proxy_point(s2, g))), 1e-9);
    EXPECT_NEAR(wrap_angle(gamma_of_body_point(s2, proxy_point_body(s2, g)) - g), 0.0, 1e-9);

    Pose3 pose;
    pose.rotation = Eigen::AngleAxisd(ang(rng), Vec3(1, 2, 3).normalized()).toRotationMatrix();
    pose.translation = Vec3(ang(rng), ang(rng), ang(rng));
    const Superquadric3 s3(axis(rng), axis(rng), axis(rng), eps(rng), eps(rng), pose);
    const Vec2 g3 = wrap_gamma3(Vec2(ang(rng), ang(rng)));
    EXPECT_LT(std::abs(inside_outside(s3, proxy_point(s3, g3))), 1e-9);
    const Vec2 back = gamma_of_body_point(s3, proxy_point_body(s3, g3));
    EXPECT_TRUE(proxy_point_body(s3, back).isApprox(proxy_point_body(s3, g3), 1e-8));
  }
}

TEST(ProxyPoint, WrapGamma3StaysInDomain) {
  const Superquadric3 sq(1.0, 0.5, 0.8, 0.7, 0.9);
  for (double g1 = -7.0; g1 < 7.0; g1 += 0.37) {
    for (double g2 = -7.0; g2 < 7.0; g2 += 0.41) {
      const Vec2 w = wrap_gamma3(Vec2(g1, g2));
      EXPECT_LE(std::abs(w.x()), kPi / 2 + 1e-12);
      EXPECT_LE(std::abs(w.y()), kPi + 1e-12);
      EXPECT_TRUE(proxy_point(sq, w).isApprox(proxy_point(sq, Vec2(g1, g2)), 1e-9));
    }
  }
}

TEST(ProxyPoint, TangentMatchesFiniteDifference) {
  const Superquadric2 s(0.8, 0.5, 1.4);
  for (double g = -3.0; g < 3.0; g += 0.23) {
    const Vec2 fd = (proxy_point_body(s, g + 1e-6) - proxy_point_body(s, g - 1e-6)) / 2e-6;
    EXPECT_TRUE(proxy_tangent_body(s, g).isApprox(fd, 1e-6));
  }
}

TEST(Stiffness, Examples) {
  const StiffnessParams p{1e-7, 1e3, 1e-3, 0.05};
  EXPECT_DOUBLE_EQ(stiffness(0.0, p), 1e-7 + 0.5e3);
  EXPECT_NEAR(stiffness(1e3, p), 1e-7, 1e-15);
  EXPECT_NEAR(stiffness(p.d0, p), 1e-7 + 1e3 * (1.0 - std::tanh(1.0)) / 2.0, 1e-12);
}

TEST(Stiffness, MonotoneWithinRangeAndSlopeMatchesFd) {
  const StiffnessParams p{1e-7, 1e3, 1e-3, 0.05};
  double prev = stiffness(-0.01, p);
  for (double d = -0.01 + 1e-5; d < 0.01; d += 1e-5) {
    const double k = stiffness(d, p);
    EXPECT_LT(k, prev);
    EXPECT_GT(k, p.k_min);
    EXPECT_LT(k, p.k_min + p.k_max);
    const double fd = oracle::central_diff([&](double x) { return stiffness(x, p); }, d, 1e-8);
    EXPECT_NEAR(stiffness_slope(d, p), fd, 1e-4 * std::max(1.0, std::abs(fd)));
    prev = k;
  }
  EXPECT_THROW((StiffnessParams{1.0, 0.5, 1e-3, 0.0}.validate()), DomainError);
  EXPECT_THROW((StiffnessParams{1e-7, 1e3, 0.0, 0.0}.validate()), DomainError);
}

TEST(ClosestPair, CollinearCircles) {
  const auto r = closest_pair(circle(1, 0, 0), circle(1, 3, 0));
  EXPECT_NEAR(r.gap, 1.0, 1e-12);
  EXPECT_TRUE((r.point_i - Vec2(1, 0)).norm() < 1e-7);
  EXPECT_TRUE((r.point_j - Vec2(2, 0)).norm() < 1e-7);
  EXPECT_TRUE(r.converged);
  EXPECT_TRUE(proxy_point(circle(1, 0, 0), r.proxies.gamma_i).isApprox(r.point_i, 1e-9));
}

TEST(ClosestPair, BoxFacesAgainstSamplingOracle) {
  const double g = 0.137;
  const Superquadric2 a(0.5, 0.3, 0.2, Pose2{0.0, Vec2(0, 0)});
  const Superquadric2 b(0.5, 0.3, 0.2, Pose2{0.0, Vec2(1.0 + g, 0)});
  const auto r = closest_pair(a, b);
  EXPECT_NEAR(r.gap, g, 1e-4);
  const double ref = oracle::min_sample_distance(oracle::boundary_samples(to_oracle(a), 10000),
                                                 oracle::boundary_samples(to_oracle(b), 10000));
  EXPECT_NEAR(r.gap, ref, 1e-4);
}

TEST(ClosestPair, OverlapGivesNegativeGap) {
  const auto a = circle(1, 0, 0), b = circle(1, 1.5, 0);
  const auto r = closest_pair(a, b);
  EXPECT_NEAR(r.gap, -0.5, 1e-9);
  const double ref = oracle::sampled_signed_gap(oracle::boundary_samples(to_oracle(a), 10000),
                                                oracle::boundary_samples(to_oracle(b), 10000));
  EXPECT_NEAR(r.gap, ref, 1e-4);
  EXPECT_LT(inside_outside(b, r.point_i), 0.0);
}

TEST(ClosestPair, SymmetricInArguments) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> eps(0.3, 1.8), axis(0.1, 0.6), pos(-2, 2), ang(-kPi, kPi);
  for (int t = 0; t < 50; ++t) {
    const Superquadric2 a(axis(rng), axis(rng), eps(rng), Pose2{ang(rng), Vec2(pos(rng), pos(rng))});
    const Superquadric2 b(axis(rng), axis(rng), eps(rng), Pose2{ang(rng), Vec2(pos(rng), pos(rng))});
    EXPECT_NEAR(closest_pair(a, b).gap, closest_pair(b, a).gap, 1e-8);
  }
}

TEST(ClosestPair, WarmStartAgreesWithGlobal) {
  const Superquadric2 a(0.4, 0.2, 0.5, Pose2{0.3, Vec2(0, 0)});
  Superquadric2 b(0.3, 0.3, 1.2, Pose2{-0.2, Vec2(1.2, 0.4)});
  auto prev = closest_pair(a, b);
  ClosestPairOptions warm;
  warm.global_search = false;
  for (int k = 0; k < 20; ++k) {
    b = b.with_pose(Pose2{b.pose().angle + 0.02, b.center() + Vec2(0.0, -0.03)});
    const auto w = closest_pair(a, b, prev.proxies, warm);
    EXPECT_NEAR(w.gap, closest_pair(a, b).gap, 1e-9);
    prev = w;
  }
}

TEST(ClosestPair, SpatialSpheresAndBox) {
  Pose3 pa, pb;
  pb.translation = Vec3(1.0, 2.0, 2.0);
  const Superquadric3 s1(0.5, 0.5, 0.5, 1, 1, pa), s2(1.0, 1.0, 1.0, 1, 1, pb);
  const auto r = closest_pair(s1, s2);
  EXPECT_NEAR(r.gap, 3.0 - 1.5, 1e-7);
  EXPECT_NEAR(inside_outside(s1, r.point_i), 0.0, 1e-9);

  Pose3 pc;
  pc.translation = Vec3(0.0, 0.0, 1.0);
  const Superquadric3 slab(2.0, 2.0, 0.25, 0.1, 0.1, pa);
  const Superquadric3 ball(0.3, 0.3, 0.3, 1, 1, pc);
  EXPECT_NEAR(closest_pair(slab, ball).gap, 1.0 - 0.25 - 0.3, 2e-4);
}

TEST(Ellipse, SpecializationMatchesAnalyticEquation) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  const Superquadric2 e(1.3, 0.6, 1.0, Pose2{0.0, Vec2::Zero()});
  for (int k = 0; k < 1000; ++k) {
    const Vec2 p(u(rng), u(rng));
    const double analytic = p.x() * p.x() / (1.3 * 1.3) + p.y() * p.y() / (0.6 * 0.6) - 1.0;
    EXPECT_NEAR(inside_outside(e, p), analytic, 1e-12);
  }
}

TEST(Ellipse, CircumscribingEllipseContainsShape) {
  for (double eps : {0.1, 0.2, 0.5, 1.0, 1.5, 2.0}) {
    const Superquadric2 s(0.7, 0.3, eps, Pose2{0.4, Vec2(1, -1)});
    const Superquadric2 e = circumscribing_ellipse(s);
    EXPECT_EQ(e.eps(), 1.0);
    double worst = -1.0;
    for (const Vec2& p : oracle::boundary_samples(to_oracle(s), 2000)) {
      worst = std::max(worst, inside_outside(e, p));
    }
    EXPECT_LE(worst, 1e-9);
    EXPECT_GT(worst, -0.05);  // tight: some boundary point nearly touches
  }
}

}  // namespace
}  // namespace wbam
