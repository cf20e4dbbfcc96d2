#include "wbam/dynamics.hpp"

#include <random>

#include <gtest/gtest.h>

#include "wbam/vehicle.hpp"

namespace wbam {
namespace {

Vec3 random_attitude(std::mt19937& rng, double lim = 1.2) {
  std::uniform_real_distribution<double> a(-lim, lim), y(-kPi, kPi);
  return Vec3(a(rng), a(rng), y(rng));
}

Vec3 random_rate(std::mt19937& rng) {
  std::uniform_real_distribution<double> r(-2.0, 2.0);
  return Vec3(r(rng), r(rng), r(rng));
}

Vec3 vee(const Mat3& s) { return Vec3(s(2, 1), s(0, 2), s(1, 0)); }

double kinetic(const ModelParams& m, const Vec6& q, const Vec6& qd) {
  const Vec3 w = euler_rate_map(q.tail<3>()) * qd.tail<3>();
  return 0.5 * m.mass * qd.head<3>().squaredNorm() + 0.5 * w.dot(m.inertia * w);
}

ModelParams asymmetric() {
  ModelParams m;
  m.inertia << 0.06, 0.004, -0.002, 0.004, 0.05, 0.003, -0.002, 0.003, 0.09;
  return m;
}

TEST(EulerRateMap, IdentityAtZeroAndYawRate) {
  EXPECT_TRUE(euler_rate_map(Vec3::Zero()).isApprox(Mat3::Identity(), 1e-15));
  EXPECT_TRUE((euler_rate_map(Vec3::Zero()) * Vec3(0, 0, 0.7)).isApprox(Vec3(0, 0, 0.7), 1e-15));
}

TEST(EulerRateMap, MatchesRotationFiniteDifference) {
  std::mt19937 rng(1);
  const double h = 1e-6;
  for (int k = 0; k < 100; ++k) {
    const Vec3 phi = random_attitude(rng), rate = random_rate(rng);
    const Mat3 rdot = (rotation_zyx(phi + h * rate) - rotation_zyx(phi - h * rate)) / (2 * h);
    const Vec3 w = vee(rotation_zyx(phi).transpose() * rdot);
    EXPECT_LT((w - euler_rate_map(phi) * rate).norm(), 1e-6);
  }
}

TEST(EulerRateMap, DerivativeMatchesFiniteDifference) {
  std::mt19937 rng(2);
  const double h = 1e-6;
  for (int k = 0; k < 100; ++k) {
    const Vec3 phi = random_attitude(rng), rate = random_rate(rng);
    const Mat3 fd = (euler_rate_map(phi + h * rate) - euler_rate_map(phi - h * rate)) / (2 * h);
    EXPECT_LT((fd - euler_rate_map_dot(phi, rate)).norm(), 1e-7);
  }
}

TEST(EulerRateMap, RejectsGimbalLock) {
  EXPECT_THROW(euler_rate_map(Vec3(0, kPi / 2, 0)), RuntimeFailure);
  EXPECT_THROW(mass_matrix(ModelParams{}, Vec3(0, -kPi / 2 + 1e-4, 0)), RuntimeFailure);
  EXPECT_NO_THROW(euler_rate_map(Vec3(0, kPi / 2 - 2e-3, 0)));
}

TEST(Model, ZeroAttitudeAndZeroRates) {
  const ModelParams m;
  Mat6 ref = Mat6::Zero();
  ref.topLeftCorner<3, 3>() = m.mass * Mat3::Identity();
  ref.bottomRightCorner<3, 3>() = m.inertia;
  EXPECT_TRUE(mass_matrix(m, Vec3::Zero()).isApprox(ref, 1e-15));
  std::mt19937 rng(3);
  EXPECT_EQ(coriolis_vec(m, random_attitude(rng), Vec3::Zero()).norm(), 0.0);
  EXPECT_NEAR(gravity_vec(m)(2), 3.5 * 9.81, 1e-12);
}

TEST(Model, MassMatrixSymmetricPositiveDefinite) {
  const ModelParams m = asymmetric();
  std::mt19937 rng(4);
  for (int k = 0; k < 1000; ++k) {
    const Mat6 mm = mass_matrix(m, random_attitude(rng, kPi / 2 - 2e-3));
    EXPECT_TRUE(mm.isApprox(mm.transpose(), 1e-14));
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Mat6>(mm).eigenvalues().minCoeff(), 0.0);
  }
}

// d/dt(dT/dqdot) - dT/dq from nested differences of the kinetic energy alone.
TEST(Model, MatchesLagrangianOracle) {
  const ModelParams m = asymmetric();
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double hi = 1e-5, ho = 1e-4;
  auto momentum = [&](const Vec6& q, const Vec6& qd) {
    Vec6 p;
    for (int c = 0; c < 6; ++c) {
      Vec6 e = Vec6::Zero();
      e(c) = hi;
      p(c) = (kinetic(m, q, qd + e) - kinetic(m, q, qd - e)) / (2 * hi);
    }
    return p;
  };
  for (int k = 0; k < 50; ++k) {
    Vec6 q, qd, qdd;
    q << u(rng), u(rng), u(rng), random_attitude(rng);
    qd << u(rng), u(rng), u(rng), random_rate(rng);
    for (int c = 0; c < 6; ++c) qdd(c) = 3.0 * u(rng);
    auto at = [&](double t) { return std::pair<Vec6, Vec6>(q + qd * t + 0.5 * qdd * t * t, qd + qdd * t); };
    const auto [qp, qdp] = at(ho);
    const auto [qm, qdm] = at(-ho);
    const Vec6 dpdt = (momentum(qp, qdp) - momentum(qm, qdm)) / (2 * ho);
    Vec6 dtdq;
    for (int c = 0; c < 6; ++c) {
      Vec6 e = Vec6::Zero();
      e(c) = hi;
      dtdq(c) = (kinetic(m, q + e, qd) - kinetic(m, q - e, qd)) / (2 * hi);
    }
    const Vec6 lhs = dpdt - dtdq;
    const Vec6 rhs = mass_matrix(m, q.tail<3>()) * qdd + coriolis_vec(m, q.tail<3>(), qd.tail<3>());
    EXPECT_LT((lhs - rhs).norm(), 1e-6 * std::max(1.0, rhs.norm()));
  }
}

TEST(Allocation, EqualThrustIsPureLift) {
  const ModelParams m;
  const Vec6 w = allocation(m, Vec3::Zero()) * Vec6::Constant(15.0);
  Vec6 ref = Vec6::Zero();
  ref(2) = 6 * 15.0 * std::cos(kPi / 12);
  EXPECT_LT((w - ref).norm(), 1e-12);
}

TEST(Allocation, HoverThrust) {
  const ModelParams m;
  const Vec6 t = allocation(m, Vec3::Zero()).fullPivLu().solve(gravity_vec(m));
  for (int i = 0; i < 6; ++i) {
    EXPECT_NEAR(t(i), 3.5 * 9.81 / (6 * std::cos(kPi / 12)), 1e-9);
    EXPECT_NEAR(t(i), 5.925, 1e-3);
  }
}

TEST(Allocation, FullRankAndConditionedInEnvelope) {
  const ModelParams m;
  Eigen::FullPivLU<Mat6> lu(allocation_body(m));
  EXPECT_EQ(lu.rank(), 6);
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> a(-kPi / 6, kPi / 6), y(-kPi, kPi);
  for (int k = 0; k < 1000; ++k) {
    const Eigen::JacobiSVD<Mat6> svd(allocation(m, Vec3(a(rng), a(rng), y(rng))));
    const auto s = svd.singularValues();
    EXPECT_LT(s(0) / s(5), 1e4);
  }
}

TEST(Allocation, DerivedLeverArms) {
  const ModelParams m;
  EXPECT_NEAR(m.p1(), 0.278 * std::cos(kPi / 12) + 0.016 * std::sin(kPi / 12), 1e-15);
  EXPECT_NEAR(m.p2(), 0.278 * std::sin(kPi / 12) - 0.016 * std::cos(kPi / 12), 1e-15);
}

TEST(Step, FreeFall) {
  PlantParams plant;
  VehicleState s;
  s.q(2) = 1.0;
  const double dt = 1e-3;
  const VehicleState n = step(plant, s, Vec6::Zero(), ArmCommand{}, Vec6::Zero(), dt);
  EXPECT_NEAR((n.qdot(2) - s.qdot(2)) / dt, -9.81, 1e-9);
  EXPECT_NEAR(n.qdot.head<2>().norm() + n.qdot.tail<3>().norm(), 0.0, 1e-15);
}

TEST(Step, BalancedInputKeepsRatesConstant) {
  PlantParams plant;
  plant.thrust_max = 1e6;
  plant.thrust_min = -1e6;
  std::mt19937 rng(7);
  for (int k = 0; k < 20; ++k) {
    VehicleState s;
    s.q.tail<3>() = random_attitude(rng, 0.5);
    s.qdot.tail<3>() = random_rate(rng);
    s.qdot.head<3>() = Vec3(0.3, -0.2, 0.1);
    const ModelParams& m = plant.model;
    const Vec3 phi = s.q.tail<3>();
    const Vec6 t = allocation(m, phi).fullPivLu().solve(coriolis_vec(m, phi, s.qdot.tail<3>()) + gravity_vec(m));
    const VehicleState n = step(plant, s, t, ArmCommand{}, Vec6::Zero(), 1e-3);
    EXPECT_LT((n.qdot - s.qdot).norm(), 1e-9);
  }
}

TEST(Step, ConstantForceIsNewton) {
  PlantParams plant;
  VehicleState s;
  const Vec6 hover = allocation(plant.model, Vec3::Zero()).fullPivLu().solve(gravity_vec(plant.model));
  Vec6 d = Vec6::Zero();
  d(0) = 2.0;
  const VehicleState n = step(plant, s, hover, ArmCommand{}, d, 1e-3);
  EXPECT_NEAR(n.qdot(0) / 1e-3, 2.0 / 3.5, 1e-9);
}

TEST(Step, PlantSaturatesThrust) {
  PlantParams plant;
  VehicleState s;
  const VehicleState a = step(plant, s, Vec6::Constant(100.0), ArmCommand{}, Vec6::Zero(), 1e-3);
  const VehicleState b = step(plant, s, Vec6::Constant(18.0), ArmCommand{}, Vec6::Zero(), 1e-3);
  EXPECT_TRUE(a.qdot.isApprox(b.qdot, 1e-15));
  const VehicleState c = step(plant, s, Vec6::Constant(-5.0), ArmCommand{}, Vec6::Zero(), 1e-3);
  EXPECT_NEAR(c.qdot(2), -9.81e-3, 1e-15);
}

TEST(Step, MomentumConservedWithoutGravity) {
  PlantParams plant;
  plant.model.gravity = 1e-300;
  VehicleState s;
  s.qdot << 0.4, -0.3, 0.2, 0.5, -0.2, 0.8;
  const Vec3 p0 = plant.model.mass * s.qdot.head<3>();
  for (int k = 0; k < 1000; ++k) {
    s = step(plant, s, Vec6::Zero(), ArmCommand{}, Vec6::Zero(), 1e-3);
    EXPECT_LT((plant.model.mass * s.qdot.head<3>() - p0).norm(), 1e-10);
  }
}

TEST(Step, HalvingStepBarelyMovesRollout) {
  PlantParams plant;
  auto rollout = [&](double dt) {
    VehicleState s;
    s.qdot << 0.2, 0.1, 0.0, 0.0, 0.0, 0.05;
    ArmCommand arm;
    arm.theta = Vec3(0.01, 0.0, -0.01);
    Vec6 d = Vec6::Zero();
    d(0) = 0.05;
    const int n = static_cast<int>(std::lround(1.0 / dt));
    for (int k = 0; k < n; ++k) {
      const Vec6 t = allocation(plant.model, s.q.tail<3>()).fullPivLu().solve(
          gravity_vec(plant.model) + coriolis_vec(plant.model, s.q.tail<3>(), s.qdot.tail<3>()));
      s = step(plant, s, t, arm, d, dt);
    }
    return s;
  };
  const VehicleState a = rollout(1e-3), b = rollout(5e-4);
  EXPECT_LT((a.q - b.q).norm(), 1e-5);
  EXPECT_LT((a.theta - b.theta).norm(), 1e-5);
}

TEST(Step, ArmTracksCommand) {
  PlantParams plant;
  VehicleState s;
  const Vec6 hover = allocation(plant.model, Vec3::Zero()).fullPivLu().solve(gravity_vec(plant.model));
  ArmCommand arm;
  arm.theta = Vec3(0.5, 0.0, -0.3);
  for (int k = 0; k < 1000; ++k) s = step(plant, s, hover, arm, Vec6::Zero(), 1e-3);
  EXPECT_LT((s.theta - arm.theta).norm(), 1e-6);
}

TEST(Step, Validation) {
  PlantParams plant;
  VehicleState s;
  EXPECT_THROW(step(plant, s, Vec6::Zero(), ArmCommand{}, Vec6::Zero(), 0.0), DomainError);
  EXPECT_THROW(step(plant, s, Vec6::Zero(), ArmCommand{}, Vec6::Zero(), 0.02), DomainError);
  Vec6 bad = Vec6::Zero();
  bad(3) = std::nan("");
  EXPECT_THROW(step(plant, s, bad, ArmCommand{}, Vec6::Zero(), 1e-3), RuntimeFailure);
  ModelParams m;
  m.alpha_p = kPi / 2;
  EXPECT_THROW(m.validate(), DomainError);
  m = ModelParams{};
  m.inertia(0, 0) = -1.0;
  EXPECT_THROW(m.validate(), DomainError);
  EXPECT_NO_THROW(PlantParams{}.validate());
}

TEST(Wind, SmoothedSquareWave) {
  const WindProfile w;
  EXPECT_NEAR(w.at(2.5)(0), 2.0, 1e-12);
  EXPECT_NEAR(w.at(7.5)(0), -2.0, 1e-12);
  EXPECT_NEAR(w.at(0.0)(0), 0.0, 1e-12);
  EXPECT_GT(w.at(1.0)(0), 1.9);
  EXPECT_EQ(w.at(1.0).tail<5>().norm(), 0.0);
}

}  // namespace
}  // namespace wbam
