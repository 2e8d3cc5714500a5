#include "chaos/dataset.hpp"
#include "chaos/dynamics.hpp"

#include <gtest/gtest.h>
#include <unsupported/Eigen/AutoDiff>

#include <cmath>
#include <numbers>
#include <random>

using namespace chaos;

namespace {

Eigen::VectorXd v1(double x) { return Eigen::VectorXd::Constant(1, x); }
Eigen::VectorXd v2(double x, double y) { return Eigen::Vector2d(x, y); }

}  // namespace

TEST(Step, Examples) {
  EXPECT_DOUBLE_EQ(step(MapSpec::logistic1d(2.0), v1(0.5))(0), 0.5);
  EXPECT_DOUBLE_EQ(step(MapSpec::logistic1d(4.0), v1(0.5))(0), 1.0);
  const Eigen::VectorXd y = step(MapSpec::logistic2d(0.6, 0.1), v2(0.5, 0.5));
  EXPECT_NEAR(y(0), 0.65, 1e-15);
  EXPECT_NEAR(y(1), 0.65, 1e-15);
}

TEST(Step, BothComponentsReadTheOldState) {
  const MapSpec s = MapSpec::logistic2d(0.7, 0.2);
  const Eigen::VectorXd y = step(s, v2(0.2, 0.9));
  EXPECT_DOUBLE_EQ(y(0), 4 * 0.7 * 0.2 * 0.8 + 0.2 * 0.9);
  EXPECT_DOUBLE_EQ(y(1), 4 * 0.7 * 0.9 * 0.1 + 0.2 * 0.2);
}

TEST(Step, RejectsOutOfRangeParameters) {
  EXPECT_THROW(validate(MapSpec::logistic1d(4.1)), DomainError);
  EXPECT_THROW(validate(MapSpec::logistic1d(-0.1)), DomainError);
  EXPECT_THROW(validate(MapSpec::logistic2d(0.95, 0.0)), DomainError);
  EXPECT_THROW(validate(MapSpec::logistic2d(0.0, 0.1)), DomainError);
  EXPECT_THROW(validate(MapSpec::logistic2d(0.9, 0.2)), DomainError);
  EXPECT_NO_THROW(validate(MapSpec::logistic2d(0.9, 0.1)));
  EXPECT_THROW(step_checked(MapSpec::logistic1d(3.0), v1(1.2)), DomainError);
  EXPECT_THROW(step(MapSpec::logistic1d(3.0), v2(0.1, 0.2)), DomainError);
}

TEST(Jacobian, Examples) {
  EXPECT_DOUBLE_EQ(jacobian(MapSpec::logistic1d(3.2), v1(0.5))(0, 0), 0.0);
  EXPECT_NEAR(jacobian(MapSpec::logistic1d(2.2), v1(1.0 - 1.0 / 2.2))(0, 0), -0.2, 1e-12);
  Eigen::Matrix2d expected;
  expected << 0.0, 0.1, 0.1, 0.0;
  EXPECT_LT((jacobian(MapSpec::logistic2d(0.5, 0.1), v2(0.5, 0.5)) - Eigen::MatrixXd(expected)).norm(), 1e-15);
}

TEST(Jacobian, MatchesForwardModeDerivatives) {
  using Dual = Eigen::AutoDiffScalar<Eigen::Vector2d>;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0), mu(0.05, 0.9);
  for (int i = 0; i < 200; ++i) {
    const double m = mu(rng);
    const MapSpec s = MapSpec::logistic2d(m, std::min(0.1, 1.0 - m));
    Eigen::Matrix<Dual, 2, 1> x;
    x(0) = Dual(u(rng), 2, 0);
    x(1) = Dual(u(rng), 2, 1);
    const auto y = step(s, x);
    Eigen::Matrix2d jad;
    jad.row(0) = y(0).derivatives().transpose();
    jad.row(1) = y(1).derivatives().transpose();
    const Eigen::MatrixXd j = jacobian(s, v2(x(0).value(), x(1).value()));
    EXPECT_LT((j - Eigen::MatrixXd(jad)).cwiseAbs().maxCoeff(), 1e-14);
  }
  for (int i = 0; i < 200; ++i) {
    const double m = 4.0 * u(rng), x0 = u(rng);
    Eigen::Matrix<Eigen::AutoDiffScalar<Eigen::VectorXd>, 1, 1> x;
    x(0) = Eigen::AutoDiffScalar<Eigen::VectorXd>(x0, 1, 0);
    const auto y = step(MapSpec::logistic1d(m), x);
    EXPECT_NEAR(jacobian(MapSpec::logistic1d(m), v1(x0))(0, 0), y(0).derivatives()(0), 1e-14);
  }
}

TEST(Trajectory, Examples) {
  const Trajectory conv = trajectory(MapSpec::logistic1d(2.0), v1(0.3), 50);
  EXPECT_EQ(conv.length(), 51);
  EXPECT_NEAR(conv.states(0, 50), 0.5, 1e-9);
  const Trajectory hit = trajectory(MapSpec::logistic1d(4.0), v1(0.5), 2);
  EXPECT_DOUBLE_EQ(hit.states(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(hit.states(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(hit.states(0, 2), 0.0);
  const Trajectory two = trajectory(MapSpec::logistic2d(0.6, 0.1), v2(0.5, 0.5), 1);
  EXPECT_NEAR(two.states(0, 1), 0.65, 1e-15);
  EXPECT_NEAR(two.states(1, 1), 0.65, 1e-15);
}

TEST(Trajectory, StaysInUnitBox) {
  std::mt19937_64 rng(2);
  for (const double mu : MuGrid::preset(System::Logistic1D).values) {
    const Trajectory t = trajectory(MapSpec::logistic1d(mu), draw_initial_state(rng, System::Logistic1D), 500);
    EXPECT_GE(t.states.minCoeff(), 0.0);
    EXPECT_LE(t.states.maxCoeff(), 1.0);
  }
  for (const double mu : MuGrid::preset(System::Logistic2D).values) {
    const Trajectory t = trajectory(MapSpec::logistic2d(mu), draw_initial_state(rng, System::Logistic2D), 500);
    EXPECT_GE(t.states.minCoeff(), 0.0);
    EXPECT_LE(t.states.maxCoeff(), 1.0);
  }
}

TEST(QrPositive, OrthogonalFactorAndNonNegativeDiagonal) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int i = 0; i < 100; ++i) {
    Eigen::MatrixXd a(2, 2);
    for (int k = 0; k < 4; ++k) a(k) = n(rng);
    Eigen::MatrixXd q, r;
    qr_positive(a, q, r);
    EXPECT_LT((q.transpose() * q - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(r(1, 0), 0.0);
    EXPECT_GE(r(0, 0), 0.0);
    EXPECT_GE(r(1, 1), 0.0);
    EXPECT_LT((q * r - a).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Lyapunov, FixedPointAndFullyChaotic) {
  EXPECT_NEAR(lyapunov_true(MapSpec::logistic1d(2.2), v1(0.3)).exponents(0), std::log(0.2), 1e-6);
  std::mt19937_64 rng(4);
  double mean = 0.0;
  for (int s = 0; s < 5; ++s) mean += lyapunov_true(MapSpec::logistic1d(4.0), draw_initial_state(rng, System::Logistic1D)).exponents(0);
  EXPECT_NEAR(mean / 5, std::numbers::ln2, 0.05);
}

TEST(Lyapunov, SignStructure) {
  const Eigen::VectorXd x0 = v1(0.123);
  for (const double mu : {2.2, 3.2, 3.4}) EXPECT_LT(lyapunov_true(MapSpec::logistic1d(mu), x0).exponents(0), 0.0) << mu;
  EXPECT_GT(lyapunov_true(MapSpec::logistic1d(3.92), x0).exponents(0), 0.0);
}

TEST(Lyapunov, DecoupledPairMatchesTwoScalarMaps) {
  std::mt19937_64 rng(5);
  for (const double mu : {0.55, 0.7, 0.8, 0.9}) {
    const Eigen::VectorXd x0 = draw_initial_state(rng, System::Logistic2D);
    const Eigen::VectorXd pair = lyapunov_true(MapSpec::logistic2d(mu, 0.0), x0).exponents;
    Eigen::Vector2d single(lyapunov_true(MapSpec::logistic1d(4 * mu), v1(x0(0))).exponents(0),
                           lyapunov_true(MapSpec::logistic1d(4 * mu), v1(x0(1))).exponents(0));
    std::sort(single.data(), single.data() + 2, std::greater<>());
    EXPECT_LT((pair - Eigen::VectorXd(single)).cwiseAbs().maxCoeff(), 1e-8) << mu;
  }
}

TEST(Lyapunov, AccumulatorFloorsZeroDerivative) {
  LyapunovAccumulator acc(1);
  acc.push(Eigen::MatrixXd::Zero(1, 1));
  EXPECT_NEAR(acc.exponents()(0), std::log(kLogFloor), 1e-9);
  const auto a = lyapunov_true(MapSpec::logistic1d(3.3), v1(0.2));
  const auto b = lyapunov_true(MapSpec::logistic1d(3.3), v1(0.2));
  EXPECT_EQ(a.exponents, b.exponents);
}
