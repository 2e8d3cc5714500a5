#include "suites.hpp"

#include "chaos/adqc.hpp"
#include "chaos/model.hpp"
#include "chaos/presets.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace chaos;
using chaos::check::gaussian;

namespace {

Eigen::MatrixXd unit_columns(Eigen::MatrixXd m) {
  m.colwise().normalize();
  return m;
}

}  // namespace

TEST(Embed, BasisAndProducts) {
  Eigen::MatrixXd sites = Eigen::MatrixXd::Zero(3, 4);
  sites.row(0).setOnes();
  const StateTensor s = embed(sites);
  EXPECT_EQ(s.amplitudes.size(), 81);
  EXPECT_EQ(s.amplitudes(0), 1.0);
  EXPECT_EQ(s.amplitudes.tail(80).cwiseAbs().sum(), 0.0);

  Eigen::MatrixXd ab(3, 2);
  ab << 0.6, 0.0, 0.8, 0.28, 0.0, 0.96;
  const StateTensor p = embed(ab);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(p.amplitudes(i * 3 + j), ab(i, 0) * ab(j, 1), 1e-15);
  EXPECT_NEAR(p.amplitudes.norm(), 1.0, 1e-15);
}

TEST(Embed, NormalizesAndRejectsZero) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 100; ++i) EXPECT_NEAR(embed(gaussian(3, 6, rng)).amplitudes.norm(), 1.0, 1e-12);
  Eigen::MatrixXd z = gaussian(3, 3, rng);
  z.col(1).setZero();
  EXPECT_THROW(embed(z), EmbeddingError);
}

TEST(Unitarize, IdentityScaledRotationAndRandom) {
  EXPECT_LT((unitarize(Eigen::MatrixXd::Identity(9, 9)) - Eigen::MatrixXd::Identity(9, 9)).norm(), 1e-14);
  std::mt19937_64 rng(32);
  const Eigen::MatrixXd r = unitarize(gaussian(9, 9, rng));
  EXPECT_LT((unitarize(2.0 * r) - r).cwiseAbs().maxCoeff(), 1e-12);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::MatrixXd u = unitarize(gaussian(9, 9, rng));
    EXPECT_LT((u.transpose() * u - Eigen::MatrixXd::Identity(9, 9)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Circuit, LayoutIsBrickWall) {
  const CircuitLayout l{8, 3, 4};
  const auto gates = l.gates();
  ASSERT_EQ(gates.size(), 14u);
  EXPECT_EQ(gates[0].site, 0);
  EXPECT_EQ(gates[3].site, 6);
  EXPECT_EQ(gates[4].layer, 1);
  EXPECT_EQ(gates[4].site, 1);
  EXPECT_EQ(l.state_size(), 6561);
}

TEST(Circuit, IdentityGatesLeaveStateUnchanged) {
  std::mt19937_64 rng(33);
  const CircuitLayout l{5, 3, 3};
  const StateTensor in = embed(gaussian(3, 5, rng));
  const StateTensor out = apply_circuit(in, AdqcParams::identity(l).latent_gates, l);
  EXPECT_LT((out.amplitudes - in.amplitudes).norm(), 1e-14);
}

TEST(Circuit, SwapGatePermutesSites) {
  std::mt19937_64 rng(34);
  const int d = 3;
  const CircuitLayout l{4, d, 2};
  AdqcParams p = AdqcParams::identity(l);
  Eigen::MatrixXd swap = Eigen::MatrixXd::Zero(d * d, d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) swap(j * d + i, i * d + j) = 1.0;
  const auto gates = l.gates();
  for (std::size_t g = 0; g < gates.size(); ++g) {
    if (gates[g].layer == 1 && gates[g].site == 1) p.latent_gates[g] = swap;
  }
  const Eigen::MatrixXd sites = unit_columns(gaussian(d, 4, rng));
  Eigen::MatrixXd swapped = sites;
  swapped.col(1) = sites.col(2);
  swapped.col(2) = sites.col(1);
  EXPECT_LT((apply_circuit(embed(sites), p.latent_gates, l).amplitudes - embed(swapped).amplitudes).norm(), 1e-14);
}

TEST(Circuit, PreservesNorm) {
  std::mt19937_64 rng(35);
  for (int i = 0; i < 1000; ++i) {
    const CircuitLayout l{check::uniform_int(rng, 2, 5), check::uniform_int(rng, 2, 3), check::uniform_int(rng, 1, 4)};
    AdqcParams p = AdqcParams::identity(l);
    for (auto& g : p.latent_gates) g = gaussian(g.rows(), g.cols(), rng);
    StateTensor s = embed(gaussian(l.d, l.n_sites, rng));
    s.amplitudes *= 1.7;
    EXPECT_NEAR(apply_circuit(s, p.latent_gates, l).amplitudes.norm(), 1.7, 1.7e-10);
  }
}

TEST(Readout, Examples) {
  Eigen::MatrixXd sites = Eigen::MatrixXd::Zero(3, 3);
  sites.col(0) << 0.0, 1.0, 0.0;
  sites.col(1) << 0.0, 0.0, 1.0;
  sites.col(2) << 1.0, 0.0, 0.0;
  EXPECT_NEAR(readout(embed(sites), {2})(0), 1.0, 1e-15);
  sites.col(2) << 0.0, 1.0, 0.0;
  EXPECT_NEAR(readout(embed(sites), {2})(0), 0.0, 1e-15);
  sites.col(2) << std::sqrt(0.3), std::sqrt(0.7), 0.0;
  EXPECT_NEAR(readout(embed(sites), {2})(0), 0.3, 1e-15);
  EXPECT_EQ(readout_sites(System::Logistic1D, 8), std::vector<int>{7});
  EXPECT_EQ(readout_sites(System::Logistic2D, 8), (std::vector<int>{6, 7}));
}

TEST(Predict, HandSetEncoderReadsOne) {
  const CircuitLayout l{8, 3, 4};
  EncoderParams e = EncoderParams::zeros(3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) e.at(i, j, 0) = 1.0;
  const Sample s = make_sample(MapSpec::logistic1d(3.7), Eigen::VectorXd::Constant(1, 0.21), 8);
  EXPECT_NEAR(predict_dense(s, e, AdqcParams::identity(l), System::Logistic1D)(0), 1.0, 1e-14);
}

TEST(Predict, LightConeMatchesDenseCircuit) {
  std::mt19937_64 rng(36);
  for (const char* name : {"adqc-1d-mu", "adqc-2d-mu"}) {
    Checkpoint c = initialize(find_preset(name), 5);
    auto& p = std::get<AdqcParams>(c.model);
    for (auto& g : p.latent_gates) g += gaussian(g.rows(), g.cols(), rng, 0.4);
    const Batch b = check::random_batch(c, rng, 6);
    const Eigen::MatrixXd fast = predict_batch(c, b.features, b.mus);
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      Sample s{b.features.col(i), b.labels.col(i), b.mus(i)};
      const Eigen::VectorXd dense = predict_dense(s, *c.encoder, p, c.system);
      EXPECT_LT((fast.col(i) - dense).cwiseAbs().maxCoeff(), 1e-12) << name;
      EXPECT_LT((predict_window(c, b.features.col(i), b.mus(i)) - fast.col(i)).cwiseAbs().maxCoeff(), 1e-14)
          << "batch invariance";
    }
    EXPECT_GE(fast.minCoeff(), 0.0);
    EXPECT_LE(fast.maxCoeff(), 1.0);
  }
}

TEST(Predict, LightConeOfPresets) {
  const CircuitLayout l{8, 3, 4};
  const LightCone one = light_cone(l, {7});
  EXPECT_EQ(one.first_site, 4);
  EXPECT_EQ(one.gates.size(), 4u);
  EXPECT_EQ(light_cone(l, {6, 7}).first_site, 2);
}

TEST(Predict, GradientMatchesFiniteDifferences) { EXPECT_LT(check::adqc_gradient_suite(100, 37), 1e-4); }

TEST(Params, InitialGatesNearIdentity) {
  std::mt19937_64 rng(38);
  const AdqcParams p = AdqcParams::initial(CircuitLayout{8, 3, 4}, rng);
  ASSERT_EQ(p.latent_gates.size(), 14u);
  for (const auto& g : p.latent_gates) {
    const double dev = (g - Eigen::MatrixXd::Identity(9, 9)).cwiseAbs().maxCoeff();
    EXPECT_GT(dev, 0.0);
    EXPECT_LT(dev, 0.1);
  }
  AdqcParams bad = p;
  bad.latent_gates.pop_back();
  EXPECT_THROW(validate(bad), std::invalid_argument);
}
