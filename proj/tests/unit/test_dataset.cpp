#include "chaos/dataset.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

using namespace chaos;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("chaos_unit_" + name);
}

}  // namespace

TEST(MuGrid, Presets) {
  const auto g1 = MuGrid::preset(System::Logistic1D);
  ASSERT_EQ(g1.size(), 50u);
  EXPECT_DOUBLE_EQ(g1.values.front(), 2.04);
  EXPECT_DOUBLE_EQ(g1.values.back(), 4.0);
  EXPECT_DOUBLE_EQ(g1.values[4], 2.2);
  const auto g2 = MuGrid::preset(System::Logistic2D);
  ASSERT_EQ(g2.size(), 40u);
  EXPECT_DOUBLE_EQ(g2.values.front(), 0.51);
  EXPECT_DOUBLE_EQ(g2.values.back(), 0.9);
  EXPECT_EQ(default_window(System::Logistic1D), 8);
  EXPECT_EQ(default_window(System::Logistic2D), 4);
}

TEST(Dataset, OrbitThroughZero) {
  const Sample s = make_sample(MapSpec::logistic1d(4.0), Eigen::VectorXd::Constant(1, 0.5), 8);
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(8);
  expected(0) = 0.5;
  expected(1) = 1.0;
  EXPECT_EQ(s.features, expected);
  EXPECT_EQ(s.label(0), 0.0);
}

TEST(Dataset, CountsDeterminismAndLabels) {
  const MuGrid grid{{2.2, 3.5, 4.0}};
  const auto [train, test] = generate(System::Logistic1D, grid, 30, 10, 8, 7);
  EXPECT_EQ(train.samples.size(), 90u);
  EXPECT_EQ(test.samples.size(), 30u);
  const auto [train2, test2] = generate(System::Logistic1D, grid, 30, 10, 8, 7);
  EXPECT_EQ(train, train2);
  EXPECT_EQ(test, test2);
  for (const auto& s : train.samples) {
    EXPECT_EQ(step(MapSpec::logistic1d(s.mu), s.features.tail(1)), s.label);
    EXPECT_GT(s.features(0), 0.0);
    EXPECT_LT(s.features(0), 1.0);
  }
  std::set<double> starts;
  for (const auto& s : train.samples) starts.insert(s.features(0));
  for (const auto& s : test.samples) EXPECT_FALSE(starts.count(s.features(0)));
  const auto [other, unused] = generate(System::Logistic1D, grid, 30, 10, 8, 8);
  EXPECT_NE(train, other);
}

TEST(Dataset, TwoDimensionalLayout) {
  const MuGrid grid{{0.6, 0.9}};
  const auto [train, test] = generate(System::Logistic2D, grid, 5, 2, 4, 1);
  for (const auto& s : train.samples) {
    ASSERT_EQ(s.features.size(), 8);
    ASSERT_EQ(s.label.size(), 2);
    const Eigen::VectorXd x1 = s.features.segment(0, 2);
    EXPECT_EQ(step(MapSpec::logistic2d(s.mu), x1), s.features.segment(2, 2));
    EXPECT_EQ(step(MapSpec::logistic2d(s.mu), s.features.tail(2)), s.label);
  }
  const Batch b = to_batch(train);
  EXPECT_EQ(b.features.rows(), 8);
  EXPECT_EQ(b.labels.rows(), 2);
  EXPECT_EQ(b.size(), 10);
}

TEST(Dataset, SubsamplePerMu) {
  const MuGrid grid{{2.5, 3.0}};
  const auto [train, test] = generate(System::Logistic1D, grid, 30, 1, 8, 3);
  const Dataset sub = subsample_per_mu(train, 20, 11);
  ASSERT_EQ(sub.samples.size(), 40u);
  EXPECT_EQ(subsample_per_mu(train, 20, 11), sub);
  EXPECT_NE(subsample_per_mu(train, 20, 12), sub);
  int low = 0;
  for (const auto& s : sub.samples) low += s.mu == 2.5;
  EXPECT_EQ(low, 20);
  EXPECT_EQ(subsample_per_mu(train, 100, 1).samples.size(), 60u);
}

TEST(Dataset, RoundTripAndErrors) {
  const MuGrid grid{{2.2, 0.5 * 7.0}};
  const auto [train, test] = generate(System::Logistic1D, grid, 4, 2, 8, 9);
  const auto path = temp_path("round_trip.jsonl");
  save(train, path);
  EXPECT_EQ(load(path), train);

  std::ifstream in(path);
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  in.close();
  {
    std::ofstream cut(path, std::ios::trunc);
    cut << header << '\n' << first << '\n';
  }
  EXPECT_THROW(load(path), DatasetError);
  {
    std::string wrong = header;
    wrong.replace(wrong.find("\"schema\":1"), 10, "\"schema\":9");
    std::ofstream out(path, std::ios::trunc);
    out << wrong << '\n';
  }
  EXPECT_THROW(load(path), DatasetError);
  EXPECT_THROW(load(temp_path("does_not_exist.jsonl")), std::exception);
  std::filesystem::remove(path);
}
