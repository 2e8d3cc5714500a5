#include "helpers.hpp"

#include "chaos/autodiff.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace chaos;
using chaos::check::Builder;
using chaos::check::gaussian;
using chaos::check::gradient_error;
using chaos::check::project;
using chaos::check::uniform;
using chaos::check::uniform_int;

namespace {

constexpr int kInstances = 100;
constexpr double kOpTolerance = 1e-5;

struct Case {
  const char* name;
  // Builds a random instance: parameters plus the scalar-valued graph.
  std::function<std::pair<ad::ParamMap, Builder>(std::mt19937_64&)> make;
};

std::pair<ad::ParamMap, Builder> unary(std::mt19937_64& rng, double lo, double hi, ad::Var (*op)(ad::Var)) {
  const int r = uniform_int(rng, 1, 4), c = uniform_int(rng, 1, 4);
  ad::ParamMap p{{"a", uniform(r, c, rng, lo, hi)}};
  const Eigen::MatrixXd w = gaussian(4, 4, rng);
  return {p, [w, op](ad::Tape&, const auto& v) {
            const ad::Var out = op(v.at("a"));
            return project(out, w.topLeftCorner(out.rows(), out.cols()));
          }};
}

std::pair<ad::ParamMap, Builder> binary(std::mt19937_64& rng, double lo, double hi, ad::Var (*op)(ad::Var, ad::Var)) {
  const int r = uniform_int(rng, 1, 4), c = uniform_int(rng, 1, 4);
  ad::ParamMap p{{"a", gaussian(r, c, rng)}, {"b", uniform(r, c, rng, lo, hi)}};
  const Eigen::MatrixXd w = gaussian(r, c, rng);
  return {p, [w, op](ad::Tape&, const auto& v) { return project(op(v.at("a"), v.at("b")), w); }};
}

const std::vector<Case>& cases() {
  static const std::vector<Case> all = {
      {"add", [](auto& g) { return binary(g, -1, 1, ad::add); }},
      {"sub", [](auto& g) { return binary(g, -1, 1, ad::sub); }},
      {"mul", [](auto& g) { return binary(g, -1, 1, ad::mul); }},
      {"div", [](auto& g) { return binary(g, 0.5, 2, ad::div); }},
      {"sin", [](auto& g) { return unary(g, -3, 3, ad::sin); }},
      {"cos", [](auto& g) { return unary(g, -3, 3, ad::cos); }},
      {"tanh", [](auto& g) { return unary(g, -2, 2, ad::tanh); }},
      {"sigmoid", [](auto& g) { return unary(g, -4, 4, ad::sigmoid); }},
      {"sqrt", [](auto& g) { return unary(g, 0.2, 3, ad::sqrt); }},
      {"log", [](auto& g) { return unary(g, 0.2, 3, ad::log); }},
      {"square", [](auto& g) { return unary(g, -2, 2, ad::square); }},
      {"transpose", [](auto& g) { return unary(g, -2, 2, ad::transpose); }},
      {"colsum", [](auto& g) { return unary(g, -2, 2, ad::colsum); }},
      {"powi",
       [](auto& rng) {
         const int r = uniform_int(rng, 1, 4), k = uniform_int(rng, 0, 5);
         ad::ParamMap p{{"a", uniform(r, 3, rng, -1.5, 1.5)}};
         const Eigen::MatrixXd w = gaussian(r, 3, rng);
         return std::pair<ad::ParamMap, Builder>{p, [w, k](ad::Tape&, const auto& v) { return project(ad::powi(v.at("a"), k), w); }};
       }},
      {"scale",
       [](auto& rng) {
         ad::ParamMap p{{"a", gaussian(3, 2, rng)}};
         const Eigen::MatrixXd w = gaussian(3, 2, rng);
         const double f = gaussian(1, 1, rng)(0);
         return std::pair<ad::ParamMap, Builder>{p, [w, f](ad::Tape&, const auto& v) { return project(ad::scale(v.at("a"), f), w); }};
       }},
      {"scalar_mul",
       [](auto& rng) {
         ad::ParamMap p{{"s", gaussian(1, 1, rng)}, {"a", gaussian(3, 4, rng)}};
         const Eigen::MatrixXd w = gaussian(3, 4, rng);
         return std::pair<ad::ParamMap, Builder>{
             p, [w](ad::Tape&, const auto& v) { return project(ad::scalar_mul(v.at("s"), v.at("a")), w); }};
       }},
      {"matmul",
       [](auto& rng) {
         const int m = uniform_int(rng, 1, 5), k = uniform_int(rng, 1, 5), n = uniform_int(rng, 1, 5);
         ad::ParamMap p{{"a", gaussian(m, k, rng)}, {"b", gaussian(k, n, rng)}};
         const Eigen::MatrixXd w = gaussian(m, n, rng);
         return std::pair<ad::ParamMap, Builder>{
             p, [w](ad::Tape&, const auto& v) { return project(ad::matmul(v.at("a"), v.at("b")), w); }};
       }},
      {"broadcast",
       [](auto& rng) {
         const int m = uniform_int(rng, 1, 4), n = uniform_int(rng, 1, 4);
         ad::ParamMap p{{"col", gaussian(m, 1, rng)}, {"row", gaussian(1, n, rng)}};
         const Eigen::MatrixXd w = gaussian(m, n, rng);
         return std::pair<ad::ParamMap, Builder>{p, [w, m, n](ad::Tape&, const auto& v) {
           return project(ad::mul(ad::broadcast_cols(v.at("col"), n), ad::broadcast_rows(v.at("row"), m)), w);
         }};
       }},
      {"rows_vstack",
       [](auto& rng) {
         ad::ParamMap p{{"a", gaussian(5, 3, rng)}, {"b", gaussian(2, 3, rng)}};
         const Eigen::MatrixXd w = gaussian(6, 3, rng);
         return std::pair<ad::ParamMap, Builder>{p, [w](ad::Tape&, const auto& v) {
           const ad::Var parts[] = {ad::rows(v.at("a"), 1, 3), v.at("b"), ad::rows(v.at("a"), 0, 1)};
           return project(ad::vstack(parts), w);
         }};
       }},
      {"gather",
       [](auto& rng) {
         ad::ParamMap p{{"a", gaussian(4, 5, rng)}};
         std::vector<Eigen::Index> ci{4, 0, 0, 2}, ri{3, 1, 3};
         const Eigen::MatrixXd w = gaussian(3, 4, rng);
         return std::pair<ad::ParamMap, Builder>{p, [w, ci, ri](ad::Tape&, const auto& v) {
           return project(ad::gather_rows(ad::gather_cols(v.at("a"), ci), ri), w);
         }};
       }},
      {"khatri_rao",
       [](auto& rng) {
         const int p1 = uniform_int(rng, 1, 4), q = uniform_int(rng, 1, 4), n = uniform_int(rng, 1, 4);
         ad::ParamMap p{{"a", gaussian(p1, n, rng)}, {"b", gaussian(q, n, rng)}};
         const Eigen::MatrixXd w = gaussian(p1 * q, n, rng);
         return std::pair<ad::ParamMap, Builder>{
             p, [w](ad::Tape&, const auto& v) { return project(ad::khatri_rao(v.at("a"), v.at("b")), w); }};
       }},
      {"apply_two_site",
       [](auto& rng) {
         const int d = uniform_int(rng, 2, 3), left = uniform_int(rng, 1, 3), right = uniform_int(rng, 1, 3);
         const int b = uniform_int(rng, 1, 3);
         ad::ParamMap p{{"state", gaussian(left * d * d * right, b, rng)}, {"gate", gaussian(d * d, d * d, rng)}};
         const Eigen::MatrixXd w = gaussian(left * d * d * right, b, rng);
         return std::pair<ad::ParamMap, Builder>{p, [w, left, right](ad::Tape&, const auto& v) {
           return project(ad::apply_two_site(v.at("state"), v.at("gate"), left, right), w);
         }};
       }},
      {"composition",
       [](auto& rng) {
         ad::ParamMap p{{"w1", gaussian(4, 3, rng, 0.5)}, {"w2", gaussian(3, 4, rng, 0.5)}, {"w3", gaussian(2, 3, rng, 0.5)},
                        {"x", gaussian(3, 5, rng)}};
         return std::pair<ad::ParamMap, Builder>{p, [](ad::Tape&, const auto& v) {
           const ad::Var h1 = ad::tanh(ad::matmul(v.at("w1"), v.at("x")));
           const ad::Var h2 = ad::sigmoid(ad::matmul(v.at("w2"), h1));
           return ad::sum(ad::square(ad::sin(ad::matmul(v.at("w3"), h2))));
         }};
       }},
  };
  return all;
}

}  // namespace

TEST(Autodiff, SquareAtThree) {
  ad::Tape tape;
  const ad::Var x = tape.parameter("x", Eigen::MatrixXd::Constant(1, 1, 3.0));
  const auto g = tape.backward(ad::sum(ad::square(x)));
  EXPECT_DOUBLE_EQ(g.at("x")(0), 6.0);
}

TEST(Autodiff, RmseAtMinimumHasZeroGradient) {
  ad::Tape tape;
  const Eigen::MatrixXd y = Eigen::MatrixXd::Constant(1, 4, 0.3);
  const ad::Var p = tape.parameter("p", y);
  const ad::Var loss = ad::sqrt(ad::scale(ad::sum(ad::square(ad::sub(p, tape.constant(y)))), 0.25));
  const auto g = tape.backward(loss);
  EXPECT_EQ(loss.scalar(), 0.0);
  EXPECT_TRUE(g.at("p").isZero(0.0));
}

TEST(Autodiff, EveryOpMatchesFiniteDifferences) {
  for (const auto& c : cases()) {
    std::mt19937_64 rng(17);
    double worst = 0.0;
    for (int i = 0; i < kInstances; ++i) {
      const auto [params, build] = c.make(rng);
      worst = std::max(worst, gradient_error(build, params));
    }
    EXPECT_LT(worst, kOpTolerance) << c.name;
  }
}

TEST(Autodiff, FiniteDifferenceOracle) {
  const ad::ParamMap p{{"x", Eigen::MatrixXd::Constant(1, 1, 0.7)}};
  const auto lin = ad::fd_gradient([](const ad::ParamMap& q) { return 3.0 * q.at("x")(0) - 2.0; }, p, 1e-5);
  EXPECT_NEAR(lin.at("x")(0), 3.0, 1e-10);
  const ad::ParamMap z{{"x", Eigen::MatrixXd::Zero(1, 1)}};
  const auto s = ad::fd_gradient([](const ad::ParamMap& q) { return std::sin(q.at("x")(0)); }, z, 1e-5);
  EXPECT_NEAR(s.at("x")(0), 1.0, 1e-10);
}

TEST(Autodiff, AccumulationIsOrderIndependent) {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd a = gaussian(3, 3, rng), w1 = gaussian(3, 3, rng), w2 = gaussian(3, 3, rng),
                        w3 = gaussian(3, 3, rng);
  const std::vector<Eigen::MatrixXd> ws{w1, w2, w3};
  std::vector<int> order{0, 1, 2};
  Eigen::MatrixXd reference;
  do {
    ad::Tape tape;
    const ad::Var x = tape.parameter("a", a);
    std::vector<ad::Var> terms;
    for (int k : order) terms.push_back(project(ad::sin(x), ws[static_cast<std::size_t>(k)]));
    const ad::Var loss = ad::add(ad::add(terms[0], terms[1]), terms[2]);
    const Eigen::MatrixXd g = tape.backward(loss).at("a");
    if (reference.size() == 0) {
      reference = g;
    } else {
      EXPECT_LT((g - reference).cwiseAbs().maxCoeff(), 1e-14);
    }
  } while (std::next_permutation(order.begin(), order.end()));
}

TEST(Autodiff, NonFiniteGradientNamesParameter) {
  ad::Tape tape;
  const ad::Var x = tape.parameter("x", Eigen::MatrixXd::Zero(1, 1));
  try {
    tape.backward(ad::sum(ad::log(x)));
    FAIL() << "expected NonFiniteGradient";
  } catch (const ad::NonFiniteGradient& e) {
    EXPECT_EQ(e.parameter(), "x");
  }
}

TEST(Autodiff, ParametersAreConstantsWhenUntracked) {
  ad::Tape tape(false);
  const ad::Var x = tape.parameter("x", Eigen::MatrixXd::Ones(2, 2));
  EXPECT_FALSE(tape.requires_grad(x));
  EXPECT_TRUE(tape.backward(ad::sum(ad::square(x))).empty());
}

TEST(Autodiff, TwoSiteMatchesKroneckerEmbedding) {
  std::mt19937_64 rng(5);
  const int d = 3;
  for (const auto [left, right] : {std::pair{2, 3}, std::pair{3, 1}, std::pair{1, 2}}) {
    const Eigen::MatrixXd gate = gaussian(d * d, d * d, rng);
    const Eigen::MatrixXd state = gaussian(left * d * d * right, 2, rng);
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(state.rows(), state.rows());
    // I_left (x) gate (x) I_right with row-major (left, q, right) indexing.
    for (int l = 0; l < left; ++l)
      for (int r = 0; r < right; ++r)
        for (int a = 0; a < d * d; ++a)
          for (int b = 0; b < d * d; ++b) full((l * d * d + a) * right + r, (l * d * d + b) * right + r) = gate(a, b);
    EXPECT_LT((ad::two_site_forward(state, gate, left, right) - full * state).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(PolarFactor, IdentityAndScaledRotation) {
  EXPECT_LT((ad::polar_factor(Eigen::MatrixXd::Identity(9, 9)) - Eigen::MatrixXd::Identity(9, 9)).norm(), 1e-14);
  const double t = 0.37;
  Eigen::Matrix2d r;
  r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  EXPECT_LT((ad::polar_factor(2.0 * r) - Eigen::MatrixXd(r)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(PolarFactor, VjpMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int i = 0; i < kInstances; ++i) {
    const int n = i % 2 == 0 ? 4 : 9;
    const ad::ParamMap p{{"g", gaussian(n, n, rng)}};
    const Eigen::MatrixXd w = gaussian(n, n, rng);
    const Builder build = [w](ad::Tape&, const auto& v) { return project(ad::unitarize(v.at("g")), w); };
    worst = std::max(worst, gradient_error(build, p));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(PolarFactor, JvpIsAdjointOfVjp) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 20; ++i) {
    const Eigen::MatrixXd g = gaussian(4, 4, rng), dir = gaussian(4, 4, rng), up = gaussian(4, 4, rng);
    const double lhs = (ad::svd_unitarize_jvp(g, dir).array() * up.array()).sum();
    const double rhs = (dir.array() * ad::svd_unitarize_vjp(g, up).array()).sum();
    EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(PolarFactor, OrthogonalInputGivesTangentVector) {
  std::mt19937_64 rng(13);
  const Eigen::MatrixXd q = ad::polar_factor(gaussian(4, 4, rng));
  EXPECT_LT((ad::polar_factor(q) - q).cwiseAbs().maxCoeff(), 1e-12);
  const Eigen::MatrixXd tangent = ad::svd_unitarize_jvp(q, gaussian(4, 4, rng));
  // d(Q^T Q) = dQ^T Q + Q^T dQ vanishes for a tangent of the orthogonal group.
  EXPECT_LT((tangent.transpose() * q + q.transpose() * tangent).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PolarFactor, DegenerateSpectrumIsRegularized) {
  const std::size_t before = ad::polar_regularization_count();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(3, 3);
  g(0, 0) = 1.0;
  const Eigen::MatrixXd out = ad::svd_unitarize_vjp(g, Eigen::MatrixXd::Ones(3, 3));
  EXPECT_TRUE(out.allFinite());
  EXPECT_GT(ad::polar_regularization_count(), before);
}
