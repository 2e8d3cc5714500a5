#pragma once

#include "chaos/dataset.hpp"
#include "chaos/dynamics.hpp"
#include "chaos/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace chaos {

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Autoregressive rollout of an ensemble. Rows of `predicted` and `truth` are
/// grouped per member (dim rows each); column t is the state at time t. The
/// first M columns are the true seed window.
struct RolloutResult {
  Eigen::MatrixXd predicted;
  Eigen::MatrixXd truth;
  Eigen::VectorXd eps;  // eps(k): mean relative error of prediction k + 1
  int window = 0;
};

inline constexpr double kRelativeErrorGuard = 1e-8;

/// x0s is dim x K. The window is seeded with M true states from each x0, then
/// the model runs for `steps` predictions.
RolloutResult rollout(const Checkpoint& ckpt, double mu, const Eigen::Ref<const Eigen::MatrixXd>& x0s, int steps);

/// K initial states from the evaluation stream for grid index `k`.
Eigen::MatrixXd initial_states(System system, std::uint64_t seed, std::uint64_t stream, std::size_t k, int count);

inline constexpr double kEtaLow = 1e-3;
inline constexpr double kEtaHigh = 0.3;

/// Least-squares slope of ln(eps) against t over the first contiguous run
/// with kEtaLow <= eps <= kEtaHigh holding at least four points.
double fit_eta(const Eigen::Ref<const Eigen::VectorXd>& eps);

inline constexpr int kImageHeight = 256;

struct BifurcationImage {
  using Pixels = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;
  Pixels pixels;  // kImageHeight x |grid|, row 0 is x = 1

  Eigen::Index width() const { return pixels.cols(); }
  Eigen::Index height() const { return pixels.rows(); }
  bool operator==(const BifurcationImage& o) const { return pixels == o.pixels; }
};

struct BifurcationOptions {
  int n_inits = 500;
  int burn_in = 200;
  int collect = 64;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Histogram of post-burn-in states (first component in 2D) per mu column.
BifurcationImage bifurcation(const Checkpoint& ckpt, const std::vector<double>& grid,
                             const BifurcationOptions& options = {});

/// Occupied-bin histogram counts behind an image, kImageHeight x |grid|.
Eigen::MatrixXi bifurcation_counts(const Checkpoint& ckpt, const std::vector<double>& grid,
                                   const BifurcationOptions& options = {});
BifurcationImage render(const Eigen::MatrixXi& counts);

/// 10 log10(255^2 / MSE); +infinity for identical images.
double psnr(const BifurcationImage& a, const BifurcationImage& b);

void write_pgm(const BifurcationImage& img, const std::filesystem::path& path);
BifurcationImage read_pgm(const std::filesystem::path& path);

struct LyapunovOptions {
  int steps = kDefaultLyapunovSteps;
  int burn_in = kDefaultLyapunovBurnIn;
  int rollouts = 5;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Per-mu spectra (|grid| x dim, each row sorted descending) for the model and
/// for the true map started from the same initial states.
struct LyapunovComparison {
  std::vector<double> grid;
  Eigen::MatrixXd model;
  Eigen::MatrixXd truth;
};

LyapunovComparison model_lyapunov(const Checkpoint& ckpt, const std::vector<double>& grid,
                                  const LyapunovOptions& options = {});

/// RMSE over every (mu, exponent) pair.
double l_le(const Eigen::Ref<const Eigen::MatrixXd>& model, const Eigen::Ref<const Eigen::MatrixXd>& truth);

/// Per mu: whether the leading exponents agree on chaos (positive) or not.
std::vector<bool> sign_agreement(const Eigen::Ref<const Eigen::MatrixXd>& model,
                                 const Eigen::Ref<const Eigen::MatrixXd>& truth);
double agreement_fraction(const std::vector<bool>& agree);

struct EtaFit {
  double mu = 0.0;
  std::optional<double> eta;
};

struct EvalOptions {
  bool lyapunov = true;
  bool bifurcation = true;
  bool rollout = true;
  std::uint64_t seed = 0;
  int rollout_inits = 500;
  int rollout_steps = 60;
  LyapunovOptions lyapunov_options;
  BifurcationOptions bifurcation_options;
  int threads = 1;  // overrides the per-analysis thread counts
};

struct EvalReport {
  std::string preset;
  System system = System::Logistic1D;
  std::vector<double> grid;
  std::vector<bool> extrapolated;
  std::optional<LyapunovComparison> lyapunov;
  double l_le = 0.0;
  std::vector<bool> sign_agree;
  double sign_accuracy = 0.0;
  std::optional<BifurcationImage> model_image, true_image;
  std::optional<double> psnr;
  std::vector<EtaFit> eta;
  std::vector<RolloutResult> rollouts;  // aligned with `eta`
  std::optional<double> test_rmse;
};

/// Runs the selected analyses over `grid`. `test` adds the test RMSE.
EvalReport evaluate(const Checkpoint& ckpt, const std::vector<double>& grid, const EvalOptions& options,
                    const Dataset* test = nullptr);

void write_report_json(const EvalReport& report, const std::filesystem::path& path);
void write_lyapunov_csv(const EvalReport& report, const std::filesystem::path& path);
void write_rollout_csv(const EvalReport& report, const std::filesystem::path& path);

}  // namespace chaos
