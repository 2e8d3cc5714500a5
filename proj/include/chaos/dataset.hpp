#pragma once

// One-step-ahead samples drawn from logistic-map orbits, and their JSON-lines
// file format.

#include "chaos/dynamics.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace chaos {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kDatasetSchema = 1;
inline constexpr double kBeta2D = 0.1;

struct MuGrid {
  std::vector<double> values;

  /// 1D: 2.04, 2.08, ..., 4.00 (50 values). 2D: 0.51, ..., 0.90 (40 values).
  static MuGrid preset(System system);
  std::size_t size() const { return values.size(); }
};

/// Preset window lengths: 8 states (1D), 4 state pairs (2D).
int default_window(System system);
MapSpec map_for(System system, double mu);

/// Features hold M states (2D interleaved as x1, x1', ..., xM, xM'); the
/// label is the state that follows the last one.
struct Sample {
  Eigen::VectorXd features;
  Eigen::VectorXd label;
  double mu = 0.0;

  bool operator==(const Sample& other) const {
    return mu == other.mu && features == other.features && label == other.label;
  }
};

enum class Role { Train, Test };
std::string to_string(Role r);

struct Dataset {
  System system = System::Logistic1D;
  int window = 8;
  std::vector<double> mu_grid;
  Role role = Role::Train;
  std::uint64_t seed = 0;
  std::vector<Sample> samples;  // grouped by mu, in grid order

  bool operator==(const Dataset& other) const = default;
};

/// Column-major view of a set of samples, as consumed by the models.
struct Batch {
  Eigen::MatrixXd features;  // (M * dim) x N
  Eigen::MatrixXd labels;    // dim x N
  Eigen::RowVectorXd mus;    // 1 x N

  Eigen::Index size() const { return features.cols(); }
};

Batch to_batch(const Dataset& ds);
Batch to_batch(const std::vector<Sample>& samples, std::span<const std::size_t> index);

/// Independent RNG stream from (seed, stream id, sub-stream). Train, test and
/// subsampling use different stream ids.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t sub = 0);
/// Uniform on (1e-6, 1 - 1e-6) with 53 random bits.
double draw_initial_state(std::mt19937_64& rng);
Eigen::VectorXd draw_initial_state(std::mt19937_64& rng, System system);

/// Sample whose first feature state is x1.
Sample make_sample(const MapSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x1, int window);

std::pair<Dataset, Dataset> generate(System system, const MuGrid& grid, int n_train, int n_test, int window,
                                     std::uint64_t seed);

/// Seeded shuffle per mu, keeping the first n of each group.
Dataset subsample_per_mu(const Dataset& ds, int n, std::uint64_t seed);

void save(const Dataset& ds, const std::filesystem::path& path);
Dataset load(const std::filesystem::path& path);

}  // namespace chaos
