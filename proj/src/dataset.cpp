#include "chaos/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <map>

namespace chaos {

using nlohmann::json;

namespace {
constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kTestStream = 2;
constexpr std::uint64_t kSubsampleStream = 3;
}  // namespace

MuGrid MuGrid::preset(System system) {
  MuGrid g;
  if (system == System::Logistic1D) {
    for (int k = 1; k <= 50; ++k) g.values.push_back((200.0 + 4.0 * k) / 100.0);
  } else {
    for (int k = 1; k <= 40; ++k) g.values.push_back((50.0 + k) / 100.0);
  }
  return g;
}

int default_window(System system) { return system == System::Logistic1D ? 8 : 4; }

MapSpec map_for(System system, double mu) {
  return system == System::Logistic1D ? MapSpec::logistic1d(mu) : MapSpec::logistic2d(mu, kBeta2D);
}

std::string to_string(Role r) { return r == Role::Train ? "train" : "test"; }

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t sub) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(sub),
                    static_cast<std::uint32_t>(sub >> 32)};
  return std::mt19937_64(seq);
}

double draw_initial_state(std::mt19937_64& rng) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return 1e-6 + (1.0 - 2e-6) * u;
}

Eigen::VectorXd draw_initial_state(std::mt19937_64& rng, System system) {
  Eigen::VectorXd x(dimension(system));
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = draw_initial_state(rng);
  return x;
}

Sample make_sample(const MapSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x1, int window) {
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  const Eigen::Index dim = dimension(spec.kind);
  const Trajectory traj = trajectory(spec, x1, window);
  Sample s;
  s.mu = spec.mu;
  s.features.resize(window * dim);
  for (int t = 0; t < window; ++t) s.features.segment(t * dim, dim) = traj.states.col(t);
  s.label = traj.states.col(window);
  return s;
}

std::pair<Dataset, Dataset> generate(System system, const MuGrid& grid, int n_train, int n_test, int window,
                                     std::uint64_t seed) {
  if (n_train < 1 || n_test < 1) throw std::invalid_argument("generate needs n_train, n_test >= 1");
  Dataset train{system, window, grid.values, Role::Train, seed, {}};
  Dataset test{system, window, grid.values, Role::Test, seed, {}};
  train.samples.reserve(grid.size() * n_train);
  test.samples.reserve(grid.size() * n_test);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const MapSpec spec = map_for(system, grid.values[k]);
    validate(spec);
    auto train_rng = make_stream(seed, kTrainStream, k);
    for (int n = 0; n < n_train; ++n) {
      train.samples.push_back(make_sample(spec, draw_initial_state(train_rng, system), window));
    }
    auto test_rng = make_stream(seed, kTestStream, k);
    for (int n = 0; n < n_test; ++n) {
      test.samples.push_back(make_sample(spec, draw_initial_state(test_rng, system), window));
    }
  }
  return {std::move(train), std::move(test)};
}

Dataset subsample_per_mu(const Dataset& ds, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("subsample_per_mu needs n >= 1");
  std::map<double, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) groups[ds.samples[i].mu].push_back(i);
  Dataset out = ds;
  out.samples.clear();
  for (std::size_t k = 0; k < ds.mu_grid.size(); ++k) {
    auto it = groups.find(ds.mu_grid[k]);
    if (it == groups.end()) continue;
    std::vector<std::size_t> idx = it->second;
    auto rng = make_stream(seed, kSubsampleStream, k);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(n)));
    std::sort(idx.begin(), idx.end());
    for (std::size_t i : idx) out.samples.push_back(ds.samples[i]);
  }
  return out;
}

Batch to_batch(const std::vector<Sample>& samples, std::span<const std::size_t> index) {
  Batch b;
  if (index.empty()) return b;
  const Eigen::Index nf = samples[index[0]].features.size();
  const Eigen::Index dim = samples[index[0]].label.size();
  const auto n = static_cast<Eigen::Index>(index.size());
  b.features.resize(nf, n);
  b.labels.resize(dim, n);
  b.mus.resize(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const Sample& s = samples[index[c]];
    b.features.col(c) = s.features;
    b.labels.col(c) = s.label;
    b.mus(c) = s.mu;
  }
  return b;
}

Batch to_batch(const Dataset& ds) {
  std::vector<std::size_t> idx(ds.samples.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return to_batch(ds.samples, idx);
}

namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_json_array(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void save(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::ios_base::failure("cannot open '" + path.string() + "' for writing");
  json header = {{"schema", kDatasetSchema},
                 {"system", to_string(ds.system)},
                 {"M", ds.window},
                 {"mu_grid", ds.mu_grid},
                 {"role", to_string(ds.role)},
                 {"seed", ds.seed},
                 {"n_samples", ds.samples.size()}};
  out << header.dump() << '\n';
  for (const Sample& s : ds.samples) {
    json line = {{"mu", s.mu}, {"features", to_vector(s.features)}, {"label", to_vector(s.label)}};
    out << line.dump() << '\n';
  }
  if (!out) throw std::ios_base::failure("write failed for '" + path.string() + "'");
}

Dataset load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw DatasetError("empty dataset file");
  Dataset ds;
  std::size_t expected = 0;
  try {
    const json header = json::parse(line);
    const int schema = header.at("schema").get<int>();
    if (schema != kDatasetSchema) {
      throw DatasetError("unsupported dataset schema version " + std::to_string(schema));
    }
    ds.system = system_from_string(header.at("system").get<std::string>());
    ds.window = header.at("M").get<int>();
    ds.mu_grid = header.at("mu_grid").get<std::vector<double>>();
    const auto role = header.at("role").get<std::string>();
    if (role != "train" && role != "test") throw DatasetError("unknown role '" + role + "'");
    ds.role = role == "train" ? Role::Train : Role::Test;
    ds.seed = header.at("seed").get<std::uint64_t>();
    expected = header.at("n_samples").get<std::size_t>();
  } catch (const json::exception& e) {
    throw DatasetError(std::string("malformed dataset header: ") + e.what());
  }
  const Eigen::Index dim = dimension(ds.system);
  ds.samples.reserve(expected);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      Sample s{from_json_array(j.at("features")), from_json_array(j.at("label")), j.at("mu").get<double>()};
      if (s.label.size() != dim || s.features.size() != ds.window * dim) {
        throw DatasetError("sample shape does not match header");
      }
      ds.samples.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw DatasetError(std::string("malformed sample line: ") + e.what());
    }
  }
  if (ds.samples.size() != expected) {
    throw DatasetError("truncated dataset: expected " + std::to_string(expected) + " samples, found " +
                       std::to_string(ds.samples.size()));
  }
  return ds;
}

}  // namespace chaos
