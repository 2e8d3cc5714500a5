#include "chaos/evaluation.hpp"

#include "chaos/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace chaos {

using json = nlohmann::json;

namespace {

constexpr std::uint64_t kLyapunovStream = 5;
constexpr std::uint64_t kBifurcationStream = 6;
constexpr std::uint64_t kRolloutStream = 7;

// Window of M true states per column, oldest first: (M * dim) x K.
Eigen::MatrixXd seed_windows(const Checkpoint& ckpt, const MapSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& x0s) {
  const int dim = ckpt.dim();
  Eigen::MatrixXd features(ckpt.feature_count(), x0s.cols());
  for (Eigen::Index b = 0; b < x0s.cols(); ++b) {
    Eigen::VectorXd x = x0s.col(b);
    for (int t = 0; t < ckpt.window; ++t) {
      features.col(b).segment(t * dim, dim) = x;
      if (t + 1 < ckpt.window) x = step(spec, x);
    }
  }
  return features;
}

void advance(Eigen::MatrixXd& features, const Eigen::MatrixXd& next) {
  const Eigen::Index dim = next.rows();
  const Eigen::Index keep = features.rows() - dim;
  features.topRows(keep) = features.bottomRows(keep).eval();
  features.bottomRows(dim) = next;
}

}  // namespace

Eigen::MatrixXd initial_states(System system, std::uint64_t seed, std::uint64_t stream, std::size_t k, int count) {
  auto rng = make_stream(seed, stream, k);
  Eigen::MatrixXd out(dimension(system), count);
  for (int c = 0; c < count; ++c) out.col(c) = draw_initial_state(rng, system);
  return out;
}

RolloutResult rollout(const Checkpoint& ckpt, double mu, const Eigen::Ref<const Eigen::MatrixXd>& x0s, int steps) {
  if (steps < 1) throw std::invalid_argument("rollout needs steps >= 1");
  const int dim = ckpt.dim();
  if (x0s.rows() != dim || x0s.cols() < 1) throw std::invalid_argument("rollout: initial states must be dim x K");
  const MapSpec spec = ckpt.map(mu);
  validate(spec);
  const Eigen::Index members = x0s.cols();
  const int total = ckpt.window + steps;

  RolloutResult out;
  out.window = ckpt.window;
  out.truth.resize(dim * members, total);
  for (Eigen::Index j = 0; j < members; ++j) {
    Eigen::VectorXd x = x0s.col(j);
    for (int t = 0; t < total; ++t) {
      out.truth.block(j * dim, t, dim, 1) = x;
      x = step(spec, x);
    }
  }
  out.predicted = out.truth;
  Eigen::MatrixXd features = seed_windows(ckpt, spec, x0s);
  const Eigen::RowVectorXd mus = Eigen::RowVectorXd::Constant(members, mu);
  for (int k = 0; k < steps; ++k) {
    const Eigen::MatrixXd next = predict_batch(ckpt, features, mus);
    for (Eigen::Index j = 0; j < members; ++j) out.predicted.block(j * dim, ckpt.window + k, dim, 1) = next.col(j);
    advance(features, next);
  }

  out.eps.resize(steps);
  for (int k = 0; k < steps; ++k) {
    const Eigen::Index t = ckpt.window + k;
    double sum = 0.0;
    Eigen::Index terms = 0;
    for (Eigen::Index r = 0; r < out.truth.rows(); ++r) {
      const double y = out.truth(r, t);
      if (std::abs(y) < kRelativeErrorGuard) continue;
      sum += std::abs((out.predicted(r, t) - y) / y);
      ++terms;
    }
    out.eps(k) = terms > 0 ? sum / static_cast<double>(terms) : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

double fit_eta(const Eigen::Ref<const Eigen::VectorXd>& eps) {
  const Eigen::Index n = eps.size();
  for (Eigen::Index start = 0; start < n;) {
    const auto inside = [&](Eigen::Index t) { return eps(t) >= kEtaLow && eps(t) <= kEtaHigh; };
    if (!inside(start)) {
      ++start;
      continue;
    }
    Eigen::Index end = start;
    while (end < n && inside(end)) ++end;
    if (end - start >= 4) {
      const Eigen::Index m = end - start;
      const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(m, static_cast<double>(start), static_cast<double>(end - 1));
      const Eigen::VectorXd y = eps.segment(start, m).array().log();
      const double tm = t.mean(), ym = y.mean();
      return ((t.array() - tm) * (y.array() - ym)).sum() / (t.array() - tm).square().sum();
    }
    start = end;
  }
  throw EvaluationError("no growth window with at least 4 points in [1e-3, 0.3]");
}

Eigen::MatrixXi bifurcation_counts(const Checkpoint& ckpt, const std::vector<double>& grid,
                                   const BifurcationOptions& options) {
  if (options.n_inits < 1 || options.collect < 1) throw std::invalid_argument("bifurcation needs n_inits, collect >= 1");
  if (options.burn_in < ckpt.window - 1) throw std::invalid_argument("bifurcation burn-in shorter than the window");
  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(kImageHeight, static_cast<Eigen::Index>(grid.size()));
  const int dim = ckpt.dim();
  const int last = options.burn_in + options.collect - 1;
  parallel_for(grid.size(), options.threads, [&](std::size_t k) {
    const MapSpec spec = ckpt.map(grid[k]);
    validate(spec);
    Eigen::MatrixXd features =
        seed_windows(ckpt, spec, initial_states(ckpt.system, options.seed, kBifurcationStream, k, options.n_inits));
    const Eigen::RowVectorXd mus = Eigen::RowVectorXd::Constant(options.n_inits, grid[k]);
    const Eigen::Index latest = features.rows() - dim;
    for (int t = ckpt.window - 1;; ++t) {
      if (t >= options.burn_in) {
        for (Eigen::Index b = 0; b < features.cols(); ++b) {
          const double x = features(latest, b);
          if (!std::isfinite(x)) throw EvaluationError("non-finite state in bifurcation rollout");
          const int bin = std::clamp(static_cast<int>(std::floor(x * kImageHeight)), 0, kImageHeight - 1);
          ++counts(kImageHeight - 1 - bin, static_cast<Eigen::Index>(k));
        }
      }
      if (t == last) break;
      advance(features, predict_batch(ckpt, features, mus));
    }
  });
  return counts;
}

BifurcationImage render(const Eigen::MatrixXi& counts) {
  BifurcationImage img;
  img.pixels.resize(counts.rows(), counts.cols());
  const int peak = counts.size() > 0 ? counts.maxCoeff() : 0;
  for (Eigen::Index c = 0; c < counts.cols(); ++c) {
    for (Eigen::Index r = 0; r < counts.rows(); ++r) {
      const int shade = peak > 0 ? static_cast<int>(std::floor(255.0 * counts(r, c) / peak)) : 0;
      img.pixels(r, c) = static_cast<std::uint8_t>(255 - shade);
    }
  }
  return img;
}

BifurcationImage bifurcation(const Checkpoint& ckpt, const std::vector<double>& grid,
                             const BifurcationOptions& options) {
  return render(bifurcation_counts(ckpt, grid, options));
}

double psnr(const BifurcationImage& a, const BifurcationImage& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw std::invalid_argument("psnr: image size mismatch");
  if (a.pixels.size() == 0) throw std::invalid_argument("psnr: empty images");
  const double mse =
      (a.pixels.cast<double>() - b.pixels.cast<double>()).squaredNorm() / static_cast<double>(a.pixels.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

void write_pgm(const BifurcationImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::ios_base::failure("cannot open '" + path.string() + "' for writing");
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  for (Eigen::Index r = 0; r < img.height(); ++r) {
    for (Eigen::Index c = 0; c < img.width(); ++c) out.put(static_cast<char>(img.pixels(r, c)));
  }
  if (!out) throw std::ios_base::failure("write failed for '" + path.string() + "'");
}

BifurcationImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open '" + path.string() + "'");
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || w < 1 || h < 1 || maxval != 255) throw std::runtime_error("unsupported PGM: " + path.string());
  in.get();
  BifurcationImage img;
  img.pixels.resize(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int v = in.get();
      if (v == std::char_traits<char>::eof()) throw std::runtime_error("truncated PGM: " + path.string());
      img.pixels(r, c) = static_cast<std::uint8_t>(v);
    }
  }
  return img;
}

LyapunovComparison model_lyapunov(const Checkpoint& ckpt, const std::vector<double>& grid,
                                  const LyapunovOptions& options) {
  if (options.steps < 1 || options.rollouts < 1) throw std::invalid_argument("model_lyapunov needs steps, rollouts >= 1");
  if (options.burn_in < 0) throw std::invalid_argument("model_lyapunov needs burn_in >= 0");
  const int dim = ckpt.dim();
  const auto n_mu = static_cast<Eigen::Index>(grid.size());
  LyapunovComparison out{grid, Eigen::MatrixXd::Zero(n_mu, dim), Eigen::MatrixXd::Zero(n_mu, dim)};
  const int start = std::max(options.burn_in, ckpt.window - 1);
  const int last = start + options.steps - 1;

  parallel_for(grid.size(), options.threads, [&](std::size_t k) {
    const auto row = static_cast<Eigen::Index>(k);
    const MapSpec spec = ckpt.map(grid[k]);
    validate(spec);
    const Eigen::MatrixXd x0s = initial_states(ckpt.system, options.seed, kLyapunovStream, k, options.rollouts);
    for (int r = 0; r < options.rollouts; ++r) {
      out.truth.row(row) += lyapunov_true(spec, x0s.col(r), options.steps, start).exponents.transpose();
    }
    out.truth.row(row) /= options.rollouts;

    Eigen::MatrixXd features = seed_windows(ckpt, spec, x0s);
    const Eigen::RowVectorXd mus = Eigen::RowVectorXd::Constant(options.rollouts, grid[k]);
    std::vector<LyapunovAccumulator> acc(static_cast<std::size_t>(options.rollouts), LyapunovAccumulator(dim));
    for (int t = ckpt.window - 1;; ++t) {
      if (t >= start) {
        const Eigen::MatrixXd jac = derivative_batch(ckpt, features, mus);
        for (int r = 0; r < options.rollouts; ++r) {
          acc[static_cast<std::size_t>(r)].push(Eigen::Map<const Eigen::MatrixXd>(jac.col(r).data(), dim, dim));
        }
      }
      if (t == last) break;
      advance(features, predict_batch(ckpt, features, mus));
    }
    for (const auto& a : acc) out.model.row(row) += a.exponents().transpose();
    out.model.row(row) /= options.rollouts;
  });
  return out;
}

double l_le(const Eigen::Ref<const Eigen::MatrixXd>& model, const Eigen::Ref<const Eigen::MatrixXd>& truth) {
  if (model.rows() != truth.rows() || model.cols() != truth.cols()) {
    throw std::invalid_argument("l_le: spectra are not aligned");
  }
  if (model.size() == 0) throw std::invalid_argument("l_le of empty spectra");
  return std::sqrt((model - truth).squaredNorm() / static_cast<double>(model.size()));
}

std::vector<bool> sign_agreement(const Eigen::Ref<const Eigen::MatrixXd>& model,
                                 const Eigen::Ref<const Eigen::MatrixXd>& truth) {
  if (model.rows() != truth.rows() || model.cols() < 1 || truth.cols() < 1) {
    throw std::invalid_argument("sign_agreement: spectra are not aligned");
  }
  std::vector<bool> out(static_cast<std::size_t>(model.rows()));
  for (Eigen::Index r = 0; r < model.rows(); ++r) out[static_cast<std::size_t>(r)] = (model(r, 0) > 0) == (truth(r, 0) > 0);
  return out;
}

double agreement_fraction(const std::vector<bool>& agree) {
  if (agree.empty()) return 0.0;
  return static_cast<double>(std::count(agree.begin(), agree.end(), true)) / static_cast<double>(agree.size());
}

EvalReport evaluate(const Checkpoint& ckpt, const std::vector<double>& grid, const EvalOptions& options,
                    const Dataset* test) {
  validate(ckpt);
  EvalReport report;
  report.preset = ckpt.preset;
  report.system = ckpt.system;
  report.grid = grid;
  const std::vector<double> trained = MuGrid::preset(ckpt.system).values;
  for (double mu : grid) report.extrapolated.push_back(is_extrapolation(trained, mu));

  if (test) {
    if (test->system != ckpt.system || test->window != ckpt.window) {
      throw CheckpointError("test data does not match checkpoint");
    }
    const Batch b = to_batch(*test);
    double sse = 0.0;
    for (Eigen::Index s = 0; s < b.size(); s += 5000) {
      const Eigen::Index n = std::min<Eigen::Index>(5000, b.size() - s);
      sse += (predict_batch(ckpt, b.features.middleCols(s, n), b.mus.segment(s, n)) - b.labels.middleCols(s, n))
                 .squaredNorm();
    }
    report.test_rmse = std::sqrt(sse / static_cast<double>(b.labels.size()));
  }

  if (options.lyapunov || options.rollout) {
    LyapunovOptions lo = options.lyapunov_options;
    lo.seed = options.seed;
    lo.threads = options.threads;
    if (options.lyapunov) {
      report.lyapunov = model_lyapunov(ckpt, grid, lo);
      report.l_le = l_le(report.lyapunov->model, report.lyapunov->truth);
      report.sign_agree = sign_agreement(report.lyapunov->model, report.lyapunov->truth);
      report.sign_accuracy = agreement_fraction(report.sign_agree);
    }
    if (options.rollout) {
      const LyapunovComparison truth =
          report.lyapunov ? *report.lyapunov : model_lyapunov(Checkpoint::oracle(ckpt.system), grid, lo);
      report.eta.resize(grid.size());
      report.rollouts.resize(grid.size());
      parallel_for(grid.size(), options.threads, [&](std::size_t k) {
        report.eta[k].mu = grid[k];
        report.rollouts[k] = rollout(
            ckpt, grid[k], initial_states(ckpt.system, options.seed, kRolloutStream, k, options.rollout_inits),
            options.rollout_steps);
        if (truth.truth(static_cast<Eigen::Index>(k), 0) > 0) {
          try {
            report.eta[k].eta = fit_eta(report.rollouts[k].eps);
          } catch (const EvaluationError&) {
          }
        }
      });
    }
  }

  if (options.bifurcation) {
    BifurcationOptions bo = options.bifurcation_options;
    bo.seed = options.seed;
    bo.threads = options.threads;
    report.model_image = bifurcation(ckpt, grid, bo);
    BifurcationOptions truth_bo = bo;
    truth_bo.seed = options.seed + 1;
    report.true_image = bifurcation(Checkpoint::oracle(ckpt.system), grid, truth_bo);
    report.psnr = psnr(*report.model_image, *report.true_image);
  }
  return report;
}

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

void write_report_json(const EvalReport& report, const std::filesystem::path& path) {
  json j;
  j["preset"] = report.preset;
  j["system"] = to_string(report.system);
  j["mu_grid"] = report.grid;
  j["extrapolated"] = report.extrapolated;
  if (report.test_rmse) j["L"] = *report.test_rmse;
  if (report.lyapunov) {
    json rows = json::array();
    for (std::size_t k = 0; k < report.grid.size(); ++k) {
      const auto r = static_cast<Eigen::Index>(k);
      json e;
      e["mu"] = report.grid[k];
      e["model"] = json::array();
      e["true"] = json::array();
      for (Eigen::Index c = 0; c < report.lyapunov->model.cols(); ++c) {
        e["model"].push_back(report.lyapunov->model(r, c));
        e["true"].push_back(report.lyapunov->truth(r, c));
      }
      e["sign_agree"] = static_cast<bool>(report.sign_agree[k]);
      rows.push_back(e);
    }
    j["lyapunov"] = rows;
    j["L_LE"] = report.l_le;
    j["sign_accuracy"] = report.sign_accuracy;
  }
  if (report.psnr) {
    j["psnr_db"] = number_or_null(*report.psnr);
    j["psnr_identical"] = std::isinf(*report.psnr);
  }
  if (!report.eta.empty()) {
    json etas = json::array();
    for (const auto& e : report.eta) {
      if (e.eta) etas.push_back({{"mu", e.mu}, {"eta", *e.eta}});
    }
    j["eta"] = etas;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::ios_base::failure("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
}

void write_lyapunov_csv(const EvalReport& report, const std::filesystem::path& path) {
  if (!report.lyapunov) throw std::invalid_argument("report has no Lyapunov spectra");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::ios_base::failure("cannot open '" + path.string() + "' for writing");
  const Eigen::Index dim = report.lyapunov->model.cols();
  out << "mu";
  for (Eigen::Index c = 0; c < dim; ++c) out << ",model_le" << c + 1 << ",true_le" << c + 1;
  out << ",sign_agree,extrapolated\n" << std::setprecision(12);
  for (std::size_t k = 0; k < report.grid.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    out << report.grid[k];
    for (Eigen::Index c = 0; c < dim; ++c) out << ',' << report.lyapunov->model(r, c) << ',' << report.lyapunov->truth(r, c);
    out << ',' << (report.sign_agree[k] ? 1 : 0) << ',' << (report.extrapolated[k] ? 1 : 0) << '\n';
  }
}

void write_rollout_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::ios_base::failure("cannot open '" + path.string() + "' for writing");
  out << "mu,t,eps_r\n" << std::setprecision(12);
  for (std::size_t k = 0; k < report.rollouts.size(); ++k) {
    const auto& eps = report.rollouts[k].eps;
    for (Eigen::Index t = 0; t < eps.size(); ++t) out << report.eta[k].mu << ',' << t + 1 << ',' << eps(t) << '\n';
  }
}

}  // namespace chaos
