#include "chaos/dataset.hpp"
#include "chaos/evaluation.hpp"
#include "chaos/model.hpp"
#include "chaos/parallel.hpp"
#include "chaos/presets.hpp"
#include "chaos/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#ifndef CHAOS_GIT_DESCRIBE
#define CHAOS_GIT_DESCRIBE "unknown"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kExitNumeric = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_manifest(const fs::path& dir, const std::string& command, std::uint64_t seed, json config,
                    const std::vector<std::string>& argv) {
  json m;
  m["command"] = command;
  m["argv"] = argv;
  m["seed"] = seed;
  m["config"] = std::move(config);
  m["git_describe"] = CHAOS_GIT_DESCRIBE;
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw std::ios_base::failure("cannot write manifest in '" + dir.string() + "'");
  out << m.dump(2) << '\n';
}

fs::path require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw std::ios_base::failure("missing file '" + p.string() + "'");
  return p;
}

chaos::TrainConfig train_config(int epochs, double lr, const std::string& optimizer, int batch, int patience,
                                int per_mu, int threads) {
  chaos::TrainConfig c;
  c.epochs = epochs;
  c.learning_rate = lr;
  if (optimizer == "sgd") c.optimizer = chaos::OptimizerKind::Sgd;
  c.batch_size = batch;
  c.patience = patience;
  c.samples_per_mu = per_mu;
  c.threads = threads;
  return c;
}

json config_json(const chaos::TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"optimizer", c.optimizer == chaos::OptimizerKind::Adam ? "adam" : "sgd"},
          {"batch_size", c.batch_size},
          {"patience", c.patience},
          {"samples_per_mu", c.samples_per_mu}};
}

chaos::Checkpoint load_model(const std::string& spec) {
  if (spec == "oracle-1d") return chaos::Checkpoint::oracle(chaos::System::Logistic1D);
  if (spec == "oracle-2d") return chaos::Checkpoint::oracle(chaos::System::Logistic2D);
  return chaos::load_checkpoint(require_file(spec));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Logistic-map predictors: data generation, training and evaluation"};
  app.require_subcommand(1);
  std::vector<std::string> args(argv, argv + argc);

  int threads = 0;
  app.add_option("--threads", threads, "worker cap (default: CHAOS_REPLICA_THREADS or 1)");

  std::string system_name = "1d", out_dir, data_dir, preset_name, ckpt_spec, what = "all", axis, values_text;
  std::uint64_t seed = 0;
  int n_train = 3000, n_test = 500;
  int epochs = 400, batch = 500, patience = 50, per_mu = 2000, n_seeds = 5, n_inits = 500, rollout_steps = 60;
  double lr = 1e-3;
  std::string optimizer = "adam";
  bool quiet = false;

  auto* gen = app.add_subcommand("gen-data", "write train.jsonl and test.jsonl");
  gen->add_option("--system", system_name)->check(CLI::IsMember({"1d", "2d"}));
  gen->add_option("--seed", seed);
  gen->add_option("--out", out_dir)->required();
  gen->add_option("--n-train", n_train, "candidates per mu");
  gen->add_option("--n-test", n_test, "test samples per mu");

  auto add_training = [&](CLI::App* cmd) {
    cmd->add_option("--data", data_dir, "directory with train.jsonl and test.jsonl")->required();
    cmd->add_option("--epochs", epochs);
    cmd->add_option("--lr", lr);
    cmd->add_option("--optimizer", optimizer)->check(CLI::IsMember({"adam", "sgd"}));
    cmd->add_option("--batch-size", batch);
    cmd->add_option("--patience", patience);
    cmd->add_option("--samples-per-mu", per_mu);
    cmd->add_flag("--quiet", quiet);
  };

  auto* train = app.add_subcommand("train", "train a preset");
  train->add_option("--preset", preset_name)->required();
  train->add_option("--seed", seed);
  train->add_option("--out", out_dir)->required();
  add_training(train);

  auto* eval = app.add_subcommand("evaluate", "score a checkpoint against the true map");
  eval->add_option("--ckpt", ckpt_spec, "checkpoint file, or oracle-1d / oracle-2d")->required();
  eval->add_option("--what", what)->check(CLI::IsMember({"bifurcation", "lyapunov", "rollout", "all"}));
  eval->add_option("--out", out_dir)->required();
  eval->add_option("--data", data_dir, "directory with test.jsonl, adds the test RMSE");
  eval->add_option("--seed", seed);
  eval->add_option("--n-inits", n_inits, "initial states per mu for images and rollouts");
  eval->add_option("--rollout-steps", rollout_steps);

  auto* sw = app.add_subcommand("sweep", "train over a hyper-parameter axis");
  sw->add_option("--axis", axis)->required()->check(CLI::IsMember({"dh", "nl"}));
  sw->add_option("--values", values_text, "comma separated, e.g. 1,2,4,8")->required();
  sw->add_option("--seeds", n_seeds);
  sw->add_option("--system", system_name)->check(CLI::IsMember({"1d", "2d"}));
  sw->add_option("--out", out_dir)->required();
  add_training(sw);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  threads = chaos::resolve_threads(threads);
  try {
    if (!out_dir.empty()) fs::create_directories(out_dir);
    const fs::path out(out_dir);

    if (*gen) {
      const auto system = chaos::system_from_string(system_name);
      const auto grid = chaos::MuGrid::preset(system);
      auto [tr, te] = chaos::generate(system, grid, n_train, n_test, chaos::default_window(system), seed);
      chaos::save(tr, out / "train.jsonl");
      chaos::save(te, out / "test.jsonl");
      write_manifest(out, "gen-data", seed, {{"system", system_name}, {"n_train", n_train}, {"n_test", n_test}}, args);
      std::cout << "wrote " << tr.samples.size() << " train and " << te.samples.size() << " test samples to " << out
                << '\n';
    } else if (*train) {
      const chaos::ExperimentPreset* preset = nullptr;
      try {
        preset = &chaos::find_preset(preset_name);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      const auto pool = chaos::load(require_file(fs::path(data_dir) / "train.jsonl"));
      const auto test = chaos::load(require_file(fs::path(data_dir) / "test.jsonl"));
      auto cfg = train_config(epochs, lr, optimizer, batch, patience, per_mu, threads);
      cfg.seed = seed;
      if (!quiet) cfg.progress = &std::cerr;
      const auto result = chaos::train(chaos::initialize(*preset, seed), pool, test, cfg);
      chaos::save_checkpoint(result.checkpoint, out / "checkpoint.json");
      chaos::write_log_csv(result.log, out / "train_log.csv");
      json c = config_json(cfg);
      c["preset"] = preset_name;
      c["data"] = data_dir;
      write_manifest(out, "train", seed, c, args);
      std::cout << "best epoch " << result.log.best_epoch << ", test L " << result.log.best_test_rmse << '\n';
    } else if (*eval) {
      const auto ckpt = load_model(ckpt_spec);
      std::optional<chaos::Dataset> test;
      if (!data_dir.empty()) test = chaos::load(require_file(fs::path(data_dir) / "test.jsonl"));
      chaos::EvalOptions opt;
      opt.seed = seed;
      opt.threads = threads;
      opt.lyapunov = what == "lyapunov" || what == "all";
      opt.bifurcation = what == "bifurcation" || what == "all";
      opt.rollout = what == "rollout" || what == "all";
      opt.rollout_inits = n_inits;
      opt.rollout_steps = rollout_steps;
      opt.bifurcation_options.n_inits = n_inits;
      const auto grid = chaos::MuGrid::preset(ckpt.system).values;
      const auto report = chaos::evaluate(ckpt, grid, opt, test ? &*test : nullptr);
      chaos::write_report_json(report, out / "report.json");
      if (report.lyapunov) chaos::write_lyapunov_csv(report, out / "lyapunov.csv");
      if (opt.rollout) chaos::write_rollout_csv(report, out / "rollout.csv");
      if (report.model_image) {
        chaos::write_pgm(*report.model_image, out / "bifurcation_model.pgm");
        chaos::write_pgm(*report.true_image, out / "bifurcation_true.pgm");
      }
      write_manifest(out, "evaluate", seed, {{"ckpt", ckpt_spec}, {"what", what}, {"n_inits", n_inits}}, args);
      if (report.test_rmse) std::cout << "L " << *report.test_rmse << '\n';
      if (report.lyapunov) {
        std::cout << "L_LE " << report.l_le << ", sign agreement " << report.sign_accuracy * 100 << "%\n";
      }
      if (report.psnr) std::cout << "PSNR " << *report.psnr << " dB\n";
    } else if (*sw) {
      std::vector<double> values;
      std::stringstream ss(values_text);
      for (std::string item; std::getline(ss, item, ',');) {
        try {
          values.push_back(std::stod(item));
        } catch (const std::exception&) {
          throw UsageError("bad --values entry '" + item + "'");
        }
      }
      if (n_seeds < 1) throw UsageError("--seeds must be >= 1");
      if (n_seeds < 2) std::cerr << "warning: fewer than two seeds, std columns are undefined\n";
      const auto system = chaos::system_from_string(system_name);
      const auto pool = chaos::load(require_file(fs::path(data_dir) / "train.jsonl"));
      const auto test = chaos::load(require_file(fs::path(data_dir) / "test.jsonl"));
      const auto grid = chaos::MuGrid::preset(system).values;
      const std::string base = (axis == "dh" ? "lstm-" : "adqc-") + chaos::to_string(system) + "-mu";

      chaos::SweepSpec spec;
      spec.values = values;
      for (int s = 0; s < n_seeds; ++s) spec.seeds.push_back(seed + static_cast<std::uint64_t>(s));
      spec.make_model = [&](double value, std::uint64_t s) {
        chaos::ExperimentPreset p = chaos::find_preset(base);
        if (axis == "dh") {
          p.hidden_dim = static_cast<int>(std::lround(value));
        } else {
          p.n_layers = static_cast<int>(std::lround(value));
        }
        return chaos::initialize(p, s);
      };
      spec.scorer = [&](const chaos::Checkpoint& c) {
        const auto le = chaos::model_lyapunov(c, grid);
        return chaos::l_le(le.model, le.truth);
      };
      spec.config = train_config(epochs, lr, optimizer, batch, patience, per_mu, 1);
      spec.threads = threads;
      const auto points = chaos::sweep(spec, pool, test);
      chaos::write_sweep_csv(points, axis, out / "sweep.csv");
      json c = config_json(spec.config);
      c["axis"] = axis;
      c["values"] = values;
      c["seeds"] = n_seeds;
      c["preset"] = base;
      write_manifest(out, "sweep", seed, c, args);
      std::cout << "wrote " << points.size() << " sweep points to " << out / "sweep.csv" << '\n';
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const chaos::DatasetError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const chaos::CheckpointError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  }
  return 0;
}
