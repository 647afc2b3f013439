#pragma once

// Command-line front end. `run_cli` is the whole program minus main(), so
// tests can drive it with captured streams.
//
// Exit codes: 0 success, 1 runtime or data error, 2 usage error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pufsec/attacks.hpp"
#include "pufsec/crp_io.hpp"
#include "pufsec/discriminator.hpp"
#include "pufsec/experiment.hpp"
#include "pufsec/model_io.hpp"
#include "pufsec/puf.hpp"

namespace pufsec::cli {

struct TargetArgs {
  std::string arch = "arbiter";
  int stages = 64;
  int k = 1;
  double noise = 0.0;

  void add_to(CLI::App& app) {
    app.add_option("--arch", arch, "arbiter | xor | lw")->capture_default_str();
    app.add_option("--stages", stages, "challenge length n")->check(CLI::Range(2, 4096))->capture_default_str();
    app.add_option("--k", k, "parallel chains (xor, lw)")->check(CLI::Range(1, kMaxChains))->capture_default_str();
    app.add_option("--noise", noise, "delay noise sigma")->check(CLI::NonNegativeNumber)->capture_default_str();
  }
  ArchSpec spec() const {
    ArchSpec s{parse_arch_name(arch), stages, k};
    validate(s);
    return s;
  }
};

/// Instance weights and the CRP stream of `gen` both come from --seed.
inline std::uint64_t instance_seed(std::uint64_t seed) { return derive_seed(seed, "instance"); }

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  return f;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for reading");
  return f;
}

inline std::string read_file(const std::string& path) {
  auto f = open_in(path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

inline FeatureMode features_for(const std::string& flag, LearnerKind kind) {
  if (flag == "default") return default_feature_mode(kind);
  return parse_feature_mode(flag);
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"PUF modeling-attack and clone-discriminator toolkit", "pufsec"};
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  int threads = 1;
  std::string config_path;
  auto* seed_opt = app.add_option("--seed", seed, "master seed")->capture_default_str();
  app.add_option("--threads", threads, "worker threads")->check(CLI::Range(1, 1024))->capture_default_str();
  app.add_option("--config", config_path, "experiment config file (grid, brute)");
  app.fallthrough();

  // gen
  auto* gen = app.add_subcommand("gen", "simulate a PUF and write a pufcrp v1 file");
  TargetArgs gen_target;
  std::size_t gen_count = 1000;
  std::string gen_out;
  gen_target.add_to(*gen);
  gen->add_option("--count", gen_count, "number of CRPs")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--out", gen_out, "output path")->required();

  // attack
  auto* attack = app.add_subcommand("attack", "clone a PUF from CRPs and report accuracy");
  TargetArgs atk_target;
  std::string atk_crps, atk_kind = "lr", atk_features = "default", atk_model_out;
  std::size_t atk_train = 5000, atk_test = 2000;
  atk_target.add_to(*attack);
  attack->add_option("--crps", atk_crps, "attack a recorded pufcrp file instead of a simulated target");
  attack->add_option("--kind", atk_kind, "lr | rf | nn")->capture_default_str();
  attack->add_option("--features", atk_features, "default | parity | raw")->capture_default_str();
  attack->add_option("--train", atk_train, "training CRPs")->check(CLI::PositiveNumber)->capture_default_str();
  attack->add_option("--test", atk_test, "test CRPs (simulated target)")->check(CLI::PositiveNumber)->capture_default_str();
  attack->add_option("--model-out", atk_model_out, "write the trained model (pufmodel v1)");

  // disc
  auto* disc = app.add_subcommand("disc", "train a clone, then a discriminator against it");
  TargetArgs disc_target;
  std::string disc_cm = "lr", disc_dm = "lr", disc_features = "default", disc_out, disc_model_out;
  std::string disc_probes = "low-margin", disc_response = "sampled";
  std::size_t disc_train = 5000, disc_test = 2000, disc_width = 64, disc_batches = 500;
  disc_target.add_to(*disc);
  disc->add_option("--cm", disc_cm, "attack (clone) model kind")->capture_default_str();
  disc->add_option("--dm", disc_dm, "discriminator model kind")->capture_default_str();
  disc->add_option("--features", disc_features, "clone features: default | parity | raw")->capture_default_str();
  disc->add_option("--train", disc_train, "clone training CRPs")->check(CLI::PositiveNumber)->capture_default_str();
  disc->add_option("--test", disc_test, "clone test CRPs")->check(CLI::PositiveNumber)->capture_default_str();
  disc->add_option("--width", disc_width, "probe batch width")->check(CLI::PositiveNumber)->capture_default_str();
  disc->add_option("--batches", disc_batches, "observation rounds")->check(CLI::Range(2, 100000000))->capture_default_str();
  disc->add_option("--probes", disc_probes, "uniform | low-margin")->capture_default_str();
  disc->add_option("--clone-response", disc_response, "sampled | predicted")->capture_default_str();
  disc->add_option("--out", disc_out, "write the dataset (pufdisc v1)");
  disc->add_option("--model-out", disc_model_out, "write the discriminator learner (pufmodel v1)");

  // grid
  auto* grid = app.add_subcommand("grid", "3x3 attack/discriminator grid per architecture");
  std::string grid_dir = ".";
  grid->add_option("--out-dir", grid_dir, "directory for grid_<arch>.csv, summary.csv, timing.csv")->capture_default_str();

  // brute
  auto* brute = app.add_subcommand("brute", "two-stage brute-force baseline (classify, then clone)");
  std::string brute_out;
  bool brute_shuffle = false, brute_no_direct = false;
  brute->add_option("--out", brute_out, "CSV path (default: standard output)");
  brute->add_flag("--shuffle-labels", brute_shuffle, "permute class labels before training (ablation)");
  brute->add_flag("--no-direct", brute_no_direct, "skip the architecture-independent comparison attack");

  // report
  auto* report = app.add_subcommand("report", "rebuild the per-architecture summary from grid CSVs");
  std::vector<std::string> report_files;
  report->add_option("files", report_files, "grid_<arch>.csv files")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << '\n';
    return 2;
  }

  auto load_config = [&] {
    if (config_path.empty()) throw InvalidArgument("--config is required for this command");
    auto f = open_in(config_path);
    ExperimentConfig cfg = parse_config(f);
    if (seed_opt->count() > 0) cfg.seed = seed;
    return cfg;
  };

  try {
    if (*gen) {
      const ArchSpec spec = gen_target.spec();
      const PufInstance puf = create_instance(spec, gen_target.noise, instance_seed(seed));
      const std::string body = crps_to_string(generate_crps(puf, gen_count, seed));
      auto f = open_out(gen_out);
      f << body;
      if (!f.flush()) throw Error("write to '" + gen_out + "' failed");
      out << "checksum " << text::checksum_hex(body) << '\n';
    } else if (*attack) {
      const LearnerKind kind = parse_learner_kind(atk_kind);
      CloneOptions opt;
      opt.features = features_for(atk_features, kind);
      CloneResult r = [&] {
        if (!atk_crps.empty()) {
          auto f = open_in(atk_crps);
          const CrpDataset crps = read_crps(f);
          return clone_from_crps(crps, kind, std::min(atk_train, crps.size() - 1), seed, opt);
        }
        const PufInstance puf = create_instance(atk_target.spec(), atk_target.noise, instance_seed(seed));
        return clone(puf, kind, atk_train, atk_test, seed, opt);
      }();
      if (!atk_model_out.empty()) {
        auto f = open_out(atk_model_out);
        write_model(f, r.clone.learner);
      }
      out << "result kind=" << learner_name(kind) << " acc=" << text::format_fixed(r.test_accuracy, 4)
          << " err=" << text::format_fixed(r.cloning_error, 4) << " time_s=" << text::format_fixed(r.wall_time_seconds, 3)
          << '\n';
    } else if (*disc) {
      const LearnerKind cm = parse_learner_kind(disc_cm), dm = parse_learner_kind(disc_dm);
      const PufInstance puf = create_instance(disc_target.spec(), disc_target.noise, instance_seed(seed));
      CloneOptions opt;
      opt.features = features_for(disc_features, cm);
      const CloneResult cr = clone(puf, cm, disc_train, disc_test, derive_seed(seed, "disc-attack"), opt);
      if (disc_response != "sampled" && disc_response != "predicted")
        throw InvalidArgument("--clone-response must be 'sampled' or 'predicted'");
      const auto mode = disc_response == "sampled" ? CloneResponse::Sampled : CloneResponse::Predicted;
      const auto ds = build_discriminator_dataset(puf, cr.clone, disc_width, disc_batches,
                                                  derive_seed(seed, "disc-data"), cr.training_challenges, mode,
                                                  parse_probe_selection(disc_probes));
      const auto fit = train_discriminator(ds, dm, Hyperparameters{}, derive_seed(seed, "disc-model"));
      if (!disc_out.empty()) {
        auto f = open_out(disc_out);
        write_discriminator_dataset(f, ds);
      }
      if (!disc_model_out.empty()) {
        auto f = open_out(disc_model_out);
        write_model(f, fit.model.learner);
      }
      out << "result cm=" << learner_name(cm) << " dm=" << learner_name(dm)
          << " clone_acc=" << text::format_fixed(cr.test_accuracy, 4)
          << " disc_acc=" << text::format_fixed(fit.heldout_accuracy, 4)
          << " score_authentic=" << text::format_fixed(fit.mean_score_authentic, 4)
          << " score_cloned=" << text::format_fixed(fit.mean_score_cloned, 4) << '\n';
    } else if (*grid) {
      const ExperimentConfig cfg = load_config();
      const GridRun run = run_grid(cfg, threads);
      std::filesystem::create_directories(grid_dir);
      const std::filesystem::path dir(grid_dir);
      for (const auto& family : cfg.families) {
        std::vector<GridRow> rows;
        for (const auto& r : run.rows)
          if (r.family == family) rows.push_back(r);
        auto f = open_out((dir / ("grid_" + family + ".csv")).string());
        write_grid_csv(f, rows);
      }
      {
        auto f = open_out((dir / "summary.csv").string());
        write_summary_csv(f, summarize(run.rows));
      }
      {
        auto f = open_out((dir / "timing.csv").string());
        write_timing_csv(f, run.rows);
      }
      write_summary_csv(out, summarize(run.rows));
    } else if (*brute) {
      const ExperimentConfig cfg = load_config();
      BruteOptions opt;
      opt.shuffle_labels = brute_shuffle;
      opt.direct = !brute_no_direct;
      const BruteRun run = run_brute(cfg, threads, opt);
      if (brute_out.empty()) {
        write_brute_csv(out, run);
      } else {
        auto f = open_out(brute_out);
        write_brute_csv(f, run);
      }
    } else if (*report) {
      std::vector<GridRow> rows;
      for (const auto& path : report_files) {
        auto f = open_in(path);
        try {
          auto part = read_grid_csv(f);
          rows.insert(rows.end(), part.begin(), part.end());
        } catch (const ParseError& e) {
          throw Error(path + ": " + e.what());
        }
      }
      write_summary_csv(out, summarize(rows));
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace pufsec::cli
