#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "beamsim/config.hpp"
#include "beamsim/pipeline.hpp"

namespace {

namespace hs = beamsim::harness;

struct CommonOpts {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int64_t> samples;
  std::optional<std::string> profile;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "Config file (INI sections)");
  cmd->add_option("--seed", opts.seed, "Override the run seed");
  cmd->add_option("--out", opts.out_dir, "Output directory");
  cmd->add_option("--samples", opts.samples, "Override the sample count");
  cmd->add_option("--profile", opts.profile,
                  "Profile: raymobtime-like or neu-like");
}

hs::RunConfig resolve_config(const CommonOpts& opts) {
  hs::RunConfig cfg;
  if (!opts.config_path.empty()) {
    cfg = hs::load_config(opts.config_path);
  } else if (opts.profile.has_value()) {
    cfg = hs::default_config(hs::profile_from_string(*opts.profile));
  } else {
    cfg = hs::default_config(hs::Profile::neu_like);
  }
  if (opts.profile.has_value() && !opts.config_path.empty() &&
      hs::profile_from_string(*opts.profile) != cfg.profile) {
    throw beamsim::ConfigError(
        "--profile conflicts with the profile in the config file");
  }
  if (opts.seed.has_value()) {
    cfg.seed = *opts.seed;
    cfg.scene_cfg.rng_seed = *opts.seed;
    cfg.train.rng_seed = *opts.seed;
  }
  if (opts.out_dir.has_value()) cfg.out_dir = *opts.out_dir;
  if (opts.samples.has_value()) cfg.samples = *opts.samples;
  cfg.validate();
  return cfg;
}

std::vector<beamsim::neural::Modality> parse_modalities(
    const std::string& list) {
  std::vector<beamsim::neural::Modality> mods;
  std::string item;
  std::stringstream ss(list);
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) mods.push_back(beamsim::neural::modality_from_string(item));
  }
  return mods;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal mmWave beam selection sandbox"};
  app.require_subcommand(1);

  CommonOpts opts;

  auto* generate = app.add_subcommand(
      "generate", "Generate a synthetic dataset (samples.jsonl + manifest)");
  add_common(generate, opts);

  auto* train = app.add_subcommand("train", "Train a model on a dataset");
  add_common(train, opts);
  std::string train_data;
  std::string train_modalities;
  std::string train_checkpoint = "checkpoint.json";
  std::string train_log = "train_log.csv";
  std::string train_resume;
  train->add_option("--data", train_data, "Dataset directory")->required();
  train->add_option("--modalities", train_modalities,
                    "Comma list, e.g. gps,lidar (default: all in profile)");
  train->add_option("--checkpoint", train_checkpoint, "Checkpoint path");
  train->add_option("--log", train_log, "Training log CSV path");
  train->add_option("--resume", train_resume,
                    "Continue from a previous checkpoint");

  auto* evaluate = app.add_subcommand("evaluate", "Metric report per K");
  add_common(evaluate, opts);
  std::string eval_data, eval_checkpoint, eval_out = "evaluate.csv", eval_dump;
  std::string eval_k_list;
  evaluate->add_option("--data", eval_data, "Dataset directory")->required();
  evaluate->add_option("--checkpoint", eval_checkpoint, "Checkpoint path")
      ->required();
  evaluate->add_option("--k-list", eval_k_list, "Comma list of K values");
  evaluate->add_option("--report", eval_out, "Output CSV path");
  evaluate->add_option("--dump", eval_dump, "Per-sample JSONL dump path");

  auto* select = app.add_subcommand(
      "select-k", "Empirical-Bayes subset-size selection per test sample");
  add_common(select, opts);
  std::string sel_data, sel_checkpoint, sel_out = "select_k.csv";
  std::string sel_alpha_list, sel_tables, sel_samples;
  double sel_t_total = 0.0;
  select->add_option("--data", sel_data, "Dataset directory")->required();
  select->add_option("--checkpoint", sel_checkpoint, "Checkpoint path")
      ->required();
  select->add_option("--alpha-list", sel_alpha_list,
                     "Comma list of alpha values");
  select->add_option("--t-total", sel_t_total,
                     "Contact time budget in ms (default: config)");
  select->add_option("--report", sel_out, "Output CSV path");
  select->add_option("--tables", sel_tables, "Write empirical tables JSON");
  select->add_option("--per-sample", sel_samples, "Per-sample CSV dump");

  auto* latency = app.add_subcommand(
      "latency", "Latency table: sweep, end-to-end and exhaustive baseline");
  add_common(latency, opts);
  std::string lat_out = "latency.csv";
  latency->add_option("--report", lat_out, "Output CSV path");

  auto* report = app.add_subcommand(
      "report", "Full pipeline: generate, train, evaluate, select-k, latency");
  add_common(report, opts);

  CLI11_PARSE(app, argc, argv);

  try {
    const hs::RunConfig cfg = resolve_config(opts);

    if (generate->parsed()) {
      const auto dir = cfg.out_dir / "dataset";
      hs::cmd_generate(cfg, dir);
      std::filesystem::create_directories(cfg.out_dir);
      std::ofstream echo(cfg.out_dir / "config_echo.json");
      echo << hs::config_echo(cfg).dump(2) << "\n";
      std::cout << "wrote " << (dir / "samples.jsonl").string() << "\n";
    } else if (train->parsed()) {
      const auto result = hs::cmd_train(
          cfg, train_data, parse_modalities(train_modalities),
          train_checkpoint, train_log,
          train_resume.empty()
              ? std::nullopt
              : std::optional<std::filesystem::path>(train_resume));
      std::cout << "wrote " << train_checkpoint << " (best epoch "
                << result.result.best_epoch << ", holdout top-1 "
                << result.result.best_val_top1 << ")\n";
    } else if (evaluate->parsed()) {
      std::vector<int64_t> k_list = cfg.k_list;
      if (!eval_k_list.empty()) {
        k_list.clear();
        std::stringstream ss(eval_k_list);
        std::string item;
        while (std::getline(ss, item, ',')) k_list.push_back(std::stoll(item));
      }
      hs::cmd_evaluate(cfg, eval_data, eval_checkpoint, k_list, eval_out,
                       eval_dump.empty()
                           ? std::nullopt
                           : std::optional<std::filesystem::path>(eval_dump));
      std::cout << "wrote " << eval_out << "\n";
    } else if (select->parsed()) {
      std::vector<double> alphas = cfg.alpha_list;
      if (!sel_alpha_list.empty()) {
        alphas.clear();
        std::stringstream ss(sel_alpha_list);
        std::string item;
        while (std::getline(ss, item, ',')) alphas.push_back(std::stod(item));
      }
      const double t_total =
          sel_t_total > 0.0 ? sel_t_total : cfg.kselect.t_total_ms;
      hs::cmd_select_k(
          cfg, sel_data, sel_checkpoint, alphas, t_total, sel_out,
          sel_tables.empty()
              ? std::nullopt
              : std::optional<std::filesystem::path>(sel_tables),
          sel_samples.empty()
              ? std::nullopt
              : std::optional<std::filesystem::path>(sel_samples));
      std::cout << "wrote " << sel_out << "\n";
    } else if (latency->parsed()) {
      hs::cmd_latency(cfg, lat_out);
      std::cout << "wrote " << lat_out << "\n";
    } else if (report->parsed()) {
      hs::cmd_report(cfg);
      std::cout << "wrote reports under " << cfg.out_dir.string() << "\n";
    }
  } catch (const beamsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const beamsim::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
