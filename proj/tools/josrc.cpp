// SPDX-License-Identifier: Apache-2.0
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "josrc/datagen.hpp"
#include "josrc/experiment.hpp"
#include "josrc/nn.hpp"
#include "josrc/trainer.hpp"

namespace {

int run_command(const std::string& config_path, std::optional<std::uint64_t> seed,
                std::optional<std::string> out) {
  auto spec = josrc::parse_config(config_path);
  if (seed) spec.seeds = {*seed};
  if (out) spec.out_dir = *out;
  const auto outcome = josrc::run_experiment(spec);
  for (const auto& run : outcome.runs) {
    std::cout << josrc::to_string(run.arm) << " seed " << run.seed << ": ";
    if (run.ok) {
      const auto stats = josrc::final_window_accuracy(run.records);
      std::cout << "final-10 accuracy " << stats.mean << " +/- " << stats.stddev << '\n';
    } else {
      std::cout << "FAILED: " << run.error << '\n';
    }
  }
  std::cout << "summary: " << (spec.out_dir / "summary.csv").string() << '\n';
  return outcome.exit_status;
}

int gen_data_command(const std::string& config_path, std::optional<std::string> out) {
  auto spec = josrc::parse_config(config_path);
  if (out) spec.out_dir = *out;
  std::filesystem::create_directories(spec.out_dir);
  for (auto seed : spec.seeds) {
    const auto data = josrc::prepare_data(spec, seed);
    const auto suffix = "_seed" + std::to_string(seed) + ".csv";
    const auto train_path = spec.out_dir / ("train" + suffix);
    const auto test_path = spec.out_dir / ("test" + suffix);
    josrc::write_dataset_csv(data.train, train_path);
    josrc::write_dataset_csv(data.test, test_path);
    std::cout << train_path.string() << ": " << data.train.size() << " samples ("
              << data.train.count(josrc::Provenance::Clean) << " clean, "
              << data.train.count(josrc::Provenance::IdNoisy) << " id, "
              << data.train.count(josrc::Provenance::OodNoisy) << " ood)\n"
              << test_path.string() << ": " << data.test.size() << " samples\n";
  }
  return 0;
}

int eval_command(const std::string& checkpoint, const std::string& data_path) {
  const auto model = josrc::load_checkpoint(checkpoint);
  const auto test = josrc::read_labeled_csv(data_path, model.class_count());
  std::cout << "accuracy " << josrc::evaluate(model, test) << " on " << test.size()
            << " samples\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noise-robust training with global clean selection and consistency"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  auto* run = app.add_subcommand("run", "Train every configured arm and write CSV metrics");
  run->add_option("--config", config_path, "key = value config file")->required();
  run->add_option("--seed", seed, "Override the configured seeds with a single seed");
  run->add_option("--out", out, "Output directory");

  std::string gen_config;
  std::optional<std::string> gen_out;
  auto* gen = app.add_subcommand("gen-data", "Write the noisy training and test CSVs");
  gen->add_option("--config", gen_config, "key = value config file")->required();
  gen->add_option("--out", gen_out, "Output directory");

  std::string checkpoint;
  std::string data_path;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset CSV");
  eval->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  eval->add_option("--data", data_path, "Dataset CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_command(config_path, seed, out);
    if (*gen) return gen_data_command(gen_config, gen_out);
    if (*eval) return eval_command(checkpoint, data_path);
  } catch (const std::exception& e) {
    std::cerr << "josrc: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
