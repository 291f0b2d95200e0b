// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "josrc/datagen.hpp"
#include "josrc/trainer.hpp"

namespace josrc {

struct DatasetSpec {
  BlobSpec blobs;
  std::size_t test_per_class = 50;
  std::optional<std::filesystem::path> train_csv;
  std::optional<std::filesystem::path> test_csv;
};

struct ExperimentSpec {
  std::string run_name = "josrc";
  DatasetSpec dataset;
  NoiseSpec noise;
  TrainConfig train;
  std::vector<Arm> arms = {Arm::JoSrc};
  std::vector<std::uint64_t> seeds = {1};
  std::filesystem::path out_dir = "runs";
  int checkpoint_every = 0;  ///< 0 writes only the final checkpoint
  bool selection_dump = false;
};

/// Parses `key = value` lines (`#` starts a comment). Absent keys keep their
/// defaults. Throws ParseError for malformed lines and ValidationError for
/// unknown keys or out-of-range values.
ExperimentSpec parse_config_text(std::string_view text);
ExperimentSpec parse_config(const std::filesystem::path& path);

struct PreparedData {
  NoisyDataset train;
  LabeledSet test;
};

/// Training and held-out data for one repeat. Generated data depends on the
/// blob seed and the repeat seed; CSV inputs are read as-is.
PreparedData prepare_data(const ExperimentSpec& spec, std::uint64_t seed);

struct RunOutcome {
  Arm arm = Arm::JoSrc;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<EpochRecord> records;
};

struct ExperimentOutcome {
  std::vector<RunOutcome> runs;
  int exit_status = 0;
};

/// Runs every (arm, seed) pair, writing under out_dir:
///   <arm>/seed_<n>/metrics.csv, model.bin, model.bin.teacher,
///   optional selection.csv and per-epoch checkpoints, and summary.csv.
/// Exit status is 0 iff every run completed.
ExperimentOutcome run_experiment(const ExperimentSpec& spec);

inline constexpr std::string_view kMetricsHeader =
    "epoch,lr,tau_clean,n_clean,n_id,n_ood,prec_clean,prec_id,prec_ood,loss_c,loss_o,"
    "loss_total,test_acc";
inline constexpr std::string_view kSelectionHeader =
    "epoch,idx,p_clean,p_ood,assigned,provenance";
inline constexpr std::string_view kSummaryHeader =
    "arm,status,n_seeds,final10_mean_acc,final10_std_acc";

std::string metrics_csv(std::span<const EpochRecord> records);

/// Parallelism cap from JOSRC_THREADS (default: hardware concurrency, min 1).
unsigned thread_budget();

}  // namespace josrc
