// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "josrc/datagen.hpp"
#include "josrc/nn.hpp"
#include "josrc/relabel.hpp"
#include "josrc/selection.hpp"

namespace josrc {

/// Which training procedure to run. The four Jo-SRC variants share the
/// selection pipeline and differ only in which subsets feed the loss after
/// warm-up: C (clean), CI (clean + ID), CIO (all), Full (all + consistency).
enum class Arm { Standard, JoSrc, AblationC, AblationCI, AblationCIO, SmallLoss };

enum class AblationMode { C, CI, CIO, Full };

std::string_view to_string(Arm arm);
Arm parse_arm(std::string_view text);
Arm arm_for(AblationMode mode);

struct TrainConfig {
  int t_max = 100;
  int t_w = 10;
  std::size_t batch_size = 64;
  double base_lr = 1e-3;
  int decay_start_epoch = 40;
  double omega = 0.99;
  double epsilon = 0.1;
  double s = 10.0;
  double alpha = 0.7;
  double tau_c = 0.3;
  double tau_m = 0.95;
  double tau_ood = 0.5;
  double sigma_aug = 0.1;
  double rho_aug = 0.1;
  /// Smoothing of the given label inside the clean criterion; follows epsilon when unset.
  std::optional<double> delta_js;
  std::uint64_t seed = 1;
  std::vector<std::size_t> hidden = {64, 64};
  /// Score Criterion 1 on the mean of both views instead of the first view.
  bool mean_view_clean = false;
  /// Final drop rate of the small-loss baseline, reached linearly over warm-up.
  double drop_rate = 0.6;

  /// Throws ValidationError naming the first out-of-range field.
  void validate() const;
  ThresholdSchedule threshold_schedule() const;
  double js_smoothing() const { return delta_js.value_or(epsilon); }
};

/// Fraction of selected samples whose provenance matches the subset;
/// nullopt when nothing was selected into that subset.
struct SubsetPrecision {
  std::optional<double> clean;
  std::optional<double> id;
  std::optional<double> ood;
};

/// Dataset indices assigned to each subset over some span of training.
struct SelectionHistory {
  std::vector<std::size_t> clean;
  std::vector<std::size_t> id;
  std::vector<std::size_t> ood;
};

SubsetPrecision selection_precision(const SelectionHistory& history,
                                    std::span<const Provenance> provenance);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double tau_clean = 0.0;
  std::size_t n_clean = 0;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
  SubsetPrecision precision;
  double loss_c = 0.0;
  double loss_o = 0.0;
  double loss_total = 0.0;
  double test_acc = 0.0;
  std::size_t skipped_batches = 0;
};

enum class Assignment { Clean, Id, Ood };
std::string_view to_string(Assignment a);

struct SelectionEntry {
  std::size_t idx = 0;
  double p_clean = 0.0;
  double p_ood = 0.0;
  Assignment assigned = Assignment::Clean;
  Provenance provenance = Provenance::Clean;
};

/// Optional per-epoch callbacks (checkpointing, diagnostics).
struct TrainObserver {
  std::function<void(const EpochRecord&, const MlpModel&, const MeanTeacher&)> on_epoch_end;
  std::function<void(int epoch, std::span<const SelectionEntry>)> on_selection;
};

struct TrainResult {
  MlpModel model;
  MeanTeacher teacher;
  std::vector<EpochRecord> records;
  std::uint64_t iterations = 0;
  std::uint64_t teacher_updates = 0;
};

/// Student predictions for one batch and the partition derived from them.
struct BatchScores {
  std::vector<ProbDist> p;
  std::vector<ProbDist> p_prime;
  std::vector<CleanScore> clean;
  std::vector<OodScore> ood;
  BatchPartition partition;
};

/// Forward both views and apply Criteria 1 and 2 against labels smoothed
/// with config.js_smoothing().
BatchScores score_batch(const MlpModel& student, std::span<const ViewPair> views,
                        std::span<const int> given_labels, std::size_t class_count,
                        double tau_clean, const TrainConfig& config);

/// Gradient for one iteration. Before warm-up ends (epoch < t_w) only clean
/// samples contribute and alpha is 0; afterwards the arm decides which subsets
/// enter and whether the consistency term is active. Returns nullopt when no
/// sample contributes.
std::optional<BackwardResult> batch_gradient(const MlpModel& student,
                                             std::span<const ViewPair> views,
                                             const BatchPartition& partition,
                                             std::span<const ProbDist> targets, Arm arm,
                                             int epoch, const TrainConfig& config);

/// Runs the full training loop for one arm. Deterministic for a fixed config.
TrainResult train(const NoisyDataset& dataset, const LabeledSet& test_set,
                  const TrainConfig& config, Arm arm = Arm::JoSrc,
                  const TrainObserver* observer = nullptr);

TrainResult ablation_run(const NoisyDataset& dataset, const LabeledSet& test_set,
                         const TrainConfig& config, AblationMode mode,
                         const TrainObserver* observer = nullptr);

/// Fraction of argmax-correct predictions. Throws InvalidInput on an empty set.
double evaluate(const MlpModel& model, const LabeledSet& test_set);

struct WindowStats {
  double mean = 0.0;
  double stddev = 0.0;  ///< population
};

/// Test accuracy over the last `window` epochs (or all, if fewer).
WindowStats final_window_accuracy(std::span<const EpochRecord> records, std::size_t window = 10);

}  // namespace josrc
