// SPDX-License-Identifier: Apache-2.0
#include "josrc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "josrc/error.hpp"

namespace josrc {

namespace {

void require(bool ok, const char* key, const char* message) {
  if (!ok) throw ValidationError(key, message);
}

bool in_closed(double v, double lo, double hi) { return v >= lo && v <= hi; }

bool is_joint_family(Arm arm) {
  return arm == Arm::JoSrc || arm == Arm::AblationC || arm == Arm::AblationCI ||
         arm == Arm::AblationCIO;
}

std::vector<int> gather(std::span<const int> labels, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(labels[i]);
  return out;
}

double mean_or_zero(double sum, std::size_t count) {
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

}  // namespace

std::string_view to_string(Arm arm) {
  switch (arm) {
    case Arm::Standard: return "standard";
    case Arm::JoSrc: return "josrc";
    case Arm::AblationC: return "ablation-C";
    case Arm::AblationCI: return "ablation-CI";
    case Arm::AblationCIO: return "ablation-CIO";
    case Arm::SmallLoss: return "smallloss-baseline";
  }
  return "josrc";
}

Arm parse_arm(std::string_view text) {
  for (auto arm : {Arm::Standard, Arm::JoSrc, Arm::AblationC, Arm::AblationCI,
                   Arm::AblationCIO, Arm::SmallLoss}) {
    if (to_string(arm) == text) return arm;
  }
  throw InvalidInput("unknown arm '" + std::string(text) + "'");
}

Arm arm_for(AblationMode mode) {
  switch (mode) {
    case AblationMode::C: return Arm::AblationC;
    case AblationMode::CI: return Arm::AblationCI;
    case AblationMode::CIO: return Arm::AblationCIO;
    case AblationMode::Full: return Arm::JoSrc;
  }
  return Arm::JoSrc;
}

std::string_view to_string(Assignment a) {
  switch (a) {
    case Assignment::Clean: return "clean";
    case Assignment::Id: return "id";
    case Assignment::Ood: return "ood";
  }
  return "clean";
}

void TrainConfig::validate() const {
  require(t_max >= 2, "t_max", "t_max must be at least 2");
  require(t_w > 0 && t_w < t_max, "t_w", "t_w out of (0,t_max)");
  require(batch_size > 0, "batch_size", "batch_size must be positive");
  require(base_lr > 0.0 && std::isfinite(base_lr), "base_lr", "base_lr must be positive");
  require(decay_start_epoch >= 0 && decay_start_epoch < t_max, "decay_start_epoch",
          "decay_start_epoch out of [0,t_max)");
  require(in_closed(omega, 0.0, 1.0), "omega", "omega out of [0,1]");
  require(epsilon >= 0.0 && epsilon < 1.0, "epsilon", "epsilon out of [0,1)");
  require(s > 0.0 && std::isfinite(s), "s", "s must be positive");
  require(in_closed(alpha, 0.0, 1.0), "alpha", "alpha out of [0,1]");
  require(tau_m > 0.0 && tau_m <= 1.0, "tau_m", "tau_m out of (0,1]");
  require(tau_c >= 0.0 && tau_c < tau_m, "tau_c", "tau_c out of [0,tau_m)");
  require(tau_ood > 0.0 && tau_ood < 1.0, "tau_ood", "tau_ood out of (0,1)");
  require(sigma_aug >= 0.0 && std::isfinite(sigma_aug), "sigma_aug", "sigma_aug must be >= 0");
  require(rho_aug >= 0.0 && rho_aug < 1.0, "rho_aug", "rho_aug out of [0,1)");
  require(js_smoothing() > 0.0 && js_smoothing() < 1.0, "delta_js",
          "delta_js out of (0,1); set it explicitly when epsilon is 0");
  require(drop_rate >= 0.0 && drop_rate < 1.0, "drop_rate", "drop_rate out of [0,1)");
  require(std::ranges::all_of(hidden, [](std::size_t h) { return h > 0; }), "hidden",
          "hidden layer widths must be positive");
}

ThresholdSchedule TrainConfig::threshold_schedule() const {
  return ThresholdSchedule{
      .tau_c = tau_c, .tau_m = tau_m, .warmup_epochs = t_w, .total_epochs = t_max};
}

SubsetPrecision selection_precision(const SelectionHistory& history,
                                    std::span<const Provenance> provenance) {
  auto precision = [&](std::span<const std::size_t> selected,
                       Provenance wanted) -> std::optional<double> {
    if (selected.empty()) return std::nullopt;
    std::size_t hits = 0;
    for (auto i : selected) {
      if (provenance[i] == wanted) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(selected.size());
  };
  return SubsetPrecision{.clean = precision(history.clean, Provenance::Clean),
                         .id = precision(history.id, Provenance::IdNoisy),
                         .ood = precision(history.ood, Provenance::OodNoisy)};
}

BatchScores score_batch(const MlpModel& student, std::span<const ViewPair> views,
                        std::span<const int> given_labels, std::size_t class_count,
                        double tau_clean, const TrainConfig& config) {
  BatchScores out;
  std::vector<ProbDist> clean_pred;
  std::vector<ProbDist> smoothed;
  for (std::size_t i = 0; i < views.size(); ++i) {
    out.p.push_back(forward(student, views[i].v));
    out.p_prime.push_back(forward(student, views[i].v_prime));
    smoothed.push_back(smooth_label(static_cast<std::size_t>(given_labels[i]), class_count,
                                    config.js_smoothing()));
    if (config.mean_view_clean) {
      std::vector<double> avg(class_count);
      for (std::size_t c = 0; c < class_count; ++c) {
        avg[c] = 0.5 * (out.p.back()[c] + out.p_prime.back()[c]);
      }
      clean_pred.emplace_back(std::move(avg));
    } else {
      clean_pred.push_back(out.p.back());
    }
    out.clean.push_back(clean_likelihood(clean_pred.back(), smoothed.back()));
    out.ood.push_back(ood_likelihood(out.p.back(), out.p_prime.back()));
  }
  if (!config.mean_view_clean) {
    out.partition = partition_batch(out.p, out.p_prime, smoothed, tau_clean, config.tau_ood);
    return out;
  }
  // Criterion 1 on the averaged prediction; Criterion 2 still compares the views.
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (out.clean[i].p_clean > tau_clean) {
      out.partition.clean.push_back(i);
    } else if (out.ood[i].p_ood > config.tau_ood) {
      out.partition.ood.push_back(i);
    } else {
      out.partition.id.push_back(i);
    }
  }
  return out;
}

std::optional<BackwardResult> batch_gradient(const MlpModel& student,
                                             std::span<const ViewPair> views,
                                             const BatchPartition& partition,
                                             std::span<const ProbDist> targets, Arm arm,
                                             int epoch, const TrainConfig& config) {
  if (partition.size() != views.size() || targets.size() != views.size()) {
    throw InvalidInput("batch_gradient: partition and targets must cover the batch");
  }
  const bool warm_up = epoch < config.t_w;
  bool use_id = false;
  bool use_ood = false;
  double alpha = 0.0;
  switch (arm) {
    case Arm::Standard:
      use_id = use_ood = true;
      break;
    case Arm::SmallLoss:
    case Arm::AblationC:
      break;
    case Arm::AblationCI:
      use_id = !warm_up;
      break;
    case Arm::AblationCIO:
      use_id = use_ood = !warm_up;
      break;
    case Arm::JoSrc:
      use_id = use_ood = !warm_up;
      alpha = warm_up ? 0.0 : config.alpha;
      break;
  }

  std::vector<std::pair<std::size_t, int>> members;  // batch position, consistency sign
  for (auto i : partition.clean) members.emplace_back(i, 1);
  if (use_id) {
    for (auto i : partition.id) members.emplace_back(i, 1);
  }
  if (use_ood) {
    for (auto i : partition.ood) members.emplace_back(i, -1);
  }
  if (members.empty()) return std::nullopt;
  std::ranges::sort(members);

  std::vector<ViewPair> sub_views;
  std::vector<ProbDist> sub_targets;
  std::vector<int> signs;
  sub_views.reserve(members.size());
  for (const auto& [i, sign] : members) {
    sub_views.push_back(views[i]);
    sub_targets.push_back(targets[i]);
    signs.push_back(sign);
  }
  return backward(student, sub_views, sub_targets, signs, alpha);
}

TrainResult train(const NoisyDataset& dataset, const LabeledSet& test_set,
                  const TrainConfig& config, Arm arm, const TrainObserver* observer) {
  config.validate();
  if (dataset.size() == 0) throw InvalidInput("train: empty dataset");
  if (dataset.class_count < 2) throw InvalidInput("train: need at least two classes");

  const std::size_t n = dataset.size();
  const std::size_t classes = dataset.class_count;
  std::vector<std::size_t> dims{dataset.features.cols()};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(classes);

  Rng master(config.seed);
  const auto init_seed = master();
  Rng rng(master());

  TrainResult result;
  result.model = MlpModel::initialized(dims, init_seed);
  result.teacher = MeanTeacher{.params = result.model, .decay = config.omega};
  auto& student = result.model;
  auto& teacher = result.teacher;
  auto optimizer = OptimizerState::for_model(student, config.base_lr);
  const auto schedule = config.threshold_schedule();
  const AugmentConfig aug{.sigma = config.sigma_aug, .rho = config.rho_aug};
  const bool want_selection = observer != nullptr && observer->on_selection;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= config.t_max; ++epoch) {
    EpochRecord record;
    record.epoch = epoch;
    record.lr = lr_schedule(epoch, config.t_max, config.decay_start_epoch, config.base_lr);
    record.tau_clean = dynamic_threshold(epoch, schedule);
    optimizer.learning_rate = record.lr;
    std::shuffle(order.begin(), order.end(), rng);

    SelectionHistory history;
    std::vector<SelectionEntry> selection;
    double sum_c = 0.0, sum_o = 0.0, sum_total = 0.0;
    std::size_t used = 0;

    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const std::size_t b = idx.size();

      std::vector<ViewPair> views;
      std::vector<std::span<const double>> originals;
      views.reserve(b);
      for (auto i : idx) {
        views.push_back(augment(dataset.features.row(i), rng, aug, i));
        originals.push_back(dataset.features.row(i));
      }
      const auto given = gather(dataset.given_labels, idx);

      try {
        BatchPartition partition;
        std::vector<ProbDist> targets;
        std::vector<CleanScore> clean_scores(b);
        std::vector<OodScore> ood_scores(b);
        if (is_joint_family(arm)) {
          auto scores = score_batch(student, views, given, classes, record.tau_clean, config);
          partition = std::move(scores.partition);
          clean_scores = std::move(scores.clean);
          ood_scores = std::move(scores.ood);
          targets = assign_targets(originals, given, partition, teacher, config.epsilon,
                                   config.s)
                        .targets;
        } else {
          for (int label : given) {
            targets.push_back(smooth_label(static_cast<std::size_t>(label), classes, 0.0));
          }
          if (arm == Arm::Standard) {
            partition.clean.resize(b);
            std::iota(partition.clean.begin(), partition.clean.end(), std::size_t{0});
          } else {
            std::vector<double> losses(b);
            for (std::size_t i = 0; i < b; ++i) {
              const std::vector<ProbDist> p{forward(student, views[i].v)};
              const std::vector<ProbDist> q{forward(student, views[i].v_prime)};
              losses[i] = classification_loss(p, q, std::span(&targets[i], 1));
            }
            const double ramp = std::min(1.0, static_cast<double>(epoch) / config.t_w);
            partition.clean = small_loss_select(losses, config.drop_rate * ramp);
            for (std::size_t i = 0; i < b; ++i) {
              if (!std::ranges::binary_search(partition.clean, i)) partition.ood.push_back(i);
            }
          }
        }

        if (auto grad = batch_gradient(student, views, partition, targets, arm, epoch, config)) {
          optimizer_step(student, optimizer, grad->grads);
          sum_c += grad->report.l_c;
          sum_o += grad->report.l_o;
          sum_total += grad->report.l_total;
          ++used;
        } else {
          ++record.skipped_batches;
        }

        auto note = [&](const std::vector<std::size_t>& members, std::vector<std::size_t>& into,
                        Assignment tag) {
          for (auto j : members) {
            into.push_back(idx[j]);
            if (want_selection) {
              selection.push_back(SelectionEntry{.idx = idx[j],
                                                 .p_clean = clean_scores[j].p_clean,
                                                 .p_ood = ood_scores[j].p_ood,
                                                 .assigned = tag,
                                                 .provenance = dataset.truth.provenance[idx[j]]});
            }
          }
        };
        note(partition.clean, history.clean, Assignment::Clean);
        note(partition.id, history.id, Assignment::Id);
        note(partition.ood, history.ood, Assignment::Ood);
      } catch (const NumericFailure& e) {
        throw TrainingAborted(e.what(), epoch, result.iterations + 1);
      }

      ema_update(teacher, student);
      ++result.teacher_updates;
      ++result.iterations;
    }

    record.n_clean = history.clean.size();
    record.n_id = history.id.size();
    record.n_ood = history.ood.size();
    record.precision = selection_precision(history, dataset.truth.provenance);
    record.loss_c = mean_or_zero(sum_c, used);
    record.loss_o = mean_or_zero(sum_o, used);
    record.loss_total = mean_or_zero(sum_total, used);
    record.test_acc = evaluate(student, test_set);
    result.records.push_back(record);

    if (observer != nullptr) {
      if (want_selection) {
        std::ranges::sort(selection, {}, &SelectionEntry::idx);
        observer->on_selection(epoch, selection);
      }
      if (observer->on_epoch_end) observer->on_epoch_end(record, student, teacher);
    }
  }
  return result;
}

TrainResult ablation_run(const NoisyDataset& dataset, const LabeledSet& test_set,
                         const TrainConfig& config, AblationMode mode,
                         const TrainObserver* observer) {
  return train(dataset, test_set, config, arm_for(mode), observer);
}

double evaluate(const MlpModel& model, const LabeledSet& test_set) {
  if (test_set.size() == 0) throw InvalidInput("evaluate: empty test set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const auto p = forward(model, test_set.features.row(i));
    if (static_cast<int>(p.argmax()) == test_set.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_set.size());
}

WindowStats final_window_accuracy(std::span<const EpochRecord> records, std::size_t window) {
  if (records.empty()) return {};
  const std::size_t k = std::min(window, records.size());
  const auto tail = records.last(k);
  double mean = 0.0;
  for (const auto& r : tail) mean += r.test_acc;
  mean /= static_cast<double>(k);
  double var = 0.0;
  for (const auto& r : tail) var += (r.test_acc - mean) * (r.test_acc - mean);
  return WindowStats{.mean = mean, .stddev = std::sqrt(var / static_cast<double>(k))};
}

}  // namespace josrc
