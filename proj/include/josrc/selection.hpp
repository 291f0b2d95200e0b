// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "josrc/types.hpp"

namespace josrc {

/// JS divergence to the (smoothed) given label and the derived clean likelihood.
struct CleanScore {
  double d = 0.0;
  double p_clean = 1.0;
};

/// 1 when the two views disagree on the predicted class, else 0.
struct OodScore {
  double p_ood = 0.0;
};

struct ThresholdSchedule {
  double tau_c = 0.3;
  double tau_m = 0.95;
  int warmup_epochs = 10;
  int total_epochs = 100;
};

/// Disjoint index sets covering one batch.
struct BatchPartition {
  std::vector<std::size_t> clean;
  std::vector<std::size_t> id;
  std::vector<std::size_t> ood;

  std::size_t size() const noexcept { return clean.size() + id.size() + ood.size(); }
  friend bool operator==(const BatchPartition&, const BatchPartition&) = default;
};

/// Jensen-Shannon divergence with base-2 logs, in [0, 1]. Entries of y must
/// be strictly positive; a zero in a log argument raises InvalidInput.
double js_divergence(const ProbDist& p, const ProbDist& y);

CleanScore clean_likelihood(const ProbDist& p, const ProbDist& y_smoothed);

OodScore ood_likelihood(const ProbDist& p, const ProbDist& p_prime);

/// Clean-selection threshold for epoch t (1-based): a linear ramp from 0 to
/// tau_c over the warm-up, then linear from tau_c to tau_m at the last epoch.
double dynamic_threshold(int epoch, const ThresholdSchedule& sched);

/// A sample is clean iff p_clean(p, y) > tau_clean; a non-clean sample is OOD
/// iff p_ood(p, p') > tau_ood, otherwise ID. Indices are batch positions.
BatchPartition partition_batch(std::span<const ProbDist> p, std::span<const ProbDist> p_prime,
                               std::span<const ProbDist> y_smoothed, double tau_clean,
                               double tau_ood);

/// Indices whose clean likelihood exceeds tau_clean. Depends only on each
/// sample's own score, so batch composition cannot change the outcome.
std::vector<std::size_t> threshold_clean(std::span<const CleanScore> scores, double tau_clean);

/// Per-mini-batch small-loss baseline: the ceil((1 - drop_rate) * B) smallest
/// losses, ties broken by lower index, returned in ascending index order.
std::vector<std::size_t> small_loss_select(std::span<const double> losses, double drop_rate);

}  // namespace josrc
