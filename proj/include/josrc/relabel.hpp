// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "josrc/nn.hpp"
#include "josrc/selection.hpp"
#include "josrc/types.hpp"

namespace josrc {

/// Exponential moving average of the student's parameters. Never trained
/// directly; only ema_update touches it.
struct MeanTeacher {
  MlpModel params;
  double decay = 0.99;
};

enum class TargetOrigin { SmoothedGiven, TeacherId, TeacherOodFlattened };

struct TargetAssignment {
  std::vector<ProbDist> targets;
  std::vector<TargetOrigin> origins;
};

/// Mass 1 - epsilon on label, epsilon / (C - 1) on every other class.
ProbDist smooth_label(std::size_t label, std::size_t class_count, double epsilon);

/// Teacher softmax on the unaugmented sample.
ProbDist teacher_label_id(std::span<const double> x, const MeanTeacher& teacher);

/// softmax(p_teacher / s): near-uniform for large s.
ProbDist teacher_label_ood(std::span<const double> x, const MeanTeacher& teacher, double s);

/// Same flattening applied to an already computed teacher distribution.
ProbDist flatten(const ProbDist& teacher_probs, double s);

/// theta_mt <- omega * theta_mt + (1 - omega) * theta, in place.
void ema_update(MeanTeacher& teacher, const MlpModel& student);

/// Routes each batch member to its target: clean -> smoothed given label,
/// id -> teacher prediction, ood -> flattened teacher prediction.
/// samples[i] and given_labels[i] describe batch position i.
TargetAssignment assign_targets(std::span<const std::span<const double>> samples,
                                std::span<const int> given_labels,
                                const BatchPartition& partition, const MeanTeacher& teacher,
                                double epsilon, double s);

}  // namespace josrc
