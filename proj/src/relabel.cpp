// SPDX-License-Identifier: Apache-2.0
#include "josrc/relabel.hpp"

#include <optional>

#include "josrc/error.hpp"

namespace josrc {

ProbDist smooth_label(std::size_t label, std::size_t class_count, double epsilon) {
  if (class_count < 2) throw InvalidInput("smooth_label: need at least two classes");
  if (label >= class_count) throw InvalidInput("smooth_label: label out of range");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) {
    throw InvalidInput("smooth_label: epsilon must lie in [0,1)");
  }
  std::vector<double> y(class_count, epsilon / static_cast<double>(class_count - 1));
  y[label] = 1.0 - epsilon;
  return ProbDist(std::move(y));
}

ProbDist teacher_label_id(std::span<const double> x, const MeanTeacher& teacher) {
  return forward(teacher.params, x);
}

ProbDist flatten(const ProbDist& teacher_probs, double s) {
  if (!(s > 0.0)) throw InvalidInput("flatten: scale must be positive");
  std::vector<double> scaled(teacher_probs.size());
  for (std::size_t c = 0; c < scaled.size(); ++c) scaled[c] = teacher_probs[c] / s;
  return softmax(scaled);
}

ProbDist teacher_label_ood(std::span<const double> x, const MeanTeacher& teacher, double s) {
  return flatten(forward(teacher.params, x), s);
}

void ema_update(MeanTeacher& teacher, const MlpModel& student) {
  auto& mt = teacher.params.params();
  const auto& st = student.params();
  if (!mt.congruent(st)) throw InvalidInput("ema_update: teacher and student shapes differ");
  const double w = teacher.decay;
  auto blend = [w](std::span<double> into, std::span<const double> from) {
    for (std::size_t k = 0; k < into.size(); ++k) into[k] = w * into[k] + (1.0 - w) * from[k];
  };
  for (std::size_t l = 0; l < mt.weights.size(); ++l) {
    blend(mt.weights[l].data(), st.weights[l].data());
    blend(mt.biases[l], st.biases[l]);
  }
}

TargetAssignment assign_targets(std::span<const std::span<const double>> samples,
                                std::span<const int> given_labels,
                                const BatchPartition& partition, const MeanTeacher& teacher,
                                double epsilon, double s) {
  const std::size_t n = samples.size();
  if (given_labels.size() != n || partition.size() != n) {
    throw InvalidInput("assign_targets: partition does not cover the batch");
  }
  const std::size_t classes = teacher.params.class_count();
  std::vector<std::optional<ProbDist>> targets(n);
  std::vector<TargetOrigin> origins(n);
  auto claim = [&](std::size_t i) {
    if (i >= n || targets[i]) throw InvalidInput("assign_targets: partition is not disjoint");
  };
  for (auto i : partition.clean) {
    claim(i);
    targets[i] = smooth_label(static_cast<std::size_t>(given_labels[i]), classes, epsilon);
    origins[i] = TargetOrigin::SmoothedGiven;
  }
  for (auto i : partition.id) {
    claim(i);
    targets[i] = teacher_label_id(samples[i], teacher);
    origins[i] = TargetOrigin::TeacherId;
  }
  for (auto i : partition.ood) {
    claim(i);
    targets[i] = teacher_label_ood(samples[i], teacher, s);
    origins[i] = TargetOrigin::TeacherOodFlattened;
  }
  TargetAssignment out;
  out.targets.reserve(n);
  for (auto& t : targets) out.targets.push_back(std::move(*t));
  out.origins = std::move(origins);
  return out;
}

}  // namespace josrc
