// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

#include "josrc/types.hpp"

namespace josrc {

/// Floor applied to probabilities before any natural log in the losses.
inline constexpr double kProbFloor = 1e-12;

/// Loss values for one batch. l_total = (1 - alpha) * l_c + alpha * l_o.
struct LossReport {
  double l_c = 0.0;
  double l_o = 0.0;
  double l_total = 0.0;
  double alpha = 0.0;
  std::size_t batch_size = 0;
};

/// Mean over samples of the soft-target cross-entropy of both views
/// (natural log). Throws NumericFailure on a non-finite result.
double classification_loss(std::span<const ProbDist> p, std::span<const ProbDist> p_prime,
                           std::span<const ProbDist> targets);

/// Signed symmetric KL between the two views, averaged over the batch.
/// signs[i] must be +1 (clean or ID) or -1 (OOD).
double consistency_loss(std::span<const ProbDist> p, std::span<const ProbDist> p_prime,
                        std::span<const int> signs);

LossReport joint_loss(double l_c, double l_o, double alpha, std::size_t batch_size = 0);

/// KL(p || q) in nats with both arguments floored at kProbFloor.
double kl_divergence(const ProbDist& p, const ProbDist& q);

}  // namespace josrc
