// SPDX-License-Identifier: Apache-2.0
#include "josrc/objective.hpp"

#include <algorithm>
#include <cmath>

#include "josrc/error.hpp"

namespace josrc {

namespace {

double floored_log(double p) { return std::log(std::max(p, kProbFloor)); }

void check_aligned(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw InvalidInput(std::string(what) + ": batch lengths differ");
  }
}

}  // namespace

double kl_divergence(const ProbDist& p, const ProbDist& q) {
  if (p.size() != q.size()) {
    throw InvalidInput("kl_divergence: class counts differ");
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    sum += p[c] * (floored_log(p[c]) - floored_log(q[c]));
  }
  return sum;
}

double classification_loss(std::span<const ProbDist> p, std::span<const ProbDist> p_prime,
                           std::span<const ProbDist> targets) {
  check_aligned(p.size(), p_prime.size(), "classification_loss");
  check_aligned(p.size(), targets.size(), "classification_loss");
  if (p.empty()) {
    throw InvalidInput("classification_loss: empty batch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& y = targets[i];
    if (y.size() != p[i].size() || y.size() != p_prime[i].size()) {
      throw InvalidInput("classification_loss: class counts differ");
    }
    for (std::size_t c = 0; c < y.size(); ++c) {
      sum -= y[c] * (floored_log(p[i][c]) + floored_log(p_prime[i][c]));
    }
  }
  const double loss = sum / static_cast<double>(p.size());
  if (!std::isfinite(loss)) {
    throw NumericFailure("classification_loss is not finite", 0);
  }
  return loss;
}

double consistency_loss(std::span<const ProbDist> p, std::span<const ProbDist> p_prime,
                        std::span<const int> signs) {
  check_aligned(p.size(), p_prime.size(), "consistency_loss");
  check_aligned(p.size(), signs.size(), "consistency_loss");
  if (p.empty()) {
    throw InvalidInput("consistency_loss: empty batch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (signs[i] != 1 && signs[i] != -1) {
      throw InvalidInput("consistency_loss: sign must be +1 or -1");
    }
    sum += signs[i] * (kl_divergence(p[i], p_prime[i]) + kl_divergence(p_prime[i], p[i]));
  }
  const double loss = sum / static_cast<double>(p.size());
  if (!std::isfinite(loss)) {
    throw NumericFailure("consistency_loss is not finite", 0);
  }
  return loss;
}

LossReport joint_loss(double l_c, double l_o, double alpha, std::size_t batch_size) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw InvalidInput("joint_loss: alpha out of [0,1]");
  }
  return LossReport{.l_c = l_c,
                    .l_o = l_o,
                    .l_total = (1.0 - alpha) * l_c + alpha * l_o,
                    .alpha = alpha,
                    .batch_size = batch_size};
}

}  // namespace josrc
