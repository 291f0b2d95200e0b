// SPDX-License-Identifier: Apache-2.0
#include "josrc/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "josrc/error.hpp"

namespace josrc {

namespace {

// KL(a || m) in bits where m = (a + b) / 2. Terms with a_c = 0 contribute 0.
double kl_to_mixture(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    if (a[c] == 0.0) continue;
    const double m = 0.5 * (a[c] + b[c]);
    sum += a[c] * std::log2(a[c] / m);
  }
  return sum;
}

}  // namespace

double js_divergence(const ProbDist& p, const ProbDist& y) {
  if (p.size() != y.size()) throw InvalidInput("js_divergence: class counts differ");
  for (std::size_t c = 0; c < y.size(); ++c) {
    if (y[c] == 0.0) {
      throw InvalidInput("js_divergence: label distribution has a zero entry at class " +
                         std::to_string(c) + "; smooth it first");
    }
  }
  const double d = 0.5 * kl_to_mixture(p.values(), y.values()) +
                   0.5 * kl_to_mixture(y.values(), p.values());
  return std::clamp(d, 0.0, 1.0);
}

CleanScore clean_likelihood(const ProbDist& p, const ProbDist& y_smoothed) {
  const double d = js_divergence(p, y_smoothed);
  return CleanScore{.d = d, .p_clean = 1.0 - d};
}

OodScore ood_likelihood(const ProbDist& p, const ProbDist& p_prime) {
  if (p.size() != p_prime.size()) throw InvalidInput("ood_likelihood: class counts differ");
  return OodScore{.p_ood = p.argmax() == p_prime.argmax() ? 0.0 : 1.0};
}

double dynamic_threshold(int epoch, const ThresholdSchedule& sched) {
  if (epoch < 1 || epoch > sched.total_epochs) {
    throw InvalidInput("dynamic_threshold: epoch " + std::to_string(epoch) +
                       " outside [1, t_max]");
  }
  if (sched.warmup_epochs <= 0 || sched.warmup_epochs >= sched.total_epochs) {
    throw InvalidInput("dynamic_threshold: need 0 < t_w < t_max");
  }
  const double t = epoch;
  const double t_w = sched.warmup_epochs;
  if (epoch <= sched.warmup_epochs) return t / t_w * sched.tau_c;
  const double span = static_cast<double>(sched.total_epochs - sched.warmup_epochs);
  return sched.tau_c + (t - t_w) * (sched.tau_m - sched.tau_c) / span;
}

BatchPartition partition_batch(std::span<const ProbDist> p, std::span<const ProbDist> p_prime,
                               std::span<const ProbDist> y_smoothed, double tau_clean,
                               double tau_ood) {
  if (p.size() != p_prime.size() || p.size() != y_smoothed.size()) {
    throw InvalidInput("partition_batch: batch lengths differ");
  }
  BatchPartition out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (clean_likelihood(p[i], y_smoothed[i]).p_clean > tau_clean) {
      out.clean.push_back(i);
    } else if (ood_likelihood(p[i], p_prime[i]).p_ood > tau_ood) {
      out.ood.push_back(i);
    } else {
      out.id.push_back(i);
    }
  }
  return out;
}

std::vector<std::size_t> threshold_clean(std::span<const CleanScore> scores,
                                         double tau_clean) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].p_clean > tau_clean) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> small_loss_select(std::span<const double> losses, double drop_rate) {
  if (!(drop_rate >= 0.0 && drop_rate < 1.0)) {
    throw InvalidInput("small_loss_select: drop_rate must lie in [0,1)");
  }
  std::vector<std::size_t> order(losses.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return losses[a] < losses[b]; });
  // Tolerate representation error in (1 - drop_rate) * B before taking the ceiling.
  const double keep_exact = (1.0 - drop_rate) * static_cast<double>(losses.size());
  auto keep = static_cast<std::size_t>(std::ceil(keep_exact - 1e-9));
  keep = std::min(keep, losses.size());
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace josrc
