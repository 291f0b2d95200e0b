// SPDX-License-Identifier: Apache-2.0
// Shared helpers and independent reference implementations for the tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "josrc/nn.hpp"
#include "josrc/objective.hpp"
#include "josrc/types.hpp"

namespace testing {

inline josrc::ProbDist random_dist(josrc::Rng& rng, std::size_t classes, double min_mass = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(classes);
  double sum = 0.0;
  for (auto& x : v) {
    x = u(rng) + min_mass;
    sum += x;
  }
  for (auto& x : v) x /= sum;
  return josrc::ProbDist(std::move(v));
}

inline std::vector<double> random_vector(josrc::Rng& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

inline josrc::ProbDist make_dist(std::vector<double> v) { return josrc::ProbDist(std::move(v)); }

namespace oracle {

// Plain two-pass JS divergence in bits, 0 * log 0 = 0.
inline double js_bits(std::span<const double> p, std::span<const double> q) {
  double kl_pm = 0.0;
  double kl_qm = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) kl_pm += p[i] * std::log2(p[i] / m);
    if (q[i] > 0.0) kl_qm += q[i] * std::log2(q[i] / m);
  }
  return 0.5 * kl_pm + 0.5 * kl_qm;
}

// JS divergence of (1/2, 1/2) against (1 - d, d), written out term by term.
inline double js_half_vs(double d) {
  const double m0 = 0.5 * (0.5 + (1.0 - d));
  const double m1 = 0.5 * (0.5 + d);
  const double kl_p = 0.5 * std::log2(0.5 / m0) + 0.5 * std::log2(0.5 / m1);
  const double kl_y = (1.0 - d) * std::log2((1.0 - d) / m0) + d * std::log2(d / m1);
  return 0.5 * kl_p + 0.5 * kl_y;
}

// Softmax straight from the definition, no shift.
inline std::vector<double> softmax(std::span<const double> z) {
  std::vector<double> e(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    e[i] = std::exp(z[i]);
    sum += e[i];
  }
  for (auto& x : e) x /= sum;
  return e;
}

// Layer-by-layer forward pass with explicit index loops.
inline std::vector<double> forward(const josrc::MlpModel& model, std::span<const double> x) {
  std::vector<double> a(x.begin(), x.end());
  const auto& params = model.params();
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    const auto& w = params.weights[l];
    std::vector<double> z(w.rows());
    for (std::size_t r = 0; r < w.rows(); ++r) {
      double acc = params.biases[l][r];
      for (std::size_t c = 0; c < w.cols(); ++c) acc += w(r, c) * a[c];
      z[r] = acc;
    }
    if (l + 1 < params.weights.size()) {
      for (auto& v : z) v = v > 0.0 ? v : 0.0;
    }
    a = std::move(z);
  }
  return softmax(a);
}

// (1 - alpha) * L_c + alpha * L_o evaluated from the oracle forward pass.
inline double objective(const josrc::MlpModel& model, std::span<const josrc::ViewPair> batch,
                        std::span<const josrc::ProbDist> targets, std::span<const int> signs,
                        double alpha) {
  auto clamp = [](double v) { return std::max(v, josrc::kProbFloor); };
  double l_c = 0.0;
  double l_o = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto p = oracle::forward(model, batch[i].v);
    const auto q = oracle::forward(model, batch[i].v_prime);
    double kl_pq = 0.0;
    double kl_qp = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) {
      l_c -= targets[i][c] * (std::log(clamp(p[c])) + std::log(clamp(q[c])));
      kl_pq += p[c] * (std::log(clamp(p[c])) - std::log(clamp(q[c])));
      kl_qp += q[c] * (std::log(clamp(q[c])) - std::log(clamp(p[c])));
    }
    l_o += signs[i] * (kl_pq + kl_qp);
  }
  const double n = static_cast<double>(batch.size());
  return (1.0 - alpha) * l_c / n + alpha * l_o / n;
}

inline std::size_t first_argmax(std::span<const double> p) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return best;
}

// Per-sample application of both selection criteria.
struct Split {
  std::vector<std::size_t> clean, id, ood;
};

inline Split partition(std::span<const josrc::ProbDist> p, std::span<const josrc::ProbDist> p2,
                       std::span<const josrc::ProbDist> y, double tau_clean, double tau_ood) {
  Split out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double p_clean = 1.0 - js_bits(p[i].values(), y[i].values());
    const double a = static_cast<double>(first_argmax(p[i].values()));
    const double b = static_cast<double>(first_argmax(p2[i].values()));
    const double p_ood = std::min(1.0, std::abs(a - b));
    if (p_clean > tau_clean) {
      out.clean.push_back(i);
    } else if (p_ood > tau_ood) {
      out.ood.push_back(i);
    } else {
      out.id.push_back(i);
    }
  }
  return out;
}

// Smallest |pre-activation| of any hidden unit over the batch; used to keep
// finite differences away from rectifier kinks.
inline double min_hidden_margin(const josrc::MlpModel& model,
                                std::span<const josrc::ViewPair> batch) {
  double margin = std::numeric_limits<double>::infinity();
  const auto& params = model.params();
  for (const auto& pair : batch) {
    for (const auto* x : {&pair.v, &pair.v_prime}) {
      std::vector<double> a(*x);
      for (std::size_t l = 0; l + 1 < params.weights.size(); ++l) {
        const auto& w = params.weights[l];
        std::vector<double> z(w.rows());
        for (std::size_t r = 0; r < w.rows(); ++r) {
          double acc = params.biases[l][r];
          for (std::size_t c = 0; c < w.cols(); ++c) acc += w(r, c) * a[c];
          margin = std::min(margin, std::abs(acc));
          z[r] = acc > 0.0 ? acc : 0.0;
        }
        a = std::move(z);
      }
    }
  }
  return margin;
}

}  // namespace oracle

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t parameters = 0;
};

// Central differences against backward() on a random small model and batch.
// sign_mode: +1 all positive, -1 all negative, 0 mixed.
inline GradCheck gradient_check(std::uint64_t seed, double alpha, int sign_mode) {
  constexpr double kStep = 1e-5;
  constexpr double kDenominatorFloor = 1e-4;
  josrc::Rng rng(seed);
  std::uniform_int_distribution<std::size_t> width(2, 5);
  std::uniform_int_distribution<std::size_t> depth(0, 2);
  std::uniform_int_distribution<std::size_t> batch_len(1, 4);
  std::bernoulli_distribution coin(0.5);

  for (;;) {
    std::vector<std::size_t> dims{width(rng)};
    for (std::size_t h = depth(rng); h > 0; --h) dims.push_back(width(rng));
    dims.push_back(width(rng));
    auto model = josrc::MlpModel::initialized(dims, rng());
    for (auto& b : model.params().biases) {
      for (auto& v : b) v = random_vector(rng, 1, 0.3)[0];
    }
    const std::size_t n = batch_len(rng);
    std::vector<josrc::ViewPair> batch;
    std::vector<josrc::ProbDist> targets;
    std::vector<int> signs;
    for (std::size_t i = 0; i < n; ++i) {
      batch.push_back({random_vector(rng, dims.front()), random_vector(rng, dims.front()), i});
      targets.push_back(random_dist(rng, dims.back()));
      signs.push_back(sign_mode != 0 ? sign_mode : (coin(rng) ? 1 : -1));
    }
    if (oracle::min_hidden_margin(model, batch) < 1e-3) continue;

    const auto analytic = josrc::backward(model, batch, targets, signs, alpha).grads.d;
    GradCheck result;
    auto check = [&](double& theta, double grad) {
      const double saved = theta;
      theta = saved + kStep;
      const double up = oracle::objective(model, batch, targets, signs, alpha);
      theta = saved - kStep;
      const double down = oracle::objective(model, batch, targets, signs, alpha);
      theta = saved;
      const double numeric = (up - down) / (2.0 * kStep);
      const double denom = std::max({std::abs(numeric), std::abs(grad), kDenominatorFloor});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(numeric - grad) / denom);
      ++result.parameters;
    };
    auto& params = model.params();
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
      auto w = params.weights[l].data();
      auto gw = analytic.weights[l].data();
      for (std::size_t k = 0; k < w.size(); ++k) check(w[k], gw[k]);
      for (std::size_t k = 0; k < params.biases[l].size(); ++k) {
        check(params.biases[l][k], analytic.biases[l][k]);
      }
    }
    return result;
  }
}

}  // namespace testing
