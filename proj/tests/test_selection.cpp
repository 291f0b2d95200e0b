// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "josrc/error.hpp"
#include "josrc/relabel.hpp"
#include "josrc/selection.hpp"
#include "support.hpp"

using namespace josrc;

TEST_SUITE("selection") {

TEST_CASE("js divergence scalar reference values") {
  const double delta = 1e-6;
  const auto p = ProbDist::uniform(2);
  const auto y = testing::make_dist({1.0 - delta, delta});
  CHECK(std::abs(js_divergence(p, y) - testing::oracle::js_half_vs(delta)) <= 1e-9);
  CHECK(js_divergence(p, y) == doctest::Approx(0.31127).epsilon(1e-4));
  // d -> 0 limit: 1.5 - (3/4) log2 3
  CHECK(testing::oracle::js_half_vs(1e-12) == doctest::Approx(1.5 - 0.75 * std::log2(3.0)).epsilon(1e-9));
  CHECK(clean_likelihood(p, y).p_clean == doctest::Approx(0.68873).epsilon(1e-4));
}

TEST_CASE("js divergence properties") {
  Rng rng(21);
  for (int k = 0; k < 2000; ++k) {
    const std::size_t c = 2 + k % 9;
    const auto p = testing::random_dist(rng, c);
    const auto q = testing::random_dist(rng, c, 1e-3);
    const auto r = testing::random_dist(rng, c, 1e-3);
    const double d = js_divergence(p, q);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    CHECK(d == doctest::Approx(testing::oracle::js_bits(p.values(), q.values())).epsilon(1e-12));
    CHECK(js_divergence(q, r) == doctest::Approx(js_divergence(r, q)).epsilon(1e-12));
    CHECK(js_divergence(q, q) == 0.0);
    const auto s = clean_likelihood(p, q);
    CHECK(s.p_clean == 1.0 - s.d);
  }
}

TEST_CASE("js divergence requires a smoothed label") {
  const auto p = ProbDist::uniform(2);
  CHECK_THROWS_AS(js_divergence(p, testing::make_dist({1.0, 0.0})), InvalidInput);
  CHECK_THROWS_AS(js_divergence(p, ProbDist::uniform(3)), InvalidInput);
  CHECK(js_divergence(testing::make_dist({1.0, 0.0}), testing::make_dist({1e-9, 1.0 - 1e-9})) <=
        1.0);
}

TEST_CASE("clean likelihood decreases toward uniform") {
  const auto y = smooth_label(2, 5, 1e-6);
  double previous = 2.0;
  for (double mass = 0.99; mass > 0.2; mass -= 0.01) {
    std::vector<double> p(5, (1.0 - mass) / 4.0);
    p[2] = mass;
    const double score = clean_likelihood(ProbDist(p), y).p_clean;
    CHECK(score < previous);
    previous = score;
  }
}

TEST_CASE("ranking by p_clean matches ranking by divergence") {
  Rng rng(8);
  for (int k = 0; k < 50; ++k) {
    std::vector<ProbDist> preds;
    std::vector<ProbDist> labels;
    for (int i = 0; i < 32; ++i) {
      preds.push_back(testing::random_dist(rng, 6));
      labels.push_back(smooth_label(static_cast<std::size_t>(i % 6), 6, 1e-6));
    }
    std::vector<std::size_t> by_clean(32), by_js(32);
    std::iota(by_clean.begin(), by_clean.end(), 0);
    by_js = by_clean;
    std::ranges::stable_sort(by_clean, [&](auto a, auto b) {
      return clean_likelihood(preds[a], labels[a]).p_clean >
             clean_likelihood(preds[b], labels[b]).p_clean;
    });
    std::ranges::stable_sort(by_js, [&](auto a, auto b) {
      return js_divergence(preds[a], labels[a]) < js_divergence(preds[b], labels[b]);
    });
    CHECK(by_clean == by_js);
  }
}

TEST_CASE("small-loss ranking agrees with clean likelihood on one-hot predictions") {
  // Predictions of the form mass m on the label, rest spread evenly: both the
  // cross-entropy and the divergence are monotone in m.
  std::vector<double> losses;
  std::vector<double> p_clean;
  for (double m : {0.9, 0.3, 0.6, 0.15, 0.75}) {
    std::vector<double> p(4, (1.0 - m) / 3.0);
    p[1] = m;
    losses.push_back(-std::log(m));
    p_clean.push_back(clean_likelihood(ProbDist(p), smooth_label(1, 4, 1e-6)).p_clean);
  }
  std::vector<std::size_t> a(5), b(5);
  std::iota(a.begin(), a.end(), 0);
  b = a;
  std::ranges::sort(a, [&](auto i, auto j) { return losses[i] < losses[j]; });
  std::ranges::sort(b, [&](auto i, auto j) { return p_clean[i] > p_clean[j]; });
  CHECK(a == b);
}

TEST_CASE("ood likelihood") {
  std::vector<double> a(8, 0.1), b(8, 0.1);
  a[2] = 0.3;
  b[5] = 0.3;
  CHECK(ood_likelihood(ProbDist(a), ProbDist(a)).p_ood == 0.0);
  CHECK(ood_likelihood(ProbDist(a), ProbDist(b)).p_ood == 1.0);
  std::vector<double> c(8, 0.1), d(8, 0.1);
  c[3] = 0.3;
  d[4] = 0.3;
  CHECK(ood_likelihood(ProbDist(c), ProbDist(d)).p_ood == 1.0);
}

TEST_CASE("ood likelihood ignores argmax-preserving rescaling") {
  Rng rng(4);
  std::uniform_real_distribution<double> scale(0.1, 5.0);
  for (int k = 0; k < 200; ++k) {
    const auto za = testing::random_vector(rng, 5);
    const auto zb = testing::random_vector(rng, 5);
    const double s = scale(rng);
    std::vector<double> sa(za), sb(zb);
    for (auto& v : sa) v = s * v + 3.0;
    for (auto& v : sb) v = s * v - 1.0;
    CHECK(ood_likelihood(softmax(za), softmax(zb)).p_ood ==
          ood_likelihood(softmax(sa), softmax(sb)).p_ood);
  }
}

TEST_CASE("dynamic threshold") {
  const ThresholdSchedule sched{.tau_c = 0.3, .tau_m = 0.95, .warmup_epochs = 10,
                                .total_epochs = 100};
  CHECK(dynamic_threshold(10, sched) == 0.3);
  CHECK(dynamic_threshold(100, sched) == 0.95);
  CHECK(dynamic_threshold(5, sched) == doctest::Approx(0.15).epsilon(1e-15));
  CHECK(dynamic_threshold(1, sched) == doctest::Approx(0.03).epsilon(1e-15));
  double previous = 0.0;
  for (int t = 1; t <= 100; ++t) {
    const double tau = dynamic_threshold(t, sched);
    CHECK(tau >= previous);
    previous = tau;
  }
  // both linear pieces meet at t_w
  const double left = dynamic_threshold(10, sched) - dynamic_threshold(9, sched);
  const double right = dynamic_threshold(11, sched) - dynamic_threshold(10, sched);
  CHECK(left == doctest::Approx(0.03));
  CHECK(right == doctest::Approx(0.65 / 90.0));
  CHECK_THROWS_AS(dynamic_threshold(0, sched), InvalidInput);
  CHECK_THROWS_AS(dynamic_threshold(101, sched), InvalidInput);
}

TEST_CASE("partition extremes") {
  Rng rng(12);
  std::vector<ProbDist> p, q, y;
  for (int i = 0; i < 10; ++i) {
    y.push_back(testing::random_dist(rng, 4, 0.01));
    p.push_back(y.back());
    q.push_back(testing::random_dist(rng, 4));
  }
  const auto all_clean = partition_batch(p, q, y, 0.5, 0.5);
  CHECK(all_clean.clean.size() == 10);
  CHECK(all_clean.id.empty());
  CHECK(all_clean.ood.empty());

  const auto none_clean = partition_batch(p, q, y, 1.0, 0.5);
  CHECK(none_clean.clean.empty());
  for (auto i : none_clean.ood) CHECK(p[i].argmax() != q[i].argmax());
  for (auto i : none_clean.id) CHECK(p[i].argmax() == q[i].argmax());
  CHECK(none_clean.size() == 10);
}

TEST_CASE("partition equals the per-sample brute force") {
  Rng rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int batch = 0; batch < 200; ++batch) {
    std::vector<ProbDist> p, q, y;
    for (int i = 0; i < 64; ++i) {
      p.push_back(testing::random_dist(rng, 5));
      q.push_back(testing::random_dist(rng, 5));
      y.push_back(smooth_label(static_cast<std::size_t>(i % 5), 5, 0.1));
    }
    const double tau = u(rng);
    const auto got = partition_batch(p, q, y, tau, 0.5);
    const auto want = testing::oracle::partition(p, q, y, tau, 0.5);
    CHECK(got.clean == want.clean);
    CHECK(got.id == want.id);
    CHECK(got.ood == want.ood);
  }
}

TEST_CASE("small-loss selection") {
  const std::vector<double> losses{3.0, 1.0, 2.0};
  CHECK(small_loss_select(losses, 1.0 / 3.0) == std::vector<std::size_t>{1, 2});
  CHECK(small_loss_select(losses, 0.0) == std::vector<std::size_t>{0, 1, 2});
  const std::vector<double> ties{1.0, 1.0, 1.0, 0.5};
  CHECK(small_loss_select(ties, 0.5) == std::vector<std::size_t>{0, 3});
  CHECK_THROWS_AS(small_loss_select(losses, 1.0), InvalidInput);
}

TEST_CASE("threshold_clean depends only on each score") {
  Rng rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<CleanScore> pool;
  for (int i = 0; i < 100; ++i) {
    const double d = u(rng);
    pool.push_back({d, 1.0 - d});
  }
  const auto global = threshold_clean(pool, 0.6);
  std::vector<std::size_t> stitched;
  for (std::size_t start = 0; start < pool.size(); start += 17) {
    const std::size_t len = std::min<std::size_t>(17, pool.size() - start);
    for (auto i : threshold_clean(std::span(pool).subspan(start, len), 0.6)) {
      stitched.push_back(start + i);
    }
  }
  CHECK(global == stitched);
}

}  // TEST_SUITE
