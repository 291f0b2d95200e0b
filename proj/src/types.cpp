// SPDX-License-Identifier: Apache-2.0
#include "josrc/types.hpp"

#include <cmath>
#include <string>

#include "josrc/error.hpp"

namespace josrc {

ProbDist::ProbDist(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) {
    throw InvalidInput("ProbDist: empty distribution");
  }
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw InvalidInput("ProbDist: entry " + std::to_string(p) + " is not a probability");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kSumTolerance) {
    throw InvalidInput("ProbDist: entries sum to " + std::to_string(total));
  }
}

ProbDist ProbDist::uniform(std::size_t classes) {
  if (classes == 0) {
    throw InvalidInput("ProbDist::uniform: zero classes");
  }
  return ProbDist(std::vector<double>(classes, 1.0 / static_cast<double>(classes)));
}

std::size_t ProbDist::argmax() const {
  std::size_t best = 0;
  for (std::size_t c = 1; c < probs_.size(); ++c) {
    if (probs_[c] > probs_[best]) best = c;
  }
  return best;
}

}  // namespace josrc
