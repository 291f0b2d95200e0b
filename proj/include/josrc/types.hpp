// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace josrc {

/// Every stochastic operation draws from an explicitly seeded engine of this type.
using Rng = std::mt19937_64;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// A categorical distribution over C classes. Construction validates that
/// entries are non-negative and sum to one within 1e-9.
class ProbDist {
 public:
  static constexpr double kSumTolerance = 1e-9;

  ProbDist() = default;
  explicit ProbDist(std::vector<double> probs);

  static ProbDist uniform(std::size_t classes);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t c) const { return probs_[c]; }
  std::span<const double> values() const noexcept { return probs_; }

  /// Index of the largest entry; ties resolve to the lowest index.
  std::size_t argmax() const;

  friend bool operator==(const ProbDist&, const ProbDist&) = default;

 private:
  std::vector<double> probs_;
};

/// Two stochastic augmentations of one training sample.
struct ViewPair {
  std::vector<double> v;
  std::vector<double> v_prime;
  std::size_t source_index = 0;
};

}  // namespace josrc
