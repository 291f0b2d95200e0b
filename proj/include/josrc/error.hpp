// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace josrc {

/// Precondition violated by the caller (bad shape, bad range, bad argument).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A NaN or infinity showed up during a forward or backward pass.
class NumericFailure : public std::runtime_error {
 public:
  NumericFailure(const std::string& what, std::size_t layer)
      : std::runtime_error(what + " (layer " + std::to_string(layer) + ")"),
        layer_(layer) {}

  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

/// Malformed configuration line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A configuration value is outside its documented range.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string key, const std::string& what)
      : std::runtime_error(what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Training stopped on a numeric failure; carries where it happened.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, int epoch, std::size_t iteration)
      : std::runtime_error("epoch " + std::to_string(epoch) + ", iteration " +
                           std::to_string(iteration) + ": " + what),
        epoch_(epoch),
        iteration_(iteration) {}

  int epoch() const noexcept { return epoch_; }
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  int epoch_;
  std::size_t iteration_;
};

}  // namespace josrc
