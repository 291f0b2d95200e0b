// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "josrc/objective.hpp"
#include "josrc/types.hpp"

namespace josrc {

/// Weights and biases of a dense network. weights[l] is (out x in),
/// biases[l] has length out. Also used as the gradient carrier.
struct Parameters {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  bool congruent(const Parameters& other) const noexcept;
  friend bool operator==(const Parameters&, const Parameters&) = default;
};

/// Feed-forward classifier with rectifier hidden layers and a softmax head.
class MlpModel {
 public:
  MlpModel() = default;

  /// All parameters zero.
  static MlpModel zeros(std::vector<std::size_t> layer_dims);

  /// Scaled uniform fan-in initialization: W ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)),
  /// zero biases.
  static MlpModel initialized(std::vector<std::size_t> layer_dims, std::uint64_t seed);

  /// Wraps existing parameters; throws InvalidInput if shapes do not chain.
  static MlpModel from_parameters(std::vector<std::size_t> layer_dims, Parameters params);

  const std::vector<std::size_t>& layer_dims() const noexcept { return dims_; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t class_count() const { return dims_.back(); }
  std::size_t layer_count() const noexcept { return params_.weights.size(); }

  Parameters& params() noexcept { return params_; }
  const Parameters& params() const noexcept { return params_; }

  friend bool operator==(const MlpModel&, const MlpModel&) = default;

 private:
  MlpModel(std::vector<std::size_t> dims, Parameters params)
      : dims_(std::move(dims)), params_(std::move(params)) {}

  std::vector<std::size_t> dims_;
  Parameters params_;
};

struct Gradients {
  Parameters d;
};

/// Adaptive-moment optimizer state.
struct OptimizerState {
  double learning_rate = 1e-3;
  std::uint64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Parameters first_moment;
  Parameters second_moment;

  static OptimizerState for_model(const MlpModel& model, double learning_rate);
};

/// Pre-softmax outputs.
std::vector<double> logits(const MlpModel& model, std::span<const double> x);

ProbDist softmax(std::span<const double> logits);

ProbDist forward(const MlpModel& model, std::span<const double> x);

struct BackwardResult {
  Gradients grads;
  LossReport report;
};

/// Exact gradients of (1 - alpha) * L_c + alpha * L_o over the batch, where
/// both views of every pair enter the classification term and the signed
/// symmetric KL between views forms the consistency term.
BackwardResult backward(const MlpModel& model, std::span<const ViewPair> batch,
                        std::span<const ProbDist> targets, std::span<const int> signs,
                        double alpha);

/// One adaptive-moment update in place. step_count is incremented.
void optimizer_step(MlpModel& model, OptimizerState& state, const Gradients& grads);

/// Constant base_lr until decay_start_epoch, then linear decay to 0 at total_epochs.
double lr_schedule(int epoch, int total_epochs, int decay_start_epoch, double base_lr);

// Checkpoints: "JSRC", u32 version, u32 layer count, u32 layer dims, then
// weights and biases as little-endian f64, layer order, row-major.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const MlpModel& model);
MlpModel decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_checkpoint(const std::filesystem::path& path);

}  // namespace josrc
