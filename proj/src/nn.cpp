// SPDX-License-Identifier: Apache-2.0
#include "josrc/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "josrc/error.hpp"

namespace josrc {

namespace {

Parameters zero_parameters(const std::vector<std::size_t>& dims) {
  if (dims.size() < 2) {
    throw InvalidInput("MlpModel: need at least input and output dims");
  }
  for (auto d : dims) {
    if (d == 0) throw InvalidInput("MlpModel: layer dims must be positive");
  }
  Parameters p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    p.weights.emplace_back(dims[l + 1], dims[l]);
    p.biases.emplace_back(dims[l + 1], 0.0);
  }
  return p;
}

Parameters zeros_like(const Parameters& p) {
  Parameters z;
  for (const auto& w : p.weights) z.weights.emplace_back(w.rows(), w.cols());
  for (const auto& b : p.biases) z.biases.emplace_back(b.size(), 0.0);
  return z;
}

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double v) { return std::isfinite(v); });
}

// a[0] = x, a[l] = relu(W_{l-1} a[l-1] + b_{l-1}) for hidden layers, last = logits.
std::vector<std::vector<double>> forward_trace(const MlpModel& model,
                                               std::span<const double> x) {
  if (x.size() != model.input_dim()) {
    throw InvalidInput("forward: input has dimension " + std::to_string(x.size()) +
                       ", model expects " + std::to_string(model.input_dim()));
  }
  const auto& params = model.params();
  const std::size_t layers = model.layer_count();
  std::vector<std::vector<double>> acts;
  acts.reserve(layers + 1);
  acts.emplace_back(x.begin(), x.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& w = params.weights[l];
    const auto& b = params.biases[l];
    const auto& in = acts.back();
    std::vector<double> out(w.rows());
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const auto row = w.row(r);
      double z = b[r];
      for (std::size_t c = 0; c < row.size(); ++c) z += row[c] * in[c];
      out[r] = (l + 1 < layers) ? std::max(z, 0.0) : z;
    }
    if (!all_finite(out)) {
      throw NumericFailure("non-finite activation in forward pass", l);
    }
    acts.push_back(std::move(out));
  }
  return acts;
}

void backprop(const MlpModel& model, const std::vector<std::vector<double>>& acts,
              std::vector<double> delta, Parameters& grads) {
  const auto& params = model.params();
  for (std::size_t l = model.layer_count(); l-- > 0;) {
    const auto& w = params.weights[l];
    const auto& in = acts[l];
    auto& gw = grads.weights[l];
    auto& gb = grads.biases[l];
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const double d = delta[r];
      gb[r] += d;
      if (d == 0.0) continue;
      auto grow = gw.row(r);
      for (std::size_t c = 0; c < grow.size(); ++c) grow[c] += d * in[c];
    }
    if (l == 0) break;
    std::vector<double> prev(w.cols(), 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      const auto row = w.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) prev[c] += row[c] * d;
    }
    for (std::size_t c = 0; c < prev.size(); ++c) {
      if (!(in[c] > 0.0)) prev[c] = 0.0;
    }
    if (!all_finite(prev)) {
      throw NumericFailure("non-finite gradient in backward pass", l);
    }
    delta = std::move(prev);
  }
}

// Loss gradient w.r.t. logits given dL/dp and dL/dlog(p), where log(p) is
// floored at kProbFloor (floored entries carry no gradient through the log).
std::vector<double> logit_gradient(const ProbDist& p, std::span<const double> g_p,
                                   std::span<const double> g_logp) {
  const std::size_t n = p.size();
  double dot_p = 0.0;
  double dot_logp = 0.0;
  std::vector<double> masked(n);
  for (std::size_t c = 0; c < n; ++c) {
    masked[c] = p[c] > kProbFloor ? g_logp[c] : 0.0;
    dot_p += g_p[c] * p[c];
    dot_logp += masked[c];
  }
  std::vector<double> dz(n);
  for (std::size_t c = 0; c < n; ++c) {
    dz[c] = p[c] * (g_p[c] - dot_p) + masked[c] - p[c] * dot_logp;
  }
  return dz;
}

double floored_log(double p) { return std::log(std::max(p, kProbFloor)); }

void check_congruent(const Parameters& a, const Parameters& b, const char* what) {
  if (!a.congruent(b)) {
    throw InvalidInput(std::string(what) + ": parameter shapes differ");
  }
}

}  // namespace

bool Parameters::congruent(const Parameters& other) const noexcept {
  if (weights.size() != other.weights.size() || biases.size() != other.biases.size()) {
    return false;
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].same_shape(other.weights[l])) return false;
  }
  for (std::size_t l = 0; l < biases.size(); ++l) {
    if (biases[l].size() != other.biases[l].size()) return false;
  }
  return true;
}

MlpModel MlpModel::zeros(std::vector<std::size_t> layer_dims) {
  auto params = zero_parameters(layer_dims);
  return MlpModel(std::move(layer_dims), std::move(params));
}

MlpModel MlpModel::initialized(std::vector<std::size_t> layer_dims, std::uint64_t seed) {
  auto params = zero_parameters(layer_dims);
  std::mt19937_64 rng(seed);
  for (auto& w : params.weights) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& v : w.data()) v = dist(rng);
  }
  return MlpModel(std::move(layer_dims), std::move(params));
}

MlpModel MlpModel::from_parameters(std::vector<std::size_t> layer_dims, Parameters params) {
  const auto expected = zero_parameters(layer_dims);
  check_congruent(expected, params, "MlpModel::from_parameters");
  return MlpModel(std::move(layer_dims), std::move(params));
}

OptimizerState OptimizerState::for_model(const MlpModel& model, double learning_rate) {
  OptimizerState s;
  s.learning_rate = learning_rate;
  s.first_moment = zeros_like(model.params());
  s.second_moment = zeros_like(model.params());
  return s;
}

std::vector<double> logits(const MlpModel& model, std::span<const double> x) {
  auto acts = forward_trace(model, x);
  return std::move(acts.back());
}

ProbDist softmax(std::span<const double> z) {
  if (z.empty()) throw InvalidInput("softmax: empty logits");
  const double top = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double total = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) {
    p[c] = std::exp(z[c] - top);
    total += p[c];
  }
  for (auto& v : p) v /= total;
  return ProbDist(std::move(p));
}

ProbDist forward(const MlpModel& model, std::span<const double> x) {
  return softmax(logits(model, x));
}

BackwardResult backward(const MlpModel& model, std::span<const ViewPair> batch,
                        std::span<const ProbDist> targets, std::span<const int> signs,
                        double alpha) {
  if (batch.empty()) throw InvalidInput("backward: empty batch");
  if (targets.size() != batch.size() || signs.size() != batch.size()) {
    throw InvalidInput("backward: targets and signs must align with the batch");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidInput("backward: alpha out of [0,1]");

  const std::size_t n = batch.size();
  const std::size_t classes = model.class_count();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double w_c = (1.0 - alpha) * inv_n;

  BackwardResult result;
  result.grads.d = zeros_like(model.params());
  std::vector<ProbDist> p(n);
  std::vector<ProbDist> q(n);
  std::vector<double> g_p(classes), g_lp(classes), g_q(classes), g_lq(classes);

  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i].size() != classes) {
      throw InvalidInput("backward: target has wrong class count");
    }
    if (signs[i] != 1 && signs[i] != -1) {
      throw InvalidInput("backward: sign must be +1 or -1");
    }
    const auto trace_v = forward_trace(model, batch[i].v);
    const auto trace_w = forward_trace(model, batch[i].v_prime);
    p[i] = softmax(trace_v.back());
    q[i] = softmax(trace_w.back());

    const double w_o = alpha * signs[i] * inv_n;
    for (std::size_t c = 0; c < classes; ++c) {
      const double log_ratio = floored_log(p[i][c]) - floored_log(q[i][c]);
      const double diff = p[i][c] - q[i][c];
      g_lp[c] = -w_c * targets[i][c] + w_o * diff;
      g_p[c] = w_o * log_ratio;
      g_lq[c] = -w_c * targets[i][c] - w_o * diff;
      g_q[c] = -w_o * log_ratio;
    }
    backprop(model, trace_v, logit_gradient(p[i], g_p, g_lp), result.grads.d);
    backprop(model, trace_w, logit_gradient(q[i], g_q, g_lq), result.grads.d);
  }

  const double l_c = classification_loss(p, q, targets);
  const double l_o = consistency_loss(p, q, signs);
  result.report = joint_loss(l_c, l_o, alpha, n);
  return result;
}

void optimizer_step(MlpModel& model, OptimizerState& state, const Gradients& grads) {
  auto& params = model.params();
  check_congruent(params, grads.d, "optimizer_step");
  check_congruent(params, state.first_moment, "optimizer_step");
  check_congruent(params, state.second_moment, "optimizer_step");

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  const double step = state.learning_rate / correction1;

  auto update = [&](std::span<double> theta, std::span<const double> g, std::span<double> m,
                    std::span<double> v) {
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
      theta[k] -= step * m[k] / (std::sqrt(v[k] / correction2) + state.epsilon);
    }
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    update(params.weights[l].data(), grads.d.weights[l].data(),
           state.first_moment.weights[l].data(), state.second_moment.weights[l].data());
    update(params.biases[l], grads.d.biases[l], state.first_moment.biases[l],
           state.second_moment.biases[l]);
  }
}

double lr_schedule(int epoch, int total_epochs, int decay_start_epoch, double base_lr) {
  const int t = std::clamp(epoch, 1, std::max(total_epochs, 1));
  if (t <= decay_start_epoch || total_epochs <= decay_start_epoch) return base_lr;
  const double remaining = static_cast<double>(total_epochs - t);
  return base_lr * remaining / static_cast<double>(total_epochs - decay_start_epoch);
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * b);
    return v;
  }

  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * b);
    return std::bit_cast<double>(v);
  }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw InvalidInput("checkpoint: truncated file");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const MlpModel& model) {
  std::vector<std::uint8_t> out{'J', 'S', 'R', 'C'};
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(model.layer_dims().size()));
  for (auto d : model.layer_dims()) put_u32(out, static_cast<std::uint32_t>(d));
  for (const auto& w : model.params().weights) {
    for (double v : w.data()) put_f64(out, v);
  }
  for (const auto& b : model.params().biases) {
    for (double v : b) put_f64(out, v);
  }
  return out;
}

MlpModel decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "JSRC", 4) != 0) {
    throw InvalidInput("checkpoint: bad magic");
  }
  Reader in(bytes.subspan(4));
  if (const auto version = in.u32(); version != kCheckpointVersion) {
    throw InvalidInput("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto count = in.u32();
  if (count < 2 || count > in.remaining() / 4) {
    throw InvalidInput("checkpoint: bad layer count");
  }
  std::vector<std::size_t> dims(count);
  for (auto& d : dims) d = in.u32();
  std::size_t scalars = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) scalars += (dims[l] + 1) * dims[l + 1];
  if (scalars * 8 != in.remaining()) {
    throw InvalidInput("checkpoint: payload size does not match layer dims");
  }
  auto params = zero_parameters(dims);
  for (auto& w : params.weights) {
    for (auto& v : w.data()) v = in.f64();
  }
  for (auto& b : params.biases) {
    for (auto& v : b) v = in.f64();
  }
  return MlpModel::from_parameters(std::move(dims), std::move(params));
}

void save_checkpoint(const MlpModel& model, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

MlpModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace josrc
