#pragma once

// SE-FFTNet: a parallel, non-causal stack of dilated three-tap blocks.
//
//   x[T x 1] -> input_proj (1x1, 1 -> C)
//            -> block(d_0) -> block(d_1) -> ... -> block(d_{B-1})
//            -> final_fc (1x1, C -> 1) -> y[T x 1]
//
// Each block reads its input at t - d, t and t + d, mixes each tap with its
// own 1x1 convolution, sums, applies ReLU, a second 1x1 convolution and
// ReLU, then adds the block input back (skip path). A decreasing schedule
// (512, 256, ..., 1) is SE-FFTNet; the increasing one is SE-InvFFTNet.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sefft/tensor.hpp"

namespace sefft {

enum class Causality { NonCausal, Causal };

class DilationSchedule {
 public:
  DilationSchedule() = default;

  explicit DilationSchedule(std::vector<Index> dilations) : dilations_(std::move(dilations)) {
    if (dilations_.empty()) throw ConfigError("dilation schedule must not be empty");
    for (Index d : dilations_)
      if (d < 1) throw ConfigError("dilations must be >= 1, got " + std::to_string(d));
  }

  /// Wide-first schedule: [2^(levels-1), ..., 2, 1] repeated.
  static DilationSchedule se_fftnet(int levels = 10, int repeats = 3) {
    if (levels < 1 || repeats < 1) throw ConfigError("levels and repeats must be >= 1");
    std::vector<Index> d;
    for (int r = 0; r < repeats; ++r)
      for (int l = levels - 1; l >= 0; --l) d.push_back(Index{1} << l);
    return DilationSchedule(std::move(d));
  }

  /// Narrow-first (WaveNet-like) schedule: [1, 2, ..., 2^(levels-1)] repeated.
  static DilationSchedule se_invfftnet(int levels = 10, int repeats = 3) {
    return se_fftnet(levels, repeats).reversed();
  }

  DilationSchedule reversed() const { return DilationSchedule({dilations_.rbegin(), dilations_.rend()}); }

  const std::vector<Index>& dilations() const { return dilations_; }
  std::size_t size() const { return dilations_.size(); }
  Index operator[](std::size_t i) const { return dilations_[i]; }

  Index sum() const {
    Index s = 0;
    for (Index d : dilations_) s += d;
    return s;
  }

  bool operator==(const DilationSchedule&) const = default;

 private:
  std::vector<Index> dilations_;
};

struct ModelConfig {
  static constexpr Index kInputChannels = 1;
  static constexpr Index kOutputChannels = 1;

  DilationSchedule schedule = DilationSchedule::se_fftnet();
  Index channels = 256;
  Causality causality = Causality::NonCausal;

  void validate() const {
    if (channels < 1) throw ConfigError("channels must be >= 1");
    if (schedule.size() == 0) throw ConfigError("dilation schedule must not be empty");
  }

  bool causal() const { return causality == Causality::Causal; }

  bool operator==(const ModelConfig&) const = default;
};

/// Number of past (r1) and future (r2) input samples visible to one output.
struct ReceptiveField {
  Index past = 0;
  Index future = 0;

  /// Edge margin excluded from the loss: max(r1, r2).
  Index margin() const { return past > future ? past : future; }
};

inline ReceptiveField receptive_field(const ModelConfig& config) {
  config.validate();
  const Index r = config.schedule.sum();
  return {r, config.causal() ? Index{0} : r};
}

/// Learnable scalar count: 2C + B*(taps*(C^2 + C) + C^2 + C) + C + 1.
inline std::int64_t count_params(const ModelConfig& config) {
  config.validate();
  const std::int64_t c = config.channels;
  const std::int64_t blocks = static_cast<std::int64_t>(config.schedule.size());
  const std::int64_t taps = config.causal() ? 2 : 3;
  const std::int64_t conv = c * c + c;
  return (ModelConfig::kInputChannels * c + c) + blocks * (taps * conv + conv) +
         (c * ModelConfig::kOutputChannels + ModelConfig::kOutputChannels);
}

template <typename Scalar>
struct BlockParams {
  Conv1x1Params<Scalar> tap_past;
  Conv1x1Params<Scalar> tap_present;
  std::optional<Conv1x1Params<Scalar>> tap_future;  // absent in causal mode
  Conv1x1Params<Scalar> post;

  static BlockParams zeros(Index channels, Causality causality) {
    BlockParams b;
    b.tap_past = Conv1x1Params<Scalar>::zeros(channels, channels);
    b.tap_present = Conv1x1Params<Scalar>::zeros(channels, channels);
    if (causality == Causality::NonCausal) b.tap_future = Conv1x1Params<Scalar>::zeros(channels, channels);
    b.post = Conv1x1Params<Scalar>::zeros(channels, channels);
    return b;
  }

  Index channels() const { return tap_present.in_channels(); }

  /// Visits the 1x1 layers in serialization order: past, present, future, post.
  template <typename Fn>
  void for_each(Fn&& fn) {
    fn(tap_past);
    fn(tap_present);
    if (tap_future) fn(*tap_future);
    fn(post);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    fn(tap_past);
    fn(tap_present);
    if (tap_future) fn(*tap_future);
    fn(post);
  }
};

template <typename Scalar>
struct ModelParams {
  Conv1x1Params<Scalar> input_proj;  // [1 x C]
  std::vector<BlockParams<Scalar>> blocks;
  Conv1x1Params<Scalar> final_fc;    // [C x 1]

  static ModelParams zeros(const ModelConfig& config) {
    config.validate();
    ModelParams p;
    p.input_proj = Conv1x1Params<Scalar>::zeros(ModelConfig::kInputChannels, config.channels);
    for (std::size_t i = 0; i < config.schedule.size(); ++i)
      p.blocks.push_back(BlockParams<Scalar>::zeros(config.channels, config.causality));
    p.final_fc = Conv1x1Params<Scalar>::zeros(config.channels, ModelConfig::kOutputChannels);
    return p;
  }

  /// Visits every 1x1 layer in checkpoint order.
  template <typename Fn>
  void for_each(Fn&& fn) {
    fn(input_proj);
    for (auto& b : blocks) b.for_each(fn);
    fn(final_fc);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    fn(input_proj);
    for (const auto& b : blocks) b.for_each(fn);
    fn(final_fc);
  }

  std::int64_t size() const {
    std::int64_t n = 0;
    for_each([&](const Conv1x1Params<Scalar>& c) { n += c.size(); });
    return n;
  }

  void zero_grad() {
    for_each([](Conv1x1Params<Scalar>& c) { c.zero_grad(); });
  }

  /// Checks that the store matches the architecture it will be run with.
  void check(const ModelConfig& config) const {
    config.validate();
    if (blocks.size() != config.schedule.size())
      throw ConfigError("parameter store has " + std::to_string(blocks.size()) + " blocks, schedule has " +
                        std::to_string(config.schedule.size()));
    if (input_proj.in_channels() != ModelConfig::kInputChannels || input_proj.out_channels() != config.channels ||
        final_fc.in_channels() != config.channels || final_fc.out_channels() != ModelConfig::kOutputChannels)
      throw ConfigError("input/output projection shapes do not match the config");
    for (const auto& b : blocks) {
      if (b.tap_future.has_value() == config.causal())
        throw ConfigError("block tap layout does not match the configured causality");
      b.for_each([&](const Conv1x1Params<Scalar>& c) {
        c.check();
        if (c.in_channels() != config.channels || c.out_channels() != config.channels)
          throw ConfigError("block layer width does not match the configured channel count");
      });
    }
  }

  template <typename Other>
  ModelParams<Other> cast() const {
    ModelParams<Other> out;
    out.input_proj = input_proj.template cast<Other>();
    for (const auto& b : blocks) {
      BlockParams<Other> ob;
      ob.tap_past = b.tap_past.template cast<Other>();
      ob.tap_present = b.tap_present.template cast<Other>();
      if (b.tap_future) ob.tap_future = b.tap_future->template cast<Other>();
      ob.post = b.post.template cast<Other>();
      out.blocks.push_back(std::move(ob));
    }
    out.final_fc = final_fc.template cast<Other>();
    return out;
  }
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases. The draw
/// sequence is done in double so float and double stores from the same seed
/// agree up to rounding.
template <typename Scalar = float>
ModelParams<Scalar> build(const ModelConfig& config, std::uint64_t seed) {
  auto params = ModelParams<Scalar>::zeros(config);
  std::mt19937_64 rng(seed);
  params.for_each([&](Conv1x1Params<Scalar>& c) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(c.in_channels()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Index i = 0; i < c.weight.rows(); ++i)
      for (Index j = 0; j < c.weight.cols(); ++j) c.weight(i, j) = static_cast<Scalar>(dist(rng));
  });
  return params;
}

/// Intermediates of one block, kept for the backward pass.
template <typename Scalar>
struct BlockTrace {
  Tensor2<Scalar> past;     // x[t - d]
  Tensor2<Scalar> future;   // x[t + d], unused in causal mode
  Tensor2<Scalar> summed;   // sum of the tap convolutions, pre-ReLU
  Tensor2<Scalar> hidden;   // ReLU(summed)
  Tensor2<Scalar> mixed;    // post conv of hidden, pre-ReLU
};

template <typename Scalar>
Tensor2<Scalar> block_forward(const Tensor2<Scalar>& x, const BlockParams<Scalar>& p, Index dilation,
                              Causality causality, BlockTrace<Scalar>* trace = nullptr) {
  if (x.channels() != p.channels()) throw ConfigError("block input width does not match block parameters");
  if (causality == Causality::NonCausal && !p.tap_future)
    throw ConfigError("non-causal block requires a future tap");

  auto past = dilated_tap_gather(x, dilation, Tap::Past);
  auto summed = conv1x1_forward(past, p.tap_past);
  summed.value() += conv1x1_forward(x, p.tap_present).value();
  Tensor2<Scalar> future;
  if (causality == Causality::NonCausal) {
    future = dilated_tap_gather(x, dilation, Tap::Future);
    summed.value() += conv1x1_forward(future, *p.tap_future).value();
  }
  auto hidden = relu_forward(summed);
  auto mixed = conv1x1_forward(hidden, p.post);
  Tensor2<Scalar> out(Grid<Scalar>(x.value() + mixed.value().cwiseMax(Scalar(0))));

  if (trace) {
    trace->past = std::move(past);
    trace->future = std::move(future);
    trace->summed = std::move(summed);
    trace->hidden = std::move(hidden);
    trace->mixed = std::move(mixed);
  }
  return out;
}

/// Backward through one block. `x` is the block input; its grad receives
/// both the skip-path and the tap contributions.
template <typename Scalar>
void block_backward(const Grid<Scalar>& upstream, Tensor2<Scalar>& x, BlockParams<Scalar>& p, Index dilation,
                    Causality causality, BlockTrace<Scalar>& trace) {
  x.grad() += upstream;

  trace.mixed.require_grad().zero_grad();
  relu_backward(upstream, trace.mixed);
  trace.hidden.require_grad().zero_grad();
  conv1x1_backward(trace.mixed.grad(), trace.hidden, p.post);
  trace.summed.require_grad().zero_grad();
  relu_backward(trace.hidden.grad(), trace.summed);
  const auto& d_summed = trace.summed.grad();

  conv1x1_backward(d_summed, x, p.tap_present);
  trace.past.require_grad().zero_grad();
  conv1x1_backward(d_summed, trace.past, p.tap_past);
  tap_gather_backward(trace.past.grad(), x, dilation, Tap::Past);
  if (causality == Causality::NonCausal) {
    trace.future.require_grad().zero_grad();
    conv1x1_backward(d_summed, trace.future, *p.tap_future);
    tap_gather_backward(trace.future.grad(), x, dilation, Tap::Future);
  }
}

/// Everything needed to run `backward` after a forward pass.
template <typename Scalar>
struct ForwardTrace {
  Tensor2<Scalar> input;
  std::vector<Tensor2<Scalar>> states;  // states[0] = projected input, states[i+1] = output of block i
  std::vector<BlockTrace<Scalar>> blocks;
  Tensor2<Scalar> output;
};

/// Whole-sequence parallel inference; every output sample comes from one pass.
template <typename Scalar>
Tensor2<Scalar> forward(const Tensor2<Scalar>& input, const ModelParams<Scalar>& params, const ModelConfig& config) {
  params.check(config);
  if (input.channels() != ModelConfig::kInputChannels) throw ConfigError("model input must have one channel");
  auto state = conv1x1_forward(input, params.input_proj);
  for (std::size_t i = 0; i < params.blocks.size(); ++i)
    state = block_forward(state, params.blocks[i], config.schedule[i], config.causality);
  return conv1x1_forward(state, params.final_fc);
}

template <typename Scalar>
ForwardTrace<Scalar> forward_traced(const Tensor2<Scalar>& input, const ModelParams<Scalar>& params,
                                    const ModelConfig& config) {
  params.check(config);
  if (input.channels() != ModelConfig::kInputChannels) throw ConfigError("model input must have one channel");
  ForwardTrace<Scalar> trace;
  trace.input = input;
  trace.states.reserve(params.blocks.size() + 1);
  trace.blocks.resize(params.blocks.size());
  trace.states.push_back(conv1x1_forward(input, params.input_proj));
  for (std::size_t i = 0; i < params.blocks.size(); ++i)
    trace.states.push_back(
        block_forward(trace.states.back(), params.blocks[i], config.schedule[i], config.causality, &trace.blocks[i]));
  trace.output = conv1x1_forward(trace.states.back(), params.final_fc);
  return trace;
}

/// Accumulates parameter gradients for dL/doutput and returns dL/dinput.
template <typename Scalar>
Grid<Scalar> backward(ForwardTrace<Scalar>& trace, ModelParams<Scalar>& params, const ModelConfig& config,
                      const Grid<Scalar>& d_output) {
  if (trace.states.size() != params.blocks.size() + 1) throw UsageError("backward called without a matching trace");
  for (auto& s : trace.states) s.require_grad().zero_grad();
  trace.input.require_grad().zero_grad();

  conv1x1_backward(d_output, trace.states.back(), params.final_fc);
  for (std::size_t i = params.blocks.size(); i-- > 0;)
    block_backward(trace.states[i + 1].grad(), trace.states[i], params.blocks[i], config.schedule[i],
                   config.causality, trace.blocks[i]);
  conv1x1_backward(trace.states.front().grad(), trace.input, params.input_proj);
  return trace.input.grad();
}

}  // namespace sefft
