#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sefft/dataset.hpp"
#include "sefft/model.hpp"

namespace sefft {

template <typename Scalar>
using Column = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct LossResult {
  Scalar loss = 0;
  Column<Scalar> grad;  // d loss / d prediction
};

/// Mean absolute error over prediction indices [begin, end); samples outside
/// the range contribute neither to the loss nor to the gradient.
template <typename Scalar, typename TargetDerived, typename PredDerived>
LossResult<Scalar> l1_loss_range(const Eigen::MatrixBase<TargetDerived>& target,
                                 const Eigen::MatrixBase<PredDerived>& prediction, Index begin, Index end) {
  if (target.size() != prediction.size()) throw ConfigError("l1_loss: target and prediction lengths differ");
  if (begin < 0 || end > target.size() || begin >= end)
    throw ConfigError("l1_loss: empty or out-of-range interior [" + std::to_string(begin) + ", " +
                      std::to_string(end) + ")");
  const auto n = static_cast<double>(end - begin);
  LossResult<Scalar> out;
  out.grad = Column<Scalar>::Zero(target.size());
  double total = 0.0;
  const Scalar inv = static_cast<Scalar>(1.0 / n);
  for (Index t = begin; t < end; ++t) {
    const Scalar diff = prediction(t) - target(t);
    total += std::abs(static_cast<double>(diff));
    out.grad(t) = diff > Scalar(0) ? inv : (diff < Scalar(0) ? -inv : Scalar(0));
  }
  out.loss = static_cast<Scalar>(total / n);
  return out;
}

/// Edge-excluding L1: averages |y_t - yhat_t| over the T - 2r samples
/// t = r .. T - r - 1.
template <typename Scalar, typename TargetDerived, typename PredDerived>
LossResult<Scalar> l1_loss(const Eigen::MatrixBase<TargetDerived>& target,
                           const Eigen::MatrixBase<PredDerived>& prediction, Index margin) {
  const Index steps = target.size();
  if (margin < 0) throw ConfigError("l1_loss: margin must be >= 0");
  if (steps <= 2 * margin)
    throw ConfigError("l1_loss: " + std::to_string(steps) + " samples leave no interior for margin " +
                      std::to_string(margin));
  return l1_loss_range<Scalar>(target, prediction, margin, steps - margin);
}

struct TrainConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Index target_field = 4096;
  Index batch_size = 1;
  std::uint64_t max_steps = 1000;
  std::uint64_t checkpoint_interval = 0;  // 0: only the final checkpoint
  std::uint64_t seed = 0;

  void validate() const;
};

/// Adam moments, one flat vector per parameter array in checkpoint order.
struct OptimizerState {
  std::vector<Eigen::VectorXf> first;
  std::vector<Eigen::VectorXf> second;
  std::uint64_t step = 0;

  static OptimizerState zeros(const ModelParams<float>& params);
};

/// One bias-corrected Adam update from the gradients stored in `params`.
/// Leaves everything untouched and throws DataError on a non-finite gradient.
void adam_step(ModelParams<float>& params, OptimizerState& state, const TrainConfig& config);

struct TrainBatch {
  std::size_t utterance = 0;
  Index utterance_length = 0;
  Index target_start = 0;   // first target sample, in utterance coordinates
  Eigen::VectorXf noisy;    // r1 + target + r2 samples, zero outside the utterance
  Eigen::VectorXf clean;    // target samples
  Index loss_begin = 0;     // loss interior, in target coordinates
  Index loss_end = 0;
};

/// Target field [start, start + length) of one utterance with its context.
TrainBatch make_batch(const RealizedPair& pair, std::size_t utterance, Index start, Index length,
                      const ReceptiveField& field);

struct BatchRef {
  std::size_t utterance = 0;
  Index start = 0;
  Index length = 0;
};

/// Target-field slices of every utterance in (shuffled) epoch order. Slices
/// whose samples all fall inside the excluded edge margins are dropped.
std::vector<BatchRef> plan_epoch(std::span<const RealizedPair> data, const ReceptiveField& field,
                                 Index target_field, std::uint64_t seed, std::uint64_t epoch);

struct StepRecord {
  std::uint64_t step = 0;
  std::size_t utterance = 0;
  float loss = 0;
};

/// Single-threaded training loop over an in-memory list of realized pairs.
class Trainer {
 public:
  Trainer(ModelConfig model, TrainConfig config, std::vector<RealizedPair> data, ModelParams<float> params);

  /// One forward/loss/backward/Adam step on the next batch.
  StepRecord step();

  const ModelConfig& model_config() const { return model_; }
  const TrainConfig& train_config() const { return config_; }
  const ModelParams<float>& params() const { return params_; }
  const OptimizerState& optimizer() const { return optimizer_; }
  std::uint64_t steps_done() const { return optimizer_.step; }

  /// Optimizer moments and data cursor; pairs with a model checkpoint.
  std::string encode_state() const;
  void restore_state(const std::string& bytes);

 private:
  void advance_epoch();

  ModelConfig model_;
  TrainConfig config_;
  ReceptiveField field_;
  std::vector<RealizedPair> data_;
  ModelParams<float> params_;
  OptimizerState optimizer_;
  std::uint64_t epoch_ = 0;
  std::size_t cursor_ = 0;
  std::vector<BatchRef> plan_;
};

struct TrainResult {
  std::vector<StepRecord> log;
  std::filesystem::path final_checkpoint;
};

/// Realizes the manifest, trains for config.max_steps steps and writes
///   <out>/loss.csv                      step,utterance,loss
///   <out>/ckpt_<step>.seff/.state       every checkpoint_interval steps
///   <out>/model.seff, <out>/model.state after the last step
/// With `resume_from` the run continues from that checkpoint (and its
/// .state file) and appends to loss.csv.
TrainResult train(const ModelConfig& model, const Manifest& manifest, const TrainConfig& config,
                  const std::filesystem::path& out_dir, const std::filesystem::path& resume_from = {});

std::filesystem::path state_path_for(const std::filesystem::path& checkpoint);

std::string format_loss_row(const StepRecord& r);

}  // namespace sefft
