#include "sefft/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "sefft/binary_io.hpp"
#include "sefft/checkpoint.hpp"

namespace sefft {

namespace {

constexpr char kStateMagic[4] = {'S', 'E', 'F', 'S'};
constexpr std::uint32_t kStateVersion = 1;

template <typename Fn>
void for_each_array(ModelParams<float>& params, Fn&& fn) {
  std::size_t i = 0;
  params.for_each([&](Conv1x1Params<float>& c) {
    fn(i++, c.weight.reshaped<Eigen::RowMajor>(), c.weight_grad.reshaped<Eigen::RowMajor>());
    fn(i++, c.bias.reshaped(), c.bias_grad.reshaped());
  });
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (target_field < 1) throw ConfigError("target_field must be >= 1");
  if (batch_size != 1) throw ConfigError("only batch_size = 1 is supported");
}

OptimizerState OptimizerState::zeros(const ModelParams<float>& params) {
  OptimizerState s;
  params.for_each([&](const Conv1x1Params<float>& c) {
    s.first.push_back(Eigen::VectorXf::Zero(c.weight.size()));
    s.first.push_back(Eigen::VectorXf::Zero(c.bias.size()));
  });
  s.second = s.first;
  return s;
}

void adam_step(ModelParams<float>& params, OptimizerState& state, const TrainConfig& config) {
  bool finite = true;
  std::size_t arrays = 0;
  for_each_array(params, [&](std::size_t, auto, auto grad) {
    finite = finite && grad.allFinite();
    ++arrays;
  });
  if (!finite) throw DataError("non-finite gradient at optimizer step " + std::to_string(state.step + 1));
  if (state.first.size() != arrays || state.second.size() != arrays)
    throw ConfigError("optimizer state does not match the parameter store");

  const std::uint64_t t = state.step + 1;
  const double correction1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  const float b1 = static_cast<float>(config.beta1);
  const float b2 = static_cast<float>(config.beta2);
  const float step_size = static_cast<float>(config.learning_rate / correction1);
  const float inv_sqrt_c2 = static_cast<float>(1.0 / std::sqrt(correction2));
  const float eps = static_cast<float>(config.epsilon);

  for_each_array(params, [&](std::size_t i, auto value, auto grad) {
    auto& m = state.first[i];
    auto& v = state.second[i];
    if (m.size() != value.size()) throw ConfigError("optimizer state does not match the parameter store");
    m = b1 * m + (1.0f - b1) * grad;
    v = b2 * v + (1.0f - b2) * grad.cwiseAbs2();
    value.array() -= step_size * m.array() / (v.array().sqrt() * inv_sqrt_c2 + eps);
  });
  state.step = t;
}

TrainBatch make_batch(const RealizedPair& pair, std::size_t utterance, Index start, Index length,
                      const ReceptiveField& field) {
  const Index total = pair.clean.size();
  if (pair.noisy.size() != total) throw DataError("noisy and clean lengths differ");
  if (start < 0 || length < 1 || start + length > total) throw ConfigError("batch slice out of range");

  TrainBatch b;
  b.utterance = utterance;
  b.utterance_length = total;
  b.target_start = start;
  b.clean = pair.clean.samples.segment(start, length);
  b.noisy = Eigen::VectorXf::Zero(field.past + length + field.future);
  const Index lo = std::max<Index>(0, start - field.past);
  const Index hi = std::min<Index>(total, start + length + field.future);
  b.noisy.segment(lo - (start - field.past), hi - lo) = pair.noisy.samples.segment(lo, hi - lo);

  const Index margin = field.margin();
  b.loss_begin = std::max<Index>(start, margin) - start;
  b.loss_end = std::min<Index>(start + length, total - margin) - start;
  return b;
}

std::vector<BatchRef> plan_epoch(std::span<const RealizedPair> data, const ReceptiveField& field,
                                 Index target_field, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);

  const Index margin = field.margin();
  std::vector<BatchRef> plan;
  for (std::size_t u : order) {
    const Index total = data[u].clean.size();
    for (Index start = 0; start < total; start += target_field) {
      const Index length = std::min(target_field, total - start);
      if (std::max(start, margin) < std::min(start + length, total - margin)) plan.push_back({u, start, length});
    }
  }
  return plan;
}

Trainer::Trainer(ModelConfig model, TrainConfig config, std::vector<RealizedPair> data, ModelParams<float> params)
    : model_(std::move(model)),
      config_(config),
      field_(receptive_field(model_)),
      data_(std::move(data)),
      params_(std::move(params)),
      optimizer_(OptimizerState::zeros(params_)) {
  config_.validate();
  params_.check(model_);
  if (data_.empty()) throw ConfigError("training needs at least one utterance");
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (data_[i].clean.size() <= 2 * field_.margin())
      throw ConfigError(Manifest::utterance_id(i) + " has " + std::to_string(data_[i].clean.size()) +
                        " samples, too short for a receptive-field margin of " + std::to_string(field_.margin()));
  }
  plan_ = plan_epoch(data_, field_, config_.target_field, config_.seed, epoch_);
}

void Trainer::advance_epoch() {
  ++epoch_;
  cursor_ = 0;
  plan_ = plan_epoch(data_, field_, config_.target_field, config_.seed, epoch_);
}

StepRecord Trainer::step() {
  if (cursor_ >= plan_.size()) advance_epoch();
  const auto ref = plan_[cursor_];
  const auto batch = make_batch(data_[ref.utterance], ref.utterance, ref.start, ref.length, field_);

  Tensor2<float> input(Grid<float>(batch.noisy));
  auto trace = forward_traced(input, params_, model_);
  const auto prediction = trace.output.value().col(0).segment(field_.past, ref.length);
  const auto loss = l1_loss_range<float>(batch.clean, prediction, batch.loss_begin, batch.loss_end);
  if (!std::isfinite(loss.loss))
    throw DataError("non-finite loss at step " + std::to_string(optimizer_.step + 1) + " (" +
                    Manifest::utterance_id(ref.utterance) + ")");

  Grid<float> d_output = Grid<float>::Zero(trace.output.steps(), 1);
  d_output.col(0).segment(field_.past, ref.length) = loss.grad;
  params_.zero_grad();
  backward(trace, params_, model_, d_output);
  adam_step(params_, optimizer_, config_);
  ++cursor_;
  return {optimizer_.step, ref.utterance, loss.loss};
}

std::string Trainer::encode_state() const {
  binary::Writer w;
  w.bytes({kStateMagic, 4});
  w.u32(kStateVersion);
  w.u64(config_.seed);
  w.u64(optimizer_.step);
  w.u64(epoch_);
  w.u64(cursor_);
  w.u64(optimizer_.first.size());
  for (std::size_t i = 0; i < optimizer_.first.size(); ++i) {
    w.u64(static_cast<std::uint64_t>(optimizer_.first[i].size()));
    for (float x : optimizer_.first[i]) w.f32(x);
    for (float x : optimizer_.second[i]) w.f32(x);
  }
  return w.take();
}

void Trainer::restore_state(const std::string& bytes) {
  binary::Reader r(bytes, "training state");
  if (r.bytes(4) != std::string_view(kStateMagic, 4)) throw DataError("training state: bad magic");
  if (r.u32() != kStateVersion) throw DataError("training state: unsupported version");
  if (r.u64() != config_.seed) throw ConfigError("training state was written with a different seed");
  OptimizerState restored = OptimizerState::zeros(params_);
  restored.step = r.u64();
  const auto epoch = r.u64();
  const auto cursor = r.u64();
  if (r.u64() != restored.first.size()) throw DataError("training state: parameter layout mismatch");
  for (std::size_t i = 0; i < restored.first.size(); ++i) {
    if (r.u64() != static_cast<std::uint64_t>(restored.first[i].size()))
      throw DataError("training state: parameter layout mismatch");
    for (auto& x : restored.first[i]) x = r.f32();
    for (auto& x : restored.second[i]) x = r.f32();
  }
  if (r.remaining() != 0) throw DataError("training state: trailing bytes");

  epoch_ = epoch;
  plan_ = plan_epoch(data_, field_, config_.target_field, config_.seed, epoch_);
  if (cursor > plan_.size()) throw DataError("training state: data cursor out of range");
  cursor_ = static_cast<std::size_t>(cursor);
  optimizer_ = std::move(restored);
}

std::filesystem::path state_path_for(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  p.replace_extension(".state");
  return p;
}

std::string format_loss_row(const StepRecord& r) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%llu,%s,%.9g\n", static_cast<unsigned long long>(r.step),
                Manifest::utterance_id(r.utterance).c_str(), static_cast<double>(r.loss));
  return buf;
}

namespace {

void write_snapshot(const Trainer& trainer, const std::filesystem::path& checkpoint) {
  save_checkpoint(checkpoint, trainer.model_config(), trainer.params());
  binary::write_file(state_path_for(checkpoint), trainer.encode_state());
}

// Rows of an existing loss log up to and including `last_step`.
std::string loss_log_prefix(const std::filesystem::path& path, std::uint64_t last_step) {
  std::string kept = "step,utterance,loss\n";
  if (!std::filesystem::exists(path)) return kept;
  std::istringstream in(binary::read_file(path));
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto step = std::stoull(line.substr(0, line.find(',')));
    if (step <= last_step) kept += line + '\n';
  }
  return kept;
}

}  // namespace

TrainResult train(const ModelConfig& model, const Manifest& manifest, const TrainConfig& config,
                  const std::filesystem::path& out_dir, const std::filesystem::path& resume_from) {
  config.validate();
  if (manifest.specs.empty()) throw ConfigError("training manifest is empty");
  std::vector<RealizedPair> data;
  data.reserve(manifest.specs.size());
  for (const auto& spec : manifest.specs) data.push_back(realize(spec));

  std::filesystem::create_directories(out_dir);
  const auto log_path = out_dir / "loss.csv";

  ModelConfig arch = model;
  ModelParams<float> params;
  std::string state;
  if (!resume_from.empty()) {
    auto ck = load_checkpoint(resume_from);
    arch = ck.config;
    params = std::move(ck.params);
    state = binary::read_file(state_path_for(resume_from));
  } else {
    params = build<float>(arch, config.seed);
  }

  Trainer trainer(arch, config, std::move(data), std::move(params));
  if (!state.empty()) trainer.restore_state(state);

  std::ofstream log;
  {
    const auto prefix = loss_log_prefix(log_path, trainer.steps_done());
    binary::write_file(log_path, prefix);
    log.open(log_path, std::ios::app | std::ios::binary);
    if (!log) throw DataError("cannot open " + log_path.string());
  }

  TrainResult result;
  while (trainer.steps_done() < config.max_steps) {
    const auto rec = trainer.step();
    result.log.push_back(rec);
    log << format_loss_row(rec);
    if (config.checkpoint_interval > 0 && rec.step % config.checkpoint_interval == 0) {
      log.flush();
      char name[48];
      std::snprintf(name, sizeof(name), "ckpt_%06llu.seff", static_cast<unsigned long long>(rec.step));
      write_snapshot(trainer, out_dir / name);
    }
  }
  log.flush();
  if (!log) throw DataError("error writing " + log_path.string());
  result.final_checkpoint = out_dir / "model.seff";
  write_snapshot(trainer, result.final_checkpoint);
  return result;
}

}  // namespace sefft
