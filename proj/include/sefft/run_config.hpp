#pragma once

// Line-based run configuration:
//
//   # comment
//   schedule = se-fftnet          # or se-invfftnet, or 8,4,2,1
//   channels = 256
//   causal = false
//   learning_rate = 0.001
//   ...
//
// Keys: schedule, channels, causal, learning_rate, beta1, beta2, epsilon,
// target_field, batch_size, max_steps, checkpoint_interval, seed.
// Unknown keys and repeated keys are errors.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sefft/model.hpp"
#include "sefft/trainer.hpp"

namespace sefft {

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
};

/// "se-fftnet" / "se-invfftnet" (optionally ":levels:repeats") or a comma list.
DilationSchedule parse_schedule(const std::string& text);
std::string format_schedule(const DilationSchedule& schedule);

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text);

void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Applies a "key=value" override string.
void apply_override(RunConfig& config, const std::string& assignment);

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string format_run_config(const RunConfig& config);

}  // namespace sefft
