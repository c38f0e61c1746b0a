#pragma once

// Model checkpoint file (all integers and floats little-endian):
//
//   "SEFF"                      4-byte magic
//   u32 version                 currently 1
//   u32 B, u32 dilation[B]      dilation schedule
//   u32 channels
//   u32 causality               0 = non-causal, 1 = causal
//   f32 parameters              input_proj.w, input_proj.b, then per block
//                               tap_past.w/b, tap_present.w/b,
//                               tap_future.w/b (non-causal only), post.w/b,
//                               then final_fc.w/b. Weights are row-major
//                               [in x out].

#include <cstdint>
#include <filesystem>
#include <string>

#include "sefft/model.hpp"

namespace sefft {

inline constexpr char kCheckpointMagic[4] = {'S', 'E', 'F', 'F'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  ModelParams<float> params;
};

std::string encode_checkpoint(const ModelConfig& config, const ModelParams<float>& params);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config, const ModelParams<float>& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sefft
