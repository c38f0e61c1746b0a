#include "sefft/checkpoint.hpp"

#include <limits>

#include "sefft/binary_io.hpp"

namespace sefft {

namespace {

void write_layer(binary::Writer& w, const Conv1x1Params<float>& c) {
  for (Index i = 0; i < c.weight.rows(); ++i)
    for (Index j = 0; j < c.weight.cols(); ++j) w.f32(c.weight(i, j));
  for (Index j = 0; j < c.bias.size(); ++j) w.f32(c.bias(j));
}

void read_layer(binary::Reader& r, Conv1x1Params<float>& c) {
  for (Index i = 0; i < c.weight.rows(); ++i)
    for (Index j = 0; j < c.weight.cols(); ++j) c.weight(i, j) = r.f32();
  for (Index j = 0; j < c.bias.size(); ++j) c.bias(j) = r.f32();
}

std::uint32_t narrow(Index v, const char* what) {
  if (v < 0 || v > static_cast<Index>(std::numeric_limits<std::uint32_t>::max()))
    throw ConfigError(std::string(what) + " does not fit the checkpoint format");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::string encode_checkpoint(const ModelConfig& config, const ModelParams<float>& params) {
  params.check(config);
  binary::Writer w;
  w.bytes({kCheckpointMagic, 4});
  w.u32(kCheckpointVersion);
  w.u32(narrow(static_cast<Index>(config.schedule.size()), "schedule length"));
  for (Index d : config.schedule.dilations()) w.u32(narrow(d, "dilation"));
  w.u32(narrow(config.channels, "channel count"));
  w.u32(config.causal() ? 1u : 0u);
  params.for_each([&](const Conv1x1Params<float>& c) { write_layer(w, c); });
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  binary::Reader r(bytes, "checkpoint");
  if (r.bytes(4) != std::string_view(kCheckpointMagic, 4)) throw DataError("checkpoint: bad magic");
  const auto version = r.u32();
  if (version != kCheckpointVersion)
    throw DataError("checkpoint: unsupported version " + std::to_string(version));

  const auto blocks = r.u32();
  if (blocks == 0 || blocks > (1u << 20)) throw DataError("checkpoint: implausible schedule length");
  std::vector<Index> dilations(blocks);
  for (auto& d : dilations) d = r.u32();
  Checkpoint ck;
  try {
    ck.config.schedule = DilationSchedule(std::move(dilations));
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  ck.config.channels = r.u32();
  const auto causality = r.u32();
  if (causality > 1) throw DataError("checkpoint: bad causality flag");
  ck.config.causality = causality ? Causality::Causal : Causality::NonCausal;
  if (ck.config.channels < 1) throw DataError("checkpoint: channel count must be >= 1");

  const auto expected = static_cast<std::uint64_t>(count_params(ck.config)) * 4u;
  if (r.remaining() != expected)
    throw DataError("checkpoint: parameter payload is " + std::to_string(r.remaining()) + " bytes, expected " +
                    std::to_string(expected));
  ck.params = ModelParams<float>::zeros(ck.config);
  ck.params.for_each([&](Conv1x1Params<float>& c) { read_layer(r, c); });
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config, const ModelParams<float>& params) {
  binary::write_file(path, encode_checkpoint(config, params));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(binary::read_file(path));
}

}  // namespace sefft
