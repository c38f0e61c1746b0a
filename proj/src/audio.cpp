#include "sefft/audio.hpp"

#include <cmath>
#include <limits>

#include "sefft/binary_io.hpp"

namespace sefft {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

void check_same_shape(const Waveform& a, const Waveform& b, const char* what) {
  if (a.size() != b.size())
    throw ConfigError(std::string(what) + ": length mismatch (" + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()) + ")");
  if (a.sample_rate != b.sample_rate)
    throw ConfigError(std::string(what) + ": sample rate mismatch (" + std::to_string(a.sample_rate) + " vs " +
                      std::to_string(b.sample_rate) + ")");
}

}  // namespace

void Waveform::validate() const {
  if (samples.size() == 0) throw DataError("waveform is empty");
  if (sample_rate <= 0) throw DataError("waveform sample rate must be positive");
  if (!samples.allFinite()) throw DataError("waveform contains non-finite samples");
}

Waveform decode_wav(const std::string& bytes) {
  binary::Reader r(bytes, "wav");
  if (r.bytes(4) != "RIFF") throw DataError("wav: missing RIFF header");
  r.u32();  // riff size; trusted less than the chunk walk below
  if (r.bytes(4) != "WAVE") throw DataError("wav: not a WAVE file");

  bool have_fmt = false;
  int rate = 0;
  std::string_view payload;
  bool have_data = false;
  while (r.remaining() >= 8 && !have_data) {
    const auto id = r.bytes(4);
    const auto size = r.u32();
    if (size > r.remaining()) throw DataError("wav: chunk '" + std::string(id) + "' overruns the file");
    if (id == "fmt ") {
      if (size < 16) throw DataError("wav: fmt chunk too short");
      binary::Reader fmt(r.bytes(size), "wav fmt");
      auto format = fmt.u16();
      const auto channels = fmt.u16();
      rate = static_cast<int>(fmt.u32());
      fmt.u32();  // byte rate
      fmt.u16();  // block align
      const auto bits = fmt.u16();
      if (format == kFormatExtensible && size >= 40) {
        fmt.u16();  // cbSize
        fmt.u16();  // valid bits
        fmt.u32();  // channel mask
        format = fmt.u16();  // first two bytes of the subformat GUID
      }
      if (format != kFormatPcm) throw DataError("wav: only integer PCM is supported (format " + std::to_string(format) + ")");
      if (channels != 1) throw DataError("wav: only mono is supported (" + std::to_string(channels) + " channels)");
      if (bits != 16) throw DataError("wav: only 16-bit samples are supported (" + std::to_string(bits) + " bits)");
      if (rate <= 0) throw DataError("wav: sample rate must be positive");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw DataError("wav: data chunk before fmt chunk");
      payload = r.bytes(size);
      have_data = true;
    } else {
      r.skip(size);
    }
    if (size % 2 == 1 && r.remaining() > 0) r.skip(1);
  }
  if (!have_fmt) throw DataError("wav: missing fmt chunk");
  if (!have_data) throw DataError("wav: missing data chunk");
  if (payload.size() % 2 != 0) throw DataError("wav: odd-sized 16-bit data chunk");
  if (payload.empty()) throw DataError("wav: zero-length audio");

  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(static_cast<Eigen::Index>(payload.size() / 2));
  binary::Reader pcm(payload, "wav data");
  for (Eigen::Index i = 0; i < w.samples.size(); ++i) w.samples[i] = static_cast<float>(pcm.i16()) / 32768.0f;
  return w;
}

std::string encode_wav(const Waveform& w) {
  w.validate();
  const auto data_bytes = static_cast<std::uint64_t>(w.size()) * 2u;
  if (data_bytes > std::numeric_limits<std::uint32_t>::max() - 36u) throw DataError("wav: audio too long");
  binary::Writer out;
  out.bytes("RIFF");
  out.u32(static_cast<std::uint32_t>(36 + data_bytes));
  out.bytes("WAVE");
  out.bytes("fmt ");
  out.u32(16);
  out.u16(kFormatPcm);
  out.u16(1);
  out.u32(static_cast<std::uint32_t>(w.sample_rate));
  out.u32(static_cast<std::uint32_t>(w.sample_rate) * 2u);
  out.u16(2);
  out.u16(16);
  out.bytes("data");
  out.u32(static_cast<std::uint32_t>(data_bytes));
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    // lround rounds half away from zero.
    long v = std::lround(static_cast<double>(w.samples[i]) * 32768.0);
    if (v > 32767) v = 32767;
    if (v < -32768) v = -32768;
    out.i16(static_cast<std::int16_t>(v));
  }
  return out.take();
}

Waveform read_wav(const std::filesystem::path& path) {
  try {
    return decode_wav(binary::read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_wav(const Waveform& w, const std::filesystem::path& path) { binary::write_file(path, encode_wav(w)); }

double rms(const Waveform& w) {
  if (w.size() == 0) throw DataError("rms of an empty waveform");
  return std::sqrt(w.samples.cast<double>().squaredNorm() / static_cast<double>(w.size()));
}

double rms_gain(const Waveform& w, double target) {
  if (!(target > 0.0) || !std::isfinite(target)) throw ConfigError("target RMS must be positive and finite");
  const double level = rms(w);
  if (!(level > 0.0)) throw DataError("cannot normalize a silent waveform");
  return target / level;
}

Waveform scaled(const Waveform& w, double gain) {
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples = (w.samples.cast<double>() * gain).cast<float>();
  return out;
}

Waveform normalize_rms(const Waveform& w, double target) { return scaled(w, rms_gain(w, target)); }

Mixture mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db) {
  if (!std::isfinite(snr_db)) throw ConfigError("SNR must be finite");
  check_same_shape(clean, noise, "mix_at_snr");
  const double clean_level = rms(clean);
  const double noise_level = rms(noise);
  if (!(clean_level > 0.0)) throw DataError("mix_at_snr: clean signal is silent");
  if (!(noise_level > 0.0)) throw DataError("mix_at_snr: noise signal is silent");

  Mixture m;
  m.noise_gain = (clean_level / noise_level) * std::pow(10.0, -snr_db / 20.0);
  m.scaled_noise = scaled(noise, m.noise_gain);
  m.noisy.sample_rate = clean.sample_rate;
  m.noisy.samples = clean.samples + m.scaled_noise.samples;
  return m;
}

double measured_snr_db(const Waveform& clean, const Waveform& noise) {
  check_same_shape(clean, noise, "measured_snr_db");
  return 20.0 * std::log10(rms(clean) / rms(noise));
}

}  // namespace sefft
