#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <string>

#include "sefft/errors.hpp"

namespace sefft {

inline constexpr int kDefaultSampleRate = 16000;

/// Mono sample buffer. Samples are nominally in [-1, 1] but mixing may
/// push them outside; nothing here clips except write_wav.
struct Waveform {
  Eigen::VectorXf samples;
  int sample_rate = kDefaultSampleRate;

  Eigen::Index size() const { return samples.size(); }

  /// Non-empty, positive rate, finite samples.
  void validate() const;
};

// 16-bit PCM mono RIFF/WAVE. Integer n maps to n / 32768; writing rounds
// half away from zero and clamps to [-32768, 32767].
Waveform decode_wav(const std::string& bytes);
std::string encode_wav(const Waveform& w);
Waveform read_wav(const std::filesystem::path& path);
void write_wav(const Waveform& w, const std::filesystem::path& path);

double rms(const Waveform& w);

/// Returns w scaled so that rms() == target. Throws DataError on silence.
Waveform normalize_rms(const Waveform& w, double target);

/// Gain that would bring w to the target RMS.
double rms_gain(const Waveform& w, double target);

Waveform scaled(const Waveform& w, double gain);

struct Mixture {
  Waveform noisy;
  Waveform scaled_noise;
  double noise_gain = 1.0;
};

/// noisy = clean + g * noise, g = (rms(clean) / rms(noise)) * 10^(-snr_db / 20).
Mixture mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db);

/// 20 log10(rms(clean) / rms(noise)).
double measured_snr_db(const Waveform& clean, const Waveform& noise);

}  // namespace sefft
