#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sefft/audio.hpp"
#include "sefft/dataset.hpp"
#include "sefft/model.hpp"

namespace sefft {

/// Segmental SNR framing. Defaults: 32 ms frames with 50% overlap at 16 kHz,
/// per-frame SNR clamped to [-10, 35] dB.
struct SSNRConfig {
  Eigen::Index frame_length = 512;
  Eigen::Index hop = 256;
  double clamp_low = -10.0;
  double clamp_high = 35.0;

  void validate() const;
};

/// Mean over full frames of clamp(10 log10(sum clean^2 / sum (clean - degraded)^2)).
/// Frames with a silent clean reference are skipped. Argument order matters:
/// the reference comes first.
double ssnr(const Waveform& clean, const Waveform& degraded, const SSNRConfig& cfg = {});

/// ssnr(clean, enhanced) - ssnr(clean, noisy).
double snr_gain(const Waveform& clean, const Waveform& noisy, const Waveform& enhanced, const SSNRConfig& cfg = {});

/// Mean absolute sample error.
double mean_absolute_error(const Waveform& clean, const Waveform& degraded);

struct UtteranceMetrics {
  std::string utterance;
  double ssnr_noisy = 0.0;
  double ssnr_enhanced = 0.0;
  double snr_gain_db = 0.0;
  double mae = 0.0;
};

struct MetricsReport {
  std::vector<UtteranceMetrics> utterances;
  UtteranceMetrics mean;  // utterance == "MEAN"
};

/// Fills in `mean` as the arithmetic mean of the per-utterance rows.
MetricsReport aggregate(std::vector<UtteranceMetrics> rows);

/// CSV: header `utterance,ssnr_noisy,ssnr_enhanced,snr_gain_db,mae`, one row
/// per utterance, then a `MEAN` row.
std::string format_report_csv(const MetricsReport& report);

UtteranceMetrics score_utterance(std::string id, const Waveform& clean, const Waveform& noisy,
                                 const Waveform& enhanced, const SSNRConfig& cfg = {});

/// Runs the network over a whole waveform in one parallel pass.
Waveform enhance(const ModelParams<float>& params, const ModelConfig& config, const Waveform& input);

/// Realizes every pair in the manifest, enhances the noisy side and scores it.
MetricsReport evaluate(const Manifest& manifest, const ModelParams<float>& params, const ModelConfig& config,
                       const SSNRConfig& cfg = {});

}  // namespace sefft
