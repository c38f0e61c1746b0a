#include "sefft/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace sefft {

void SSNRConfig::validate() const {
  if (frame_length < 1 || hop < 1 || hop > frame_length) throw ConfigError("ssnr: need 0 < hop <= frame_length");
  if (!(clamp_low < clamp_high)) throw ConfigError("ssnr: clamp_low must be below clamp_high");
}

double ssnr(const Waveform& clean, const Waveform& degraded, const SSNRConfig& cfg) {
  cfg.validate();
  if (clean.size() != degraded.size()) throw ConfigError("ssnr: length mismatch");
  if (clean.size() < cfg.frame_length) throw ConfigError("ssnr: signal shorter than one frame");

  double total = 0.0;
  std::size_t frames = 0;
  for (Eigen::Index start = 0; start + cfg.frame_length <= clean.size(); start += cfg.hop) {
    const auto c = clean.samples.segment(start, cfg.frame_length).cast<double>();
    const auto d = degraded.samples.segment(start, cfg.frame_length).cast<double>();
    const double signal = c.squaredNorm();
    if (signal == 0.0) continue;
    const double error = (c - d).squaredNorm();
    const double db = error == 0.0 ? cfg.clamp_high : 10.0 * std::log10(signal / error);
    total += std::clamp(db, cfg.clamp_low, cfg.clamp_high);
    ++frames;
  }
  if (frames == 0) throw DataError("ssnr: every frame of the clean reference is silent");
  return total / static_cast<double>(frames);
}

double snr_gain(const Waveform& clean, const Waveform& noisy, const Waveform& enhanced, const SSNRConfig& cfg) {
  return ssnr(clean, enhanced, cfg) - ssnr(clean, noisy, cfg);
}

double mean_absolute_error(const Waveform& clean, const Waveform& degraded) {
  if (clean.size() != degraded.size()) throw ConfigError("mae: length mismatch");
  if (clean.size() == 0) throw ConfigError("mae: empty signal");
  return (clean.samples.cast<double>() - degraded.samples.cast<double>()).cwiseAbs().mean();
}

MetricsReport aggregate(std::vector<UtteranceMetrics> rows) {
  MetricsReport report;
  report.utterances = std::move(rows);
  report.mean.utterance = "MEAN";
  if (report.utterances.empty()) return report;
  for (const auto& r : report.utterances) {
    report.mean.ssnr_noisy += r.ssnr_noisy;
    report.mean.ssnr_enhanced += r.ssnr_enhanced;
    report.mean.snr_gain_db += r.snr_gain_db;
    report.mean.mae += r.mae;
  }
  const double n = static_cast<double>(report.utterances.size());
  report.mean.ssnr_noisy /= n;
  report.mean.ssnr_enhanced /= n;
  report.mean.snr_gain_db /= n;
  report.mean.mae /= n;
  return report;
}

std::string format_report_csv(const MetricsReport& report) {
  std::string out = "utterance,ssnr_noisy,ssnr_enhanced,snr_gain_db,mae\n";
  auto row = [&](const UtteranceMetrics& m) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.8f\n", m.utterance.c_str(), m.ssnr_noisy, m.ssnr_enhanced,
                  m.snr_gain_db, m.mae);
    out += buf;
  };
  for (const auto& m : report.utterances) row(m);
  row(report.mean);
  return out;
}

UtteranceMetrics score_utterance(std::string id, const Waveform& clean, const Waveform& noisy,
                                 const Waveform& enhanced, const SSNRConfig& cfg) {
  UtteranceMetrics m;
  m.utterance = std::move(id);
  m.ssnr_noisy = ssnr(clean, noisy, cfg);
  m.ssnr_enhanced = ssnr(clean, enhanced, cfg);
  m.snr_gain_db = m.ssnr_enhanced - m.ssnr_noisy;
  m.mae = mean_absolute_error(clean, enhanced);
  return m;
}

Waveform enhance(const ModelParams<float>& params, const ModelConfig& config, const Waveform& input) {
  input.validate();
  Tensor2<float> x(Grid<float>(input.samples));
  const auto y = forward(x, params, config);
  Waveform out;
  out.sample_rate = input.sample_rate;
  out.samples = y.value().col(0);
  return out;
}

MetricsReport evaluate(const Manifest& manifest, const ModelParams<float>& params, const ModelConfig& config,
                       const SSNRConfig& cfg) {
  std::vector<UtteranceMetrics> rows;
  for (std::size_t i = 0; i < manifest.specs.size(); ++i) {
    const auto pair = realize(manifest.specs[i]);
    const auto enhanced = enhance(params, config, pair.noisy);
    rows.push_back(score_utterance(Manifest::utterance_id(i), pair.clean, pair.noisy, enhanced, cfg));
  }
  return aggregate(std::move(rows));
}

}  // namespace sefft
