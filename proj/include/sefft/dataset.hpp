#pragma once

// Noisy-mixture recipes, manifests and the synthetic desk-scale corpus.
//
// Manifest files are line oriented, one mixture per line:
//
//   clean_path <TAB> noise_path <TAB> snr_db <TAB> noise_offset <TAB> seed
//
// Blank lines and lines starting with '#' are ignored, except for an
// optional "# split: train" / "# split: test" directive. Relative paths are
// resolved against the manifest's directory.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sefft/audio.hpp"

namespace sefft {

inline constexpr double kTargetRms = 0.06;

enum class Split { Train, Test };

inline constexpr std::array<double, 4> kTrainSnrsDb = {0.0, 5.0, 10.0, 15.0};
inline constexpr std::array<double, 4> kTestSnrsDb = {2.5, 7.5, 12.5, 17.5};

std::span<const double> split_snrs(Split split);
std::string to_string(Split split);
Split parse_split(const std::string& name);

struct MixtureSpec {
  std::filesystem::path clean_path;
  std::filesystem::path noise_path;
  double snr_db = 0.0;
  // Start of the noise segment. Negative means "draw it from seed".
  std::int64_t noise_offset = 0;
  std::uint64_t seed = 0;

  bool operator==(const MixtureSpec&) const = default;
};

struct Manifest {
  Split split = Split::Train;
  std::vector<MixtureSpec> specs;

  /// Stable identifier used for file names and report rows: "utt0000", ...
  static std::string utterance_id(std::size_t index);

  bool operator==(const Manifest&) const = default;
};

Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir = {});
std::string format_manifest(const Manifest& manifest);
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Pairs every clean file with a randomly chosen noise file and an SNR drawn
/// from the split's SNR set. Noise offsets are left to each spec's seed.
Manifest make_manifest(std::span<const std::filesystem::path> clean, std::span<const std::filesystem::path> noise,
                       Split split, std::uint64_t seed);

/// Cuts `length` samples of noise starting at `offset`, wrapping around the
/// end of the noise if needed.
Waveform noise_segment(const Waveform& noise, std::int64_t offset, Eigen::Index length);

/// Resolves the noise offset a spec will use for a noise source of the
/// given length.
std::int64_t resolve_noise_offset(const MixtureSpec& spec, Eigen::Index noise_length);

struct RealizedPair {
  Waveform noisy;
  Waveform clean;
  double measured_snr_db = 0.0;  // before normalization
  double gain = 1.0;             // shared normalization gain applied to both
};

/// Mixes clean and noise at the requested SNR, then scales noisy and clean
/// by the one gain that brings the noisy mixture to kTargetRms.
RealizedPair realize(const Waveform& clean, const Waveform& noise, const MixtureSpec& spec);
RealizedPair realize(const MixtureSpec& spec);

// Synthetic corpus so that everything runs without licensed recordings.

/// Harmonic "voiced" signal: a gliding fundamental with a few decaying
/// harmonics under a syllable-rate amplitude envelope.
Waveform synth_speech(Eigen::Index length, std::uint64_t seed, int sample_rate = kDefaultSampleRate);

enum class NoiseColor { White, HighPass, Brown };

Waveform synth_noise(Eigen::Index length, NoiseColor color, std::uint64_t seed,
                     int sample_rate = kDefaultSampleRate);

struct SyntheticCorpus {
  std::vector<std::filesystem::path> clean;
  std::vector<std::filesystem::path> noise;
  std::filesystem::path train_manifest;
  std::filesystem::path test_manifest;
};

/// Writes clean/noise WAVs plus train and test manifests under `dir`.
SyntheticCorpus write_synthetic_corpus(const std::filesystem::path& dir, std::size_t train_utterances,
                                       std::size_t test_utterances, Eigen::Index utterance_length,
                                       std::uint64_t seed);

}  // namespace sefft
