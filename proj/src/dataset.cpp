#include "sefft/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

#include "sefft/binary_io.hpp"

namespace sefft {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& text, const char* what) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError(std::string("bad ") + what + " '" + text + "'");
  return value;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::span<const double> split_snrs(Split split) {
  return split == Split::Train ? std::span<const double>(kTrainSnrsDb) : std::span<const double>(kTestSnrsDb);
}

std::string to_string(Split split) { return split == Split::Train ? "train" : "test"; }

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "test") return Split::Test;
  throw ConfigError("unknown split '" + name + "' (expected train or test)");
}

std::string Manifest::utterance_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "utt%04zu", index);
  return buf;
}

Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir) {
  Manifest m;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto stripped = trim(line);
    if (stripped.empty()) continue;
    if (stripped.front() == '#') {
      const auto body = trim(stripped.substr(1));
      if (body.rfind("split:", 0) == 0) {
        try {
          m.split = parse_split(trim(body.substr(6)));
        } catch (const ConfigError& e) {
          throw ConfigError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
      }
      continue;
    }
    try {
      const auto fields = split_tabs(line);
      if (fields.size() != 5)
        throw ConfigError("expected 5 tab-separated fields, found " + std::to_string(fields.size()));
      MixtureSpec spec;
      spec.clean_path = fields[0];
      spec.noise_path = fields[1];
      if (spec.clean_path.empty() || spec.noise_path.empty()) throw ConfigError("empty path");
      if (spec.clean_path.is_relative() && !base_dir.empty()) spec.clean_path = base_dir / spec.clean_path;
      if (spec.noise_path.is_relative() && !base_dir.empty()) spec.noise_path = base_dir / spec.noise_path;
      spec.snr_db = parse_number<double>(trim(fields[2]), "snr_db");
      if (!std::isfinite(spec.snr_db)) throw ConfigError("snr_db must be finite");
      spec.noise_offset = parse_number<std::int64_t>(trim(fields[3]), "noise_offset");
      spec.seed = parse_number<std::uint64_t>(trim(fields[4]), "seed");
      m.specs.push_back(std::move(spec));
    } catch (const ConfigError& e) {
      throw ConfigError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return m;
}

std::string format_manifest(const Manifest& manifest) {
  std::string out = "# split: " + to_string(manifest.split) + "\n";
  for (const auto& s : manifest.specs) {
    out += s.clean_path.generic_string() + '\t' + s.noise_path.generic_string() + '\t' + format_double(s.snr_db) +
           '\t' + std::to_string(s.noise_offset) + '\t' + std::to_string(s.seed) + '\n';
  }
  return out;
}

Manifest load_manifest(const std::filesystem::path& path) {
  try {
    return parse_manifest(binary::read_file(path), path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  binary::write_file(path, format_manifest(manifest));
}

Manifest make_manifest(std::span<const std::filesystem::path> clean, std::span<const std::filesystem::path> noise,
                       Split split, std::uint64_t seed) {
  if (clean.empty() || noise.empty()) throw ConfigError("make_manifest needs at least one clean and one noise file");
  Manifest m;
  m.split = split;
  const auto snrs = split_snrs(split);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_noise(0, noise.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_snr(0, snrs.size() - 1);
  for (const auto& c : clean) {
    MixtureSpec s;
    s.clean_path = c;
    s.noise_path = noise[pick_noise(rng)];
    s.snr_db = snrs[pick_snr(rng)];
    s.noise_offset = -1;
    s.seed = rng();
    m.specs.push_back(std::move(s));
  }
  return m;
}

std::int64_t resolve_noise_offset(const MixtureSpec& spec, Eigen::Index noise_length) {
  if (noise_length < 1) throw DataError("noise source is empty");
  if (spec.noise_offset >= 0) return spec.noise_offset % noise_length;
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<std::int64_t> dist(0, noise_length - 1);
  return dist(rng);
}

Waveform noise_segment(const Waveform& noise, std::int64_t offset, Eigen::Index length) {
  noise.validate();
  if (length < 1) throw ConfigError("segment length must be >= 1");
  if (offset < 0) throw ConfigError("noise offset must be >= 0");
  Waveform out;
  out.sample_rate = noise.sample_rate;
  out.samples.resize(length);
  const Eigen::Index n = noise.size();
  Eigen::Index pos = static_cast<Eigen::Index>(offset % n);
  for (Eigen::Index i = 0; i < length; ++i) {
    out.samples[i] = noise.samples[pos];
    if (++pos == n) pos = 0;
  }
  return out;
}

RealizedPair realize(const Waveform& clean, const Waveform& noise, const MixtureSpec& spec) {
  clean.validate();
  noise.validate();
  if (clean.sample_rate != noise.sample_rate)
    throw DataError("clean and noise sample rates differ (" + std::to_string(clean.sample_rate) + " vs " +
                    std::to_string(noise.sample_rate) + ")");
  const auto segment = noise_segment(noise, resolve_noise_offset(spec, noise.size()), clean.size());
  const auto mix = mix_at_snr(clean, segment, spec.snr_db);

  RealizedPair pair;
  pair.measured_snr_db = measured_snr_db(clean, mix.scaled_noise);
  pair.gain = rms_gain(mix.noisy, kTargetRms);
  pair.noisy = scaled(mix.noisy, pair.gain);
  pair.clean = scaled(clean, pair.gain);
  return pair;
}

RealizedPair realize(const MixtureSpec& spec) {
  return realize(read_wav(spec.clean_path), read_wav(spec.noise_path), spec);
}

Waveform synth_speech(Eigen::Index length, std::uint64_t seed, int sample_rate) {
  if (length < 1) throw ConfigError("length must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double fs = sample_rate;
  const double f0_start = 100.0 + 80.0 * unit(rng);
  const double f0_end = 100.0 + 120.0 * unit(rng);
  const double syllable_rate = 3.0 + 2.0 * unit(rng);
  const int harmonics = 6;
  std::vector<double> amp(harmonics), phase0(harmonics);
  for (int h = 0; h < harmonics; ++h) {
    amp[h] = std::pow(0.7, h) * (0.6 + 0.4 * unit(rng));
    phase0[h] = 2.0 * std::numbers::pi * unit(rng);
  }
  const double env_phase = 2.0 * std::numbers::pi * unit(rng);

  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(length);
  double phase = 0.0;
  for (Eigen::Index t = 0; t < length; ++t) {
    const double frac = length > 1 ? static_cast<double>(t) / static_cast<double>(length - 1) : 0.0;
    const double f0 = f0_start + (f0_end - f0_start) * frac;
    phase += 2.0 * std::numbers::pi * f0 / fs;
    double v = 0.0;
    for (int h = 0; h < harmonics; ++h) v += amp[h] * std::sin((h + 1) * phase + phase0[h]);
    const double env = 0.55 + 0.45 * std::sin(2.0 * std::numbers::pi * syllable_rate * t / fs + env_phase);
    w.samples[t] = static_cast<float>(0.25 * env * v);
  }
  return w;
}

Waveform synth_noise(Eigen::Index length, NoiseColor color, std::uint64_t seed, int sample_rate) {
  if (length < 1) throw ConfigError("length must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(length);
  double prev_in = 0.0, state = 0.0;
  for (Eigen::Index t = 0; t < length; ++t) {
    const double e = gauss(rng);
    double v = e;
    switch (color) {
      case NoiseColor::White:
        break;
      case NoiseColor::HighPass:
        // First difference: +6 dB/octave tilt, null at DC.
        v = 0.5 * (e - prev_in);
        break;
      case NoiseColor::Brown:
        state = 0.98 * state + 0.2 * e;
        v = state;
        break;
    }
    prev_in = e;
    w.samples[t] = static_cast<float>(0.1 * v);
  }
  return w;
}

SyntheticCorpus write_synthetic_corpus(const std::filesystem::path& dir, std::size_t train_utterances,
                                       std::size_t test_utterances, Eigen::Index utterance_length,
                                       std::uint64_t seed) {
  if (train_utterances + test_utterances == 0) throw ConfigError("corpus needs at least one utterance");
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(seed);
  SyntheticCorpus corpus;

  const NoiseColor colors[] = {NoiseColor::White, NoiseColor::HighPass, NoiseColor::Brown};
  for (std::size_t i = 0; i < std::size(colors); ++i) {
    const auto path = dir / ("noise" + std::to_string(i) + ".wav");
    write_wav(synth_noise(utterance_length * 3, colors[i], rng()), path);
    corpus.noise.push_back(path);
  }
  std::vector<std::filesystem::path> train, test;
  for (std::size_t i = 0; i < train_utterances + test_utterances; ++i) {
    const auto path = dir / ("clean" + std::to_string(i) + ".wav");
    write_wav(synth_speech(utterance_length, rng()), path);
    corpus.clean.push_back(path);
    (i < train_utterances ? train : test).push_back(path.filename());
  }

  std::vector<std::filesystem::path> noise_names;
  for (const auto& p : corpus.noise) noise_names.push_back(p.filename());
  corpus.train_manifest = dir / "train.tsv";
  corpus.test_manifest = dir / "test.tsv";
  const auto train_seed = rng();
  const auto test_seed = rng();
  if (!train.empty()) save_manifest(make_manifest(train, noise_names, Split::Train, train_seed), corpus.train_manifest);
  if (!test.empty()) save_manifest(make_manifest(test, noise_names, Split::Test, test_seed), corpus.test_manifest);
  return corpus;
}

}  // namespace sefft
