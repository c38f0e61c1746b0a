#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "sefft/metrics.hpp"

using namespace sefft;
namespace fs = std::filesystem;

namespace {

Waveform wave(Eigen::VectorXf samples) {
  Waveform w;
  w.samples = std::move(samples);
  return w;
}

Waveform gaussian(std::uint64_t seed, Index n, float sigma) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, sigma);
  Eigen::VectorXf x(n);
  for (auto& v : x) v = g(rng);
  return wave(x);
}

// Straightforward frame loop used as the reference.
double reference_ssnr(const Eigen::VectorXf& c, const Eigen::VectorXf& d) {
  double sum = 0.0;
  int frames = 0;
  for (Index s = 0; s + 512 <= c.size(); s += 256) {
    double num = 0.0, den = 0.0;
    for (Index i = s; i < s + 512; ++i) {
      num += double(c(i)) * double(c(i));
      den += (double(c(i)) - double(d(i))) * (double(c(i)) - double(d(i)));
    }
    if (num == 0.0) continue;
    double db = den == 0.0 ? 35.0 : 10.0 * std::log10(num / den);
    if (db > 35.0) db = 35.0;
    if (db < -10.0) db = -10.0;
    sum += db;
    ++frames;
  }
  return sum / frames;
}

}  // namespace

TEST_CASE("ssnr known values") {
  const auto clean = gaussian(1, 4096, 0.1f);
  CHECK(ssnr(clean, clean) == 35.0);

  const Waveform ten_db = wave(clean.samples + clean.samples / std::sqrt(10.0f));
  CHECK(ssnr(clean, ten_db) == doctest::Approx(10.0).epsilon(1e-5));

  const Waveform drowned = wave(clean.samples + gaussian(2, 4096, 100.0f).samples);
  CHECK(ssnr(clean, drowned) == -10.0);

  const Waveform silence = wave(Eigen::VectorXf::Zero(4096));
  CHECK(ssnr(clean, silence) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("ssnr agrees with a plain frame loop") {
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 512 + 97 * trial;
    const auto clean = gaussian(10 + trial, n, 0.1f);
    const auto noisy = wave(clean.samples + gaussian(40 + trial, n, 0.02f * (trial + 1)).samples);
    CHECK(ssnr(clean, noisy) == doctest::Approx(reference_ssnr(clean.samples, noisy.samples)).epsilon(1e-9));
  }
}

TEST_CASE("ssnr properties") {
  const auto clean = gaussian(3, 3000, 0.1f);
  const auto noisy = wave(clean.samples + gaussian(4, 3000, 0.05f).samples);

  SUBCASE("invariant to a common gain") {
    for (float g : {0.25f, 3.0f}) {
      CHECK(ssnr(wave(g * clean.samples), wave(g * noisy.samples)) == doctest::Approx(ssnr(clean, noisy)).epsilon(1e-6));
    }
  }
  SUBCASE("not symmetric") {
    const auto quiet = wave(0.2f * clean.samples);
    CHECK(ssnr(clean, quiet) != doctest::Approx(ssnr(quiet, clean)));
  }
  SUBCASE("silent clean frames are skipped") {
    Eigen::VectorXf padded = Eigen::VectorXf::Zero(3000 + 2048);
    padded.tail(3000) = clean.samples;
    Eigen::VectorXf padded_noisy = Eigen::VectorXf::Zero(3000 + 2048);
    padded_noisy.head(2048).setConstant(0.5f);
    padded_noisy.tail(3000) = noisy.samples;
    CHECK(ssnr(wave(padded), wave(padded_noisy)) ==
          doctest::Approx(reference_ssnr(padded, padded_noisy)).epsilon(1e-9));
  }
  SUBCASE("trailing partial frame is ignored") {
    Eigen::VectorXf c = clean.samples.head(1024 + 100);
    Eigen::VectorXf d = noisy.samples.head(1024 + 100);
    const double full = ssnr(wave(c), wave(d));
    d.tail(100).setConstant(5.0f);
    CHECK(ssnr(wave(c), wave(d)) == full);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(ssnr(clean, wave(noisy.samples.head(2999))), ConfigError);
    CHECK_THROWS_AS(ssnr(wave(clean.samples.head(511)), wave(noisy.samples.head(511))), ConfigError);
    CHECK_THROWS_AS(ssnr(wave(Eigen::VectorXf::Zero(1024)), wave(Eigen::VectorXf::Ones(1024))), DataError);
    SSNRConfig bad;
    bad.hop = 0;
    CHECK_THROWS_AS(ssnr(clean, noisy, bad), ConfigError);
    bad = {};
    bad.clamp_low = 40.0;
    CHECK_THROWS_AS(ssnr(clean, noisy, bad), ConfigError);
  }
}

TEST_CASE("snr gain and mae") {
  const auto clean = gaussian(5, 2048, 0.1f);
  const auto noisy = wave(clean.samples + gaussian(6, 2048, 0.1f).samples);
  CHECK(snr_gain(clean, noisy, noisy) == 0.0);
  CHECK(snr_gain(clean, noisy, clean) == doctest::Approx(35.0 - reference_ssnr(clean.samples, noisy.samples)));

  const Eigen::Vector4f a(0, 1, -1, 2), b(0, 0, 1, 2);
  CHECK(mean_absolute_error(wave(a), wave(b)) == doctest::Approx(0.75));
  CHECK_THROWS_AS(mean_absolute_error(wave(a), wave(b.head(3))), ConfigError);
}

TEST_CASE("report aggregation and csv") {
  std::vector<UtteranceMetrics> rows(2);
  rows[0] = {"utt0000", 1.0, 3.0, 2.0, 0.5};
  rows[1] = {"utt0001", 2.0, 6.0, 4.0, 0.25};
  const auto report = aggregate(rows);
  CHECK(report.mean.utterance == "MEAN");
  CHECK(report.mean.ssnr_noisy == 1.5);
  CHECK(report.mean.snr_gain_db == 3.0);
  CHECK(report.mean.mae == 0.375);
  CHECK(format_report_csv(report) ==
        "utterance,ssnr_noisy,ssnr_enhanced,snr_gain_db,mae\n"
        "utt0000,1.000000,3.000000,2.000000,0.50000000\n"
        "utt0001,2.000000,6.000000,4.000000,0.25000000\n"
        "MEAN,1.500000,4.500000,3.000000,0.37500000\n");
}

TEST_CASE("evaluate") {
  const auto dir = fs::temp_directory_path() / "sefft_test_metrics";
  fs::remove_all(dir);
  const auto corpus = write_synthetic_corpus(dir, 0, 2, 3000, 8);
  auto manifest = load_manifest(corpus.test_manifest);
  ModelConfig config;
  config.schedule = DilationSchedule({4, 2, 1});
  config.channels = 4;

  SUBCASE("rows match hand-assembled scoring") {
    const auto params = build<float>(config, 2);
    const auto report = evaluate(manifest, params, config);
    REQUIRE(report.utterances.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      const auto pair = realize(manifest.specs[i]);
      const auto out = forward(Tensor2<float>(Grid<float>(pair.noisy.samples)), params, config);
      const Eigen::VectorXf enhanced = out.value().col(0);
      const auto& row = report.utterances[i];
      CHECK(row.utterance == Manifest::utterance_id(i));
      CHECK(row.ssnr_noisy == doctest::Approx(reference_ssnr(pair.clean.samples, pair.noisy.samples)).epsilon(1e-9));
      CHECK(row.ssnr_enhanced == doctest::Approx(reference_ssnr(pair.clean.samples, enhanced)).epsilon(1e-9));
      CHECK(row.snr_gain_db == doctest::Approx(row.ssnr_enhanced - row.ssnr_noisy));
    }
    CHECK(report.mean.mae == doctest::Approx((report.utterances[0].mae + report.utterances[1].mae) / 2));
  }
  SUBCASE("duplicated lines give identical rows") {
    manifest.specs = {manifest.specs[0], manifest.specs[0]};
    const auto report = evaluate(manifest, build<float>(config, 3), config);
    CHECK(report.utterances[0].ssnr_enhanced == report.utterances[1].ssnr_enhanced);
    CHECK(report.mean.ssnr_enhanced == report.utterances[0].ssnr_enhanced);
  }
  SUBCASE("a silent model scores 0 dB") {
    const auto report = evaluate(manifest, ModelParams<float>::zeros(config), config);
    for (const auto& row : report.utterances) {
      CHECK(row.ssnr_enhanced == doctest::Approx(0.0).epsilon(1e-9));
    }
    const auto pair = realize(manifest.specs[0]);
    CHECK(report.utterances[0].mae == doctest::Approx(pair.clean.samples.cwiseAbs().cast<double>().mean()));
  }
  fs::remove_all(dir);
}
