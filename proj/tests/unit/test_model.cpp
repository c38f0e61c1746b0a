#include <doctest.h>

#include <random>

#include "sefft/gradcheck.hpp"
#include "sefft/model.hpp"

using namespace sefft;

namespace {

ModelConfig tiny(std::vector<Index> schedule, Index channels, Causality causality = Causality::NonCausal) {
  ModelConfig c;
  c.schedule = DilationSchedule(std::move(schedule));
  c.channels = channels;
  c.causality = causality;
  return c;
}

Tensor2<float> random_input(std::mt19937_64& rng, Index steps) {
  std::normal_distribution<float> gauss(0.0f, 0.3f);
  Tensor2<float> x(steps, 1);
  for (Index t = 0; t < steps; ++t) x.value()(t, 0) = gauss(rng);
  return x;
}

ModelParams<float> with_random_biases(ModelParams<float> p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> gauss(0.0f, 0.1f);
  p.for_each([&](Conv1x1Params<float>& c) {
    for (Index j = 0; j < c.bias.size(); ++j) c.bias(j) = gauss(rng);
  });
  return p;
}

// Brute-force parameter enumeration, independent of count_params.
std::int64_t enumerate_params(const ModelConfig& config) { return ModelParams<float>::zeros(config).size(); }

}  // namespace

TEST_CASE("dilation schedules") {
  const auto fft = DilationSchedule::se_fftnet();
  REQUIRE(fft.size() == 30);
  CHECK(fft[0] == 512);
  CHECK(fft[9] == 1);
  CHECK(fft[10] == 512);
  CHECK(fft.sum() == 3069);
  const auto inv = DilationSchedule::se_invfftnet();
  CHECK(inv[0] == 1);
  CHECK(inv[9] == 512);
  CHECK(inv.reversed() == fft);
  CHECK_THROWS_AS(DilationSchedule(std::vector<Index>{}), ConfigError);
  CHECK_THROWS_AS(DilationSchedule({2, 0}), ConfigError);
}

TEST_CASE("receptive field") {
  ModelConfig canonical;
  CHECK(receptive_field(canonical).past == 3069);
  CHECK(receptive_field(canonical).future == 3069);
  CHECK(receptive_field(tiny({1}, 4)).past == 1);
  CHECK(receptive_field(tiny({1}, 4)).future == 1);
  const auto causal = receptive_field(tiny({2, 1}, 4, Causality::Causal));
  CHECK(causal.past == 3);
  CHECK(causal.future == 0);
  CHECK(causal.margin() == 3);
}

TEST_CASE("parameter counting") {
  CHECK(count_params(tiny({1}, 2)) == 31);
  ModelConfig canonical;
  CHECK(count_params(canonical) == 7'895'809);
  ModelConfig inverted = canonical;
  inverted.schedule = DilationSchedule::se_invfftnet();
  CHECK(count_params(inverted) == count_params(canonical));

  SUBCASE("closed form agrees with enumeration") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<Index> schedule(1 + rng() % 6);
      for (auto& d : schedule) d = 1 + static_cast<Index>(rng() % 9);
      const Index c = 1 + static_cast<Index>(rng() % 9);
      const auto causality = rng() % 2 ? Causality::Causal : Causality::NonCausal;
      const auto config = tiny(schedule, c, causality);
      const std::int64_t blocks = static_cast<std::int64_t>(schedule.size());
      const std::int64_t per_block = causality == Causality::Causal ? 3 * c * c + 3 * c : 4 * c * c + 4 * c;
      CHECK(count_params(config) == 2 * c + blocks * per_block + c + 1);
      CHECK(count_params(config) == enumerate_params(config));
      CHECK(count_params(tiny(DilationSchedule(schedule).reversed().dilations(), c, causality)) ==
            count_params(config));
    }
  }
}

TEST_CASE("build is seeded and deterministic") {
  const auto config = tiny({1}, 2);
  const auto a = build<float>(config, 11);
  const auto b = build<float>(config, 11);
  const auto c = build<float>(config, 12);
  CHECK(a.size() == 31);
  bool same_ab = true, same_ac = true;
  std::vector<const Conv1x1Params<float>*> la, lb, lc;
  a.for_each([&](const Conv1x1Params<float>& p) { la.push_back(&p); });
  b.for_each([&](const Conv1x1Params<float>& p) { lb.push_back(&p); });
  c.for_each([&](const Conv1x1Params<float>& p) { lc.push_back(&p); });
  for (std::size_t i = 0; i < la.size(); ++i) {
    same_ab = same_ab && la[i]->weight == lb[i]->weight && la[i]->bias == lb[i]->bias;
    same_ac = same_ac && la[i]->weight == lc[i]->weight;
    CHECK(la[i]->bias.isZero());
    const float bound = 1.0f / std::sqrt(static_cast<float>(la[i]->in_channels()));
    CHECK(la[i]->weight.cwiseAbs().maxCoeff() <= bound);
  }
  CHECK(same_ab);
  CHECK_FALSE(same_ac);
}

TEST_CASE("block_forward") {
  SUBCASE("zero block is the identity") {
    std::mt19937_64 rng(1);
    Tensor2<float> x(Grid<float>::Random(9, 3));
    const auto p = BlockParams<float>::zeros(3, Causality::NonCausal);
    CHECK(block_forward(x, p, 2, Causality::NonCausal).value() == x.value());
  }
  SUBCASE("zero input and biases give zero") {
    auto p = build<float>(tiny({2}, 3), 5).blocks[0];
    CHECK(block_forward(Tensor2<float>(6, 3), p, 2, Causality::NonCausal).value().isZero());
  }
  SUBCASE("hand-evaluated scalar block") {
    auto p = BlockParams<double>::zeros(1, Causality::NonCausal);
    p.tap_past.weight(0, 0) = 0.5;
    p.tap_present.weight(0, 0) = 1.0;
    p.tap_present.bias(0) = 0.1;
    p.tap_future->weight(0, 0) = -0.25;
    p.post.weight(0, 0) = 2.0;
    p.post.bias(0) = -0.5;
    Grid<double> x(3, 1);
    x << 1.0, -2.0, 3.0;
    // sums: [1.6, -2.15, 2.1] -> hidden [1.6, 0, 2.1] -> post [2.7, -0.5, 3.7]
    const auto out = block_forward(Tensor2<double>(x), p, 1, Causality::NonCausal);
    CHECK(out.value()(0, 0) == doctest::Approx(3.7));
    CHECK(out.value()(1, 0) == doctest::Approx(-2.0));
    CHECK(out.value()(2, 0) == doctest::Approx(6.7));
  }
  SUBCASE("width mismatch") {
    const auto p = BlockParams<float>::zeros(3, Causality::NonCausal);
    CHECK_THROWS_AS(block_forward(Tensor2<float>(4, 2), p, 1, Causality::NonCausal), ConfigError);
  }
}

TEST_CASE("forward shape and bias contracts") {
  const auto config = tiny({4, 2, 1}, 4);
  auto params = build<float>(config, 3);
  std::mt19937_64 rng(3);
  const auto short_input = random_input(rng, 5);  // shorter than the 15-sample window
  const auto out = forward(short_input, params, config);
  CHECK(out.steps() == 5);
  CHECK(out.channels() == 1);

  auto zero = ModelParams<float>::zeros(config);
  zero.final_fc.bias(0) = 0.25f;
  const auto constant = forward(random_input(rng, 20), zero, config);
  CHECK((constant.value().array() == 0.25f).all());

  CHECK_THROWS_AS(forward(Tensor2<float>(5, 2), params, config), ConfigError);
  CHECK_THROWS_AS(forward(short_input, params, tiny({4, 2}, 4)), ConfigError);
}

TEST_CASE("outputs never depend on inputs outside the receptive window") {
  for (auto causality : {Causality::NonCausal, Causality::Causal}) {
    const auto config = tiny({2, 1}, 4, causality);
    const auto field = receptive_field(config);
    const auto params = with_random_biases(build<float>(config, 21), 22);
    std::mt19937_64 rng(23);
    const Index steps = 16;
    const auto x = random_input(rng, steps);
    const auto base = forward(x, params, config);
    for (Index u = 0; u < steps; ++u) {
      auto moved = x;
      moved.value()(u, 0) += 0.7f;
      const auto out = forward(moved, params, config);
      for (Index t = 0; t < steps; ++t) {
        const bool inside = u >= t - field.past && u <= t + field.future;
        if (!inside) CHECK(out.value()(t, 0) == base.value()(t, 0));
      }
    }
  }
}

TEST_CASE("receptive field is exact: every sample inside the window matters") {
  // Positive weights and inputs keep every ReLU open, so any input increase
  // reaches every output it is connected to.
  for (auto causality : {Causality::NonCausal, Causality::Causal}) {
    const auto config = tiny({4, 2, 1}, 4, causality);
    const auto field = receptive_field(config);
    auto params = build<double>(config, 31);
    params.for_each([](Conv1x1Params<double>& c) { c.weight = c.weight.cwiseAbs().array() + 0.05; });
    const Index steps = 24;
    Tensor2<double> x(Grid<double>::Constant(steps, 1, 0.5));
    const auto base = forward(x, params, config);
    for (Index u = 0; u < steps; ++u) {
      auto moved = x;
      moved.value()(u, 0) += 1.0;
      const auto out = forward(moved, params, config);
      for (Index t = 0; t < steps; ++t) {
        const bool inside = u >= t - field.past && u <= t + field.future;
        CHECK((out.value()(t, 0) != base.value()(t, 0)) == inside);
      }
    }
  }
}

TEST_CASE("time-shift equivariance away from the edges") {
  const auto config = tiny({4, 2, 1}, 4);
  const auto field = receptive_field(config);
  const auto params = with_random_biases(build<float>(config, 41), 42);
  std::mt19937_64 rng(43);
  const Index steps = 64, shift = 5;
  const auto x = random_input(rng, steps);
  Tensor2<float> shifted(steps, 1);
  shifted.value().bottomRows(steps - shift) = x.value().topRows(steps - shift);
  const auto a = forward(x, params, config);
  const auto b = forward(shifted, params, config);
  for (Index t = field.past; t + field.future + shift < steps; ++t) CHECK(b.value()(t + shift, 0) == a.value()(t, 0));
}

TEST_CASE("end-to-end gradient matches finite differences") {
  SUBCASE("double precision") {
    GradcheckOptions options;
    options.trials = 20;
    options.seed = 5;
    for (auto causality : {Causality::NonCausal, Causality::Causal}) {
      const auto report = gradcheck<double>(tiny({2, 1}, 3, causality), options);
      INFO("max rel error " << report.max_relative_error << " skipped " << report.skipped_kinks);
      CHECK(report.passed);
      CHECK(report.checked > report.skipped_kinks);
    }
  }
  SUBCASE("single precision") {
    GradcheckOptions options;
    options.trials = 20;
    options.step = 1e-2;
    options.tolerance = 1e-2;
    options.scale_floor = 1e-3;
    const auto report = gradcheck<float>(tiny({2, 1}, 3), options);
    INFO("max rel error " << report.max_relative_error << " skipped " << report.skipped_kinks);
    CHECK(report.passed);
  }
}

TEST_CASE("parameter store checks") {
  const auto config = tiny({2, 1}, 4);
  auto params = build<float>(config, 1);
  CHECK_NOTHROW(params.check(config));
  CHECK_THROWS_AS(params.check(tiny({2, 1}, 4, Causality::Causal)), ConfigError);
  CHECK_THROWS_AS(params.check(tiny({2}, 4)), ConfigError);
  CHECK_THROWS_AS(params.check(tiny({2, 1}, 5)), ConfigError);
}
