#include <doctest.h>

#include "sefft/run_config.hpp"

using namespace sefft;

TEST_CASE("schedules") {
  CHECK(parse_schedule("se-fftnet") == DilationSchedule::se_fftnet());
  CHECK(parse_schedule(" se-invfftnet ") == DilationSchedule::se_invfftnet());
  CHECK(parse_schedule("se-fftnet:3:2").dilations() == std::vector<Index>{4, 2, 1, 4, 2, 1});
  CHECK(parse_schedule("se-invfftnet:2:1").dilations() == std::vector<Index>{1, 2});
  CHECK(parse_schedule("8, 4,2 ,1").dilations() == std::vector<Index>{8, 4, 2, 1});
  CHECK(format_schedule(parse_schedule("8,4,2,1")) == "8,4,2,1");
  CHECK_THROWS_AS(parse_schedule("se-fftnet:3"), ConfigError);
  CHECK_THROWS_AS(parse_schedule("8,x"), ConfigError);
  CHECK_THROWS_AS(parse_schedule("8,0"), ConfigError);
  CHECK_THROWS_AS(parse_schedule(""), ConfigError);
  CHECK_THROWS_AS(parse_schedule("se-fftnetx"), ConfigError);
}

TEST_CASE("defaults") {
  const auto c = parse_run_config("");
  CHECK(c.model.schedule.size() == 30);
  CHECK(c.model.channels == 256);
  CHECK_FALSE(c.model.causal());
  CHECK(c.train.learning_rate == 0.001);
  CHECK(c.train.target_field == 4096);
  CHECK(c.train.batch_size == 1);
}

TEST_CASE("parsing key = value files") {
  const auto c = parse_run_config(
      "# tiny run\n"
      "schedule = 4,2,1\n"
      "channels=8   # inline comment\n"
      "causal = true\n"
      "\n"
      "learning_rate = 5e-4\n"
      "max_steps = 12\n"
      "seed = 99\n");
  CHECK(c.model.schedule.dilations() == std::vector<Index>{4, 2, 1});
  CHECK(c.model.channels == 8);
  CHECK(c.model.causal());
  CHECK(c.train.learning_rate == 5e-4);
  CHECK(c.train.max_steps == 12);
  CHECK(c.train.seed == 99);
}

TEST_CASE("round trip through the formatter") {
  auto c = parse_run_config("schedule = 2,1\nchannels = 3\nlearning_rate = 0.0123\nseed = 7\n");
  const auto again = parse_run_config(format_run_config(c));
  CHECK(format_run_config(again) == format_run_config(c));
  CHECK(again.train.learning_rate == c.train.learning_rate);
}

TEST_CASE("errors") {
  CHECK_THROWS_AS(parse_run_config("channel = 4\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("channels = 4\nchannels = 5\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("channels\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("channels = four\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("channels = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("causal = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("learning_rate = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("batch_size = 4\n"), ConfigError);
  try {
    parse_run_config("channels = 4\n\nbogus = 1\n");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
  try {
    parse_run_config("seed = 1\nnot a pair\n");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("overrides") {
  RunConfig c;
  apply_override(c, "channels=16");
  apply_override(c, " seed = 3 ");
  CHECK(c.model.channels == 16);
  CHECK(c.train.seed == 3);
  CHECK_THROWS_AS(apply_override(c, "channels"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "nope=1"), ConfigError);
}
