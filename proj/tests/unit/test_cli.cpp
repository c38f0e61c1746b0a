#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "sefft/audio.hpp"
#include "sefft/binary_io.hpp"
#include "sefft/dataset.hpp"

using namespace sefft;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

const fs::path& work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "sefft_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Outcome run(const std::string& args, const std::string& env = "") {
  const auto out = work_dir() / "stdout.txt";
  const auto err = work_dir() / "stderr.txt";
  const std::string cmd = env + " \"" SEFFT_CLI_PATH "\" " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = binary::read_file(out);
  o.err = binary::read_file(err);
  return o;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

fs::path write_text(const std::string& name, const std::string& text) {
  const auto p = work_dir() / name;
  binary::write_file(p, text);
  return p;
}

}  // namespace

TEST_CASE("inspect") {
  SUBCASE("canonical network") {
    const auto o = run("inspect --schedule se-fftnet");
    CHECK(o.code == 0);
    CHECK(contains(o.out, "r1=3069 r2=3069"));
    CHECK(contains(o.out, "blocks=30"));
    CHECK(contains(o.out, "params=7895809"));
    const auto inv = run("inspect --schedule se-invfftnet");
    CHECK(contains(inv.out, "r1=3069 r2=3069"));
    CHECK(contains(inv.out, "params=7895809"));
  }
  SUBCASE("smallest network") {
    const auto o = run("inspect --schedule 1 --channels 2");
    CHECK(o.code == 0);
    CHECK(contains(o.out, "r1=1 r2=1"));
    CHECK(contains(o.out, "params=31"));
  }
  SUBCASE("causal") {
    const auto o = run("inspect --schedule 4,2,1 --channels 2 --causal");
    CHECK(contains(o.out, "r1=7 r2=0"));
    CHECK(contains(o.out, "causality=causal"));
  }
  SUBCASE("from a config file") {
    const auto cfg = write_text("inspect.cfg", "schedule = 2,1\nchannels = 3\n");
    const auto o = run("inspect --config " + cfg.string());
    CHECK(o.code == 0);
    CHECK(contains(o.out, "r1=3 r2=3"));
  }
  SUBCASE("bad input") {
    CHECK(run("inspect --schedule 4,0").code == 1);
    CHECK(run("inspect --schedule 4,2 --channels 0").code == 1);
    CHECK(run("inspect").code == 1);
    CHECK(run("").code == 1);
    CHECK(run("no-such-command").code == 1);
  }
}

TEST_CASE("gradcheck") {
  const auto cfg = write_text("grad.cfg", "schedule = 2,1\nchannels = 3\n");
  const auto ok = run("gradcheck --config " + cfg.string() + " --trials 3");
  CHECK(ok.code == 0);
  CHECK(ok.out.rfind("PASS trials=3", 0) == 0);

  const auto broken = run("gradcheck --config " + cfg.string() + " --trials 3 --corrupt-backward");
  CHECK(broken.code == 2);
  CHECK(broken.out.rfind("FAIL", 0) == 0);

  CHECK(run("gradcheck --config " + cfg.string() + " --trials 0").code == 1);
  CHECK(run("gradcheck --config " + cfg.string() + " --tolerance -1").code == 1);
  CHECK(run("gradcheck --config " + (work_dir() / "missing.cfg").string()).code == 2);
}

TEST_CASE("synth, mix, train, enhance, eval") {
  const auto data = work_dir() / "data";
  REQUIRE(run("synth --out-dir " + data.string() + " --train 2 --test 2 --length 1200 --seed 4").code == 0);
  const auto train_manifest = data / "train.tsv";
  const auto test_manifest = data / "test.tsv";

  SUBCASE("mix writes a noisy and a clean file per line") {
    const auto out = work_dir() / "mixed";
    const auto o = run("mix --manifest " + test_manifest.string() + " --out-dir " + out.string());
    CHECK(o.code == 0);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(out)) files += e.path().extension() == ".wav";
    CHECK(files == 4);
    const auto noisy = read_wav(out / "utt0001_noisy.wav");
    const auto clean = read_wav(out / "utt0001_clean.wav");
    CHECK(noisy.size() == 1200);
    CHECK(clean.size() == 1200);
  }
  SUBCASE("bad manifest lines are reported with their number") {
    const auto bad = write_text("bad.tsv", binary::read_file(train_manifest) + "only\ttwo\n");
    const auto o = run("mix --manifest " + bad.string() + " --out-dir " + (work_dir() / "x").string());
    CHECK(o.code == 1);
    CHECK(contains(o.err, "manifest line"));
  }
  SUBCASE("missing audio is a runtime error") {
    const auto bad = write_text("missing.tsv", "nope.wav\tnope.wav\t5\t0\t0\n");
    CHECK(run("mix --manifest " + bad.string() + " --out-dir " + (work_dir() / "y").string()).code == 2);
  }
  SUBCASE("train then enhance and eval") {
    const auto cfg = write_text("train.cfg", "schedule = 4,2,1\nchannels = 4\nmax_steps = 5\ntarget_field = 512\n");
    const auto run_dir = work_dir() / "run";
    const auto t = run("train --manifest " + train_manifest.string() + " --config " + cfg.string() + " --out " +
                       run_dir.string());
    REQUIRE(t.code == 0);
    const auto ckpt = run_dir / "model.seff";
    CHECK(fs::exists(ckpt));
    CHECK(fs::exists(run_dir / "model.state"));

    const auto in = data / "clean0.wav";
    const auto a = work_dir() / "a.wav";
    const auto b = work_dir() / "b.wav";
    CHECK(run("enhance --checkpoint " + ckpt.string() + " --in " + in.string() + " --out " + a.string()).code == 0);
    CHECK(run("enhance --checkpoint " + ckpt.string() + " --in " + in.string() + " --out " + b.string()).code == 0);
    CHECK(read_wav(a).size() == read_wav(in).size());
    CHECK(binary::read_file(a) == binary::read_file(b));

    const auto report = work_dir() / "report.csv";
    CHECK(run("eval --manifest " + test_manifest.string() + " --checkpoint " + ckpt.string() + " --out " +
              report.string())
              .code == 0);
    const auto csv = binary::read_file(report);
    CHECK(csv.rfind("utterance,ssnr_noisy,ssnr_enhanced,snr_gain_db,mae\nutt0000,", 0) == 0);
    CHECK(contains(csv, "\nMEAN,"));

    CHECK(run("enhance --checkpoint " + (work_dir() / "train.cfg").string() + " --in " + in.string() + " --out " +
              a.string())
              .code == 2);
  }
  SUBCASE("config errors exit 1") {
    const auto cfg = write_text("typo.cfg", "schedule = 4,2,1\nchanels = 4\n");
    const auto o = run("train --manifest " + train_manifest.string() + " --config " + cfg.string() + " --out " +
                       (work_dir() / "z").string());
    CHECK(o.code == 1);
    CHECK(contains(o.err, "chanels"));
    CHECK(run("train --manifest " + train_manifest.string() + " --config " + cfg.string() + " --out z",
              "SEFFT_SEED=abc")
              .code == 1);
  }
}

TEST_CASE("seed precedence") {
  const auto data = work_dir() / "seeded";
  REQUIRE(run("synth --out-dir " + data.string() + " --train 1 --test 0 --length 800").code == 0);
  const auto cfg = write_text("seed.cfg", "schedule = 2,1\nchannels = 2\nmax_steps = 2\ntarget_field = 400\n");
  auto train_to = [&](const std::string& name, const std::string& extra, const std::string& env = "") {
    const auto dir = work_dir() / name;
    const auto o = run("train --manifest " + (data / "train.tsv").string() + " --config " + cfg.string() +
                           " --out " + dir.string() + " " + extra,
                       env);
    REQUIRE(o.code == 0);
    return binary::read_file(dir / "model.seff");
  };
  const auto env7 = train_to("env7", "", "SEFFT_SEED=7");
  CHECK(train_to("flag7", "--seed 7") == env7);
  CHECK(train_to("set7", "--set seed=7") == env7);
  CHECK(train_to("flag_wins", "--seed 7", "SEFFT_SEED=8") == env7);
  CHECK(train_to("env8", "", "SEFFT_SEED=8") != env7);
}
