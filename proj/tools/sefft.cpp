// sefft: command-line front end for the SE-FFTNet speech enhancer.
//
//   sefft synth     --out-dir DIR [--train N] [--test N] [--length L] [--seed S]
//   sefft mix       --manifest FILE --out-dir DIR [--seed S]
//   sefft train     --manifest FILE --config FILE --out DIR [--resume CKPT] [--seed S] [--set key=value]...
//   sefft enhance   --checkpoint CKPT --in IN.wav --out OUT.wav [--rms R]
//   sefft eval      --manifest FILE --checkpoint CKPT --out REPORT.csv
//   sefft inspect   --config FILE | --checkpoint CKPT | --schedule S [--channels C] [--causal]
//   sefft gradcheck --config FILE [--trials N] [--seed S]
//   sefft compare   --train-manifest FILE --test-manifest FILE --config FILE --out-dir DIR
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime or data error.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sefft/binary_io.hpp"
#include "sefft/checkpoint.hpp"
#include "sefft/dataset.hpp"
#include "sefft/experiment.hpp"
#include "sefft/gradcheck.hpp"
#include "sefft/metrics.hpp"
#include "sefft/run_config.hpp"
#include "sefft/trainer.hpp"

namespace fs = std::filesystem;
using namespace sefft;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("SEFFT_SEED")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("SEFFT_SEED is not an unsigned integer: '") + env + "'");
  }
  return 0;
}

RunConfig run_config_with_overrides(const std::string& path, const std::optional<std::uint64_t>& seed,
                                    const std::vector<std::string>& overrides) {
  RunConfig config;
  config.train.seed = default_seed();
  if (!path.empty()) {
    const auto text = binary::read_file(path);
    for (const auto& [key, value] : parse_key_values(text)) apply_setting(config, key, value);
  }
  for (const auto& o : overrides) apply_override(config, o);
  if (seed) config.train.seed = *seed;
  config.model.validate();
  config.train.validate();
  return config;
}

void print_inspection(const ModelConfig& config) {
  const auto field = receptive_field(config);
  std::cout << "schedule=" << format_schedule(config.schedule) << '\n'
            << "blocks=" << config.schedule.size() << '\n'
            << "channels=" << config.channels << '\n'
            << "causality=" << (config.causal() ? "causal" : "non-causal") << '\n'
            << "r1=" << field.past << " r2=" << field.future << '\n'
            << "window=" << field.past + 1 + field.future << '\n'
            << "params=" << count_params(config) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SE-FFTNet waveform-domain speech enhancement"};
  app.require_subcommand(1);
  std::function<int()> action;

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic clean/noise corpus with train and test manifests");
  struct {
    std::string out_dir;
    std::size_t train = 8, test = 4;
    long length = 16000;
    std::optional<std::uint64_t> seed;
  } synth_args;
  synth->add_option("--out-dir", synth_args.out_dir)->required();
  synth->add_option("--train", synth_args.train, "Training utterances");
  synth->add_option("--test", synth_args.test, "Test utterances");
  synth->add_option("--length", synth_args.length, "Samples per utterance")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_args.seed);
  synth->callback([&] {
    action = [&] {
      const auto corpus = write_synthetic_corpus(synth_args.out_dir, synth_args.train, synth_args.test,
                                                 synth_args.length, synth_args.seed.value_or(default_seed()));
      std::cout << "wrote " << corpus.clean.size() << " clean and " << corpus.noise.size() << " noise files to "
                << synth_args.out_dir << '\n';
      return 0;
    };
  });

  // mix
  auto* mix = app.add_subcommand("mix", "Realize a manifest into <id>_noisy.wav / <id>_clean.wav pairs");
  struct {
    std::string manifest, out_dir;
    std::optional<std::uint64_t> seed;
  } mix_args;
  mix->add_option("--manifest", mix_args.manifest)->required();
  mix->add_option("--out-dir", mix_args.out_dir)->required();
  mix->add_option("--seed", mix_args.seed, "Mixed into each line's seed (affects random noise offsets only)");
  mix->callback([&] {
    action = [&] {
      auto manifest = load_manifest(mix_args.manifest);
      const auto seed = mix_args.seed.value_or(default_seed());
      fs::create_directories(mix_args.out_dir);
      for (std::size_t i = 0; i < manifest.specs.size(); ++i) {
        auto spec = manifest.specs[i];
        spec.seed ^= seed;
        const auto pair = realize(spec);
        const auto id = Manifest::utterance_id(i);
        write_wav(pair.noisy, fs::path(mix_args.out_dir) / (id + "_noisy.wav"));
        write_wav(pair.clean, fs::path(mix_args.out_dir) / (id + "_clean.wav"));
      }
      std::cout << "realized " << manifest.specs.size() << " mixtures\n";
      return 0;
    };
  });

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model on a manifest");
  struct {
    std::string manifest, config, out, resume;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
  } train_args;
  train_cmd->add_option("--manifest", train_args.manifest)->required();
  train_cmd->add_option("--config", train_args.config)->required();
  train_cmd->add_option("--out", train_args.out)->required();
  train_cmd->add_option("--resume", train_args.resume, "Checkpoint to continue from (its .state file must exist)");
  train_cmd->add_option("--seed", train_args.seed);
  train_cmd->add_option("--set", train_args.overrides, "Override a config key: key=value");
  train_cmd->callback([&] {
    action = [&] {
      const auto config = run_config_with_overrides(train_args.config, train_args.seed, train_args.overrides);
      const auto manifest = load_manifest(train_args.manifest);
      const auto result = train(config.model, manifest, config.train, train_args.out, train_args.resume);
      if (!result.log.empty())
        std::cout << "step " << result.log.back().step << " loss " << result.log.back().loss << '\n';
      std::cout << "checkpoint " << result.final_checkpoint.string() << '\n';
      return 0;
    };
  });

  // enhance
  auto* enhance_cmd = app.add_subcommand("enhance", "Enhance a noisy WAV file");
  struct {
    std::string checkpoint, in, out;
    double rms = kTargetRms;
  } enhance_args;
  enhance_cmd->add_option("--checkpoint", enhance_args.checkpoint)->required();
  enhance_cmd->add_option("--in", enhance_args.in)->required();
  enhance_cmd->add_option("--out", enhance_args.out)->required();
  enhance_cmd->add_option("--rms", enhance_args.rms,
                          "Normalize the input to this RMS before the network and undo the gain after; 0 disables")
      ->check(CLI::NonNegativeNumber);
  enhance_cmd->callback([&] {
    action = [&] {
      const auto ck = load_checkpoint(enhance_args.checkpoint);
      const auto input = read_wav(enhance_args.in);
      const double gain = enhance_args.rms > 0.0 ? rms_gain(input, enhance_args.rms) : 1.0;
      auto out = enhance(ck.params, ck.config, gain == 1.0 ? input : scaled(input, gain));
      if (gain != 1.0) out = scaled(out, 1.0 / gain);
      write_wav(out, enhance_args.out);
      return 0;
    };
  });

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a test manifest");
  struct {
    std::string manifest, checkpoint, out;
  } eval_args;
  eval_cmd->add_option("--manifest", eval_args.manifest)->required();
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint)->required();
  eval_cmd->add_option("--out", eval_args.out, "Report CSV (stdout if omitted)");
  eval_cmd->callback([&] {
    action = [&] {
      const auto ck = load_checkpoint(eval_args.checkpoint);
      const auto report = evaluate(load_manifest(eval_args.manifest), ck.params, ck.config);
      const auto csv = format_report_csv(report);
      if (eval_args.out.empty())
        std::cout << csv;
      else
        binary::write_file(eval_args.out, csv);
      return 0;
    };
  });

  // inspect
  auto* inspect = app.add_subcommand("inspect", "Print schedule, receptive field and parameter count");
  struct {
    std::string config, checkpoint, schedule;
    long channels = 256;
    bool causal = false;
  } inspect_args;
  auto* inspect_config = inspect->add_option("--config", inspect_args.config);
  auto* inspect_ckpt = inspect->add_option("--checkpoint", inspect_args.checkpoint);
  auto* inspect_sched = inspect->add_option("--schedule", inspect_args.schedule, "se-fftnet, se-invfftnet or 4,2,1");
  inspect->add_option("--channels", inspect_args.channels)->needs(inspect_sched);
  inspect->add_flag("--causal", inspect_args.causal)->needs(inspect_sched);
  inspect_config->excludes(inspect_ckpt)->excludes(inspect_sched);
  inspect_ckpt->excludes(inspect_sched);
  inspect->callback([&] {
    action = [&] {
      ModelConfig config;
      if (!inspect_args.checkpoint.empty()) {
        config = load_checkpoint(inspect_args.checkpoint).config;
      } else if (!inspect_args.config.empty()) {
        config = load_run_config(inspect_args.config).model;
      } else if (!inspect_args.schedule.empty()) {
        config.schedule = parse_schedule(inspect_args.schedule);
        config.channels = inspect_args.channels;
        config.causality = inspect_args.causal ? Causality::Causal : Causality::NonCausal;
      } else {
        throw CLI::RequiredError("one of --config, --checkpoint or --schedule");
      }
      print_inspection(config);
      return 0;
    };
  });

  // gradcheck
  auto* grad = app.add_subcommand("gradcheck", "Compare analytic gradients with central finite differences");
  struct {
    std::string config;
    std::size_t trials = 100;
    std::optional<std::uint64_t> seed;
    double tolerance = 1e-5;
    double step = 1e-4;
    bool corrupt = false;
  } grad_args;
  grad->add_option("--config", grad_args.config)->required();
  grad->add_option("--trials", grad_args.trials);
  grad->add_option("--seed", grad_args.seed);
  grad->add_option("--tolerance", grad_args.tolerance)->check(CLI::PositiveNumber);
  grad->add_option("--step", grad_args.step)->check(CLI::PositiveNumber);
  grad->add_flag("--corrupt-backward", grad_args.corrupt, "Negative control: drop the ReLU mask in backward")
      ->group("");
  grad->callback([&] {
    action = [&] {
      if (grad_args.trials == 0) throw ConfigError("--trials must be >= 1");
      const auto config = load_run_config(grad_args.config);
      GradcheckOptions options;
      options.trials = grad_args.trials;
      options.seed = grad_args.seed.value_or(default_seed());
      options.tolerance = grad_args.tolerance;
      options.step = grad_args.step;
      testing::relu_backward_fault() = grad_args.corrupt;
      const auto report = gradcheck<double>(config.model, options);
      testing::relu_backward_fault() = false;
      std::cout << (report.passed ? "PASS" : "FAIL") << " trials=" << report.trials << " checked=" << report.checked
                << " skipped_kinks=" << report.skipped_kinks << " max_rel_error=" << report.max_relative_error
                << " tolerance=" << options.tolerance << '\n';
      return report.passed ? 0 : kExitRuntime;
    };
  });

  // compare
  auto* compare = app.add_subcommand("compare", "Train SE-FFTNet and SE-InvFFTNet on the same data and compare");
  struct {
    std::string train_manifest, test_manifest, config, out_dir;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
  } cmp_args;
  compare->add_option("--train-manifest", cmp_args.train_manifest)->required();
  compare->add_option("--test-manifest", cmp_args.test_manifest)->required();
  compare->add_option("--config", cmp_args.config)->required();
  compare->add_option("--out-dir", cmp_args.out_dir)->required();
  compare->add_option("--seed", cmp_args.seed);
  compare->add_option("--set", cmp_args.overrides, "Override a config key: key=value");
  compare->callback([&] {
    action = [&] {
      const auto config = run_config_with_overrides(cmp_args.config, cmp_args.seed, cmp_args.overrides);
      const auto rows = compare_dilation_orders(load_manifest(cmp_args.train_manifest),
                                                load_manifest(cmp_args.test_manifest), config.model, config.train,
                                                cmp_args.out_dir);
      const auto csv = format_comparison_csv(rows);
      binary::write_file(fs::path(cmp_args.out_dir) / "comparison.csv", csv);
      std::cout << csv;
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    return action ? action() : kExitUsage;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
