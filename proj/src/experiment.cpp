#include "sefft/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>

#include "sefft/checkpoint.hpp"
#include "sefft/run_config.hpp"

namespace sefft {

std::vector<ComparisonRow> compare_dilation_orders(const Manifest& train_set, const Manifest& test_set,
                                                   const ModelConfig& base, const TrainConfig& config,
                                                   const std::filesystem::path& out_dir) {
  if (test_set.specs.empty()) throw ConfigError("comparison needs a non-empty test manifest");
  // Accept either order; the SE-FFTNet row is the one that starts wide.
  const DilationSchedule fftnet =
      base.schedule[0] < base.schedule[base.schedule.size() - 1] ? base.schedule.reversed() : base.schedule;

  std::vector<ComparisonRow> rows;
  for (const auto& [name, schedule] : {std::pair{"se-fftnet", fftnet}, std::pair{"se-invfftnet", fftnet.reversed()}}) {
    ModelConfig arch = base;
    arch.schedule = schedule;
    const auto run = train(arch, train_set, config, out_dir / name);
    const auto ck = load_checkpoint(run.final_checkpoint);

    ComparisonRow row;
    row.model = name;
    row.schedule = schedule;
    const std::size_t tail = std::min<std::size_t>(run.log.size(), std::max<std::size_t>(train_set.specs.size(), 1));
    double sum = 0.0;
    for (std::size_t i = run.log.size() - tail; i < run.log.size(); ++i) sum += run.log[i].loss;
    row.final_loss = tail ? static_cast<float>(sum / static_cast<double>(tail)) : 0.0f;
    row.mean = evaluate(test_set, ck.params, ck.config).mean;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::string out = "model,schedule,final_loss,ssnr_noisy,ssnr_enhanced,snr_gain_db,mae\n";
  for (const auto& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), ",%.9g,%.6f,%.6f,%.6f,%.8f\n", static_cast<double>(r.final_loss),
                  r.mean.ssnr_noisy, r.mean.ssnr_enhanced, r.mean.snr_gain_db, r.mean.mae);
    out += r.model + ",\"" + format_schedule(r.schedule) + "\"" + buf;
  }
  return out;
}

}  // namespace sefft
