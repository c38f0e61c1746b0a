#pragma once

// Dilation-order comparison: the same block stack trained once with a
// wide-first schedule and once with it reversed, on the same data and seed.

#include <filesystem>
#include <string>
#include <vector>

#include "sefft/metrics.hpp"
#include "sefft/trainer.hpp"

namespace sefft {

struct ComparisonRow {
  std::string model;      // "se-fftnet" or "se-invfftnet"
  DilationSchedule schedule;
  float final_loss = 0;   // mean of the last N logged losses, N = training utterances
  UtteranceMetrics mean;  // test-set means
};

/// Trains `base` with its schedule in wide-first order and reversed,
/// writing each run under out_dir/<model>/, and scores both on `test`.
std::vector<ComparisonRow> compare_dilation_orders(const Manifest& train_set, const Manifest& test_set,
                                                   const ModelConfig& base, const TrainConfig& config,
                                                   const std::filesystem::path& out_dir);

/// CSV: model,schedule,final_loss,ssnr_noisy,ssnr_enhanced,snr_gain_db,mae
std::string format_comparison_csv(const std::vector<ComparisonRow>& rows);

}  // namespace sefft
