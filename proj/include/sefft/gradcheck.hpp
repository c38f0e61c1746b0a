#pragma once

// Central finite-difference check of the end-to-end loss gradient: every
// parameter and every input sample of randomly drawn networks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "sefft/model.hpp"
#include "sefft/trainer.hpp"

namespace sefft {

struct GradcheckOptions {
  std::size_t trials = 100;
  Index steps = 0;             // input length; 0 picks 2 * margin + 10
  double step = 1e-4;          // finite-difference half width
  double tolerance = 1e-5;     // max relative error
  double scale_floor = 1e-6;   // relative-error denominator never drops below this
  std::uint64_t seed = 0;
};

struct GradcheckReport {
  std::size_t trials = 0;
  std::size_t checked = 0;        // coordinates compared
  std::size_t skipped_kinks = 0;  // perturbations that crossed a ReLU or |.| kink
  double max_relative_error = 0.0;
  bool passed = false;
};

namespace detail {

// Sign pattern of every non-smooth point the loss passes through: both ReLU
// inputs of each block and the residual of each interior loss sample.
template <typename Scalar>
std::vector<std::int8_t> kink_signature(const ForwardTrace<Scalar>& trace, const Column<Scalar>& target, Index margin) {
  std::vector<std::int8_t> sig;
  auto push = [&](Scalar v) { sig.push_back(static_cast<std::int8_t>((v > 0) - (v < 0))); };
  for (const auto& b : trace.blocks) {
    for (Index i = 0; i < b.summed.value().size(); ++i) push(b.summed.value().data()[i]);
    for (Index i = 0; i < b.mixed.value().size(); ++i) push(b.mixed.value().data()[i]);
  }
  for (Index t = margin; t < target.size() - margin; ++t) push(trace.output.value()(t, 0) - target(t));
  return sig;
}

template <typename Scalar>
struct Evaluation {
  Scalar loss;
  std::vector<std::int8_t> signature;
};

template <typename Scalar>
Evaluation<Scalar> evaluate_loss(const Tensor2<Scalar>& input, const ModelParams<Scalar>& params,
                                 const ModelConfig& config, const Column<Scalar>& target, Index margin) {
  auto trace = forward_traced(input, params, config);
  const auto loss = l1_loss<Scalar>(target, trace.output.value().col(0), margin);
  return {loss.loss, kink_signature(trace, target, margin)};
}

}  // namespace detail

template <typename Scalar>
GradcheckReport gradcheck(const ModelConfig& config, const GradcheckOptions& options) {
  if (options.trials == 0) throw ConfigError("gradcheck needs at least one trial");
  if (!(options.step > 0.0) || !(options.tolerance > 0.0)) throw ConfigError("gradcheck step and tolerance must be > 0");
  const Index margin = receptive_field(config).margin();
  const Index steps = options.steps > 0 ? options.steps : 2 * margin + 10;
  if (steps <= 2 * margin) throw ConfigError("gradcheck input is too short for the receptive-field margin");

  GradcheckReport report;
  report.trials = options.trials;
  const Scalar h = static_cast<Scalar>(options.step);

  auto compare = [&](double analytic, double numeric) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), options.scale_floor});
    const double err = std::abs(analytic - numeric) / scale;
    report.max_relative_error = std::max(report.max_relative_error, err);
    ++report.checked;
  };

  for (std::size_t trial = 0; trial < options.trials; ++trial) {
    std::mt19937_64 rng(options.seed * 1000003u + trial);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto params = build<Scalar>(config, rng());
    params.for_each([&](Conv1x1Params<Scalar>& c) {
      for (Index j = 0; j < c.bias.size(); ++j) c.bias(j) = static_cast<Scalar>(0.1 * gauss(rng));
    });
    Tensor2<Scalar> input(steps, 1);
    Column<Scalar> target(steps);
    for (Index t = 0; t < steps; ++t) {
      input.value()(t, 0) = static_cast<Scalar>(0.5 * gauss(rng));
      target(t) = static_cast<Scalar>(0.5 * gauss(rng));
    }

    auto trace = forward_traced(input, params, config);
    const auto loss = l1_loss<Scalar>(target, trace.output.value().col(0), margin);
    const auto base_signature = detail::kink_signature(trace, target, margin);
    params.zero_grad();
    const Grid<Scalar> input_grad = backward(trace, params, config, Grid<Scalar>(loss.grad));

    auto probe = [&](Scalar& slot, double analytic) {
      const Scalar saved = slot;
      slot = saved + h;
      const auto plus = detail::evaluate_loss(input, params, config, target, margin);
      slot = saved - h;
      const auto minus = detail::evaluate_loss(input, params, config, target, margin);
      slot = saved;
      if (plus.signature != base_signature || minus.signature != base_signature) {
        ++report.skipped_kinks;
        return;
      }
      const double numeric =
          (static_cast<double>(plus.loss) - static_cast<double>(minus.loss)) / (2.0 * static_cast<double>(h));
      compare(analytic, numeric);
    };

    params.for_each([&](Conv1x1Params<Scalar>& c) {
      for (Index i = 0; i < c.weight.size(); ++i) probe(c.weight.data()[i], c.weight_grad.data()[i]);
      for (Index i = 0; i < c.bias.size(); ++i) probe(c.bias.data()[i], c.bias_grad.data()[i]);
    });
    for (Index t = 0; t < steps; ++t) probe(input.value()(t, 0), input_grad(t, 0));
  }
  report.passed = report.checked > 0 && report.max_relative_error <= options.tolerance;
  return report;
}

}  // namespace sefft
