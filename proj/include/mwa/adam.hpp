#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mwa/tape.hpp"

namespace mwa {

enum class LrSchedule {
  /// Linear ramp over ceil(warmup_ratio * total_steps) steps, then linear
  /// decay to zero at total_steps.
  kWarmupLinearDecay,
  kConstant,
};

struct AdamHyper {
  double lr0 = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-6;
  double weight_decay = 0.01;
  double warmup_ratio = 0.1;
  std::size_t total_steps = 1;
  LrSchedule schedule = LrSchedule::kWarmupLinearDecay;
};

/// Learning rate applied by the `step`-th update (1-based).
double learning_rate_at(const AdamHyper& hyper, std::size_t step);

/// Adam with bias-corrected moments and decoupled weight decay: the decay
/// term is added to the update and never enters the moment estimates.
class AdamState {
 public:
  AdamState(std::span<Parameter* const> params, AdamHyper hyper);

  void step(std::span<Parameter* const> params);

  std::size_t steps_taken() const noexcept { return step_; }
  const AdamHyper& hyper() const noexcept { return hyper_; }
  /// Learning rate used by the most recent step.
  double last_learning_rate() const noexcept { return last_lr_; }
  const std::vector<Matrix>& first_moments() const noexcept { return m_; }
  const std::vector<Matrix>& second_moments() const noexcept { return v_; }

 private:
  AdamHyper hyper_;
  std::size_t step_ = 0;
  double last_lr_ = 0.0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

inline void adam_step(std::span<Parameter* const> params, AdamState& state) { state.step(params); }

}  // namespace mwa
