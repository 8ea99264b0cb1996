#include "mwa/adam.hpp"

#include <cmath>

#include "mwa/errors.hpp"

namespace mwa {

namespace {

void validate(const AdamHyper& h) {
  if (h.total_steps == 0) throw ConfigError("Adam: total_steps must be positive");
  if (h.warmup_ratio < 0.0 || h.warmup_ratio > 1.0) {
    throw ConfigError("Adam: warmup_ratio must lie in [0, 1]");
  }
  if (h.beta1 < 0.0 || h.beta1 >= 1.0 || h.beta2 < 0.0 || h.beta2 >= 1.0) {
    throw ConfigError("Adam: betas must lie in [0, 1)");
  }
  if (h.eps <= 0.0) throw ConfigError("Adam: eps must be positive");
}

}  // namespace

double learning_rate_at(const AdamHyper& h, std::size_t step) {
  if (h.total_steps == 0) throw ConfigError("Adam: total_steps must be positive");
  if (h.schedule == LrSchedule::kConstant) return h.lr0;
  if (step == 0) return 0.0;
  const auto total = static_cast<double>(h.total_steps);
  const auto warmup = static_cast<std::size_t>(std::ceil(h.warmup_ratio * total));
  const auto t = static_cast<double>(step);
  if (step <= warmup) return h.lr0 * t / static_cast<double>(warmup);
  if (step >= h.total_steps) return 0.0;
  return h.lr0 * (total - t) / (total - static_cast<double>(warmup));
}

AdamState::AdamState(std::span<Parameter* const> params, AdamHyper hyper) : hyper_(hyper) {
  validate(hyper_);
  for (const Parameter* p : params) {
    m_.push_back(Matrix::zeros(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::zeros(p->value.rows(), p->value.cols()));
  }
}

void AdamState::step(std::span<Parameter* const> params) {
  validate(hyper_);
  if (params.size() != m_.size()) {
    throw StateError("Adam: parameter list differs from the one the state was built for");
  }
  ++step_;
  last_lr_ = learning_rate_at(hyper_, step_);
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(hyper_.beta1, t);
  const double c2 = 1.0 - std::pow(hyper_.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    if (!p.value.same_shape(m_[k])) throw ShapeError("Adam: parameter shape changed");
    Matrix& m = m_[k];
    Matrix& v = v_[k];
    const double wd = p.decay ? hyper_.weight_decay : 0.0;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = hyper_.beta1 * m[i] + (1.0 - hyper_.beta1) * g;
      v[i] = hyper_.beta2 * v[i] + (1.0 - hyper_.beta2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      const double update = m_hat / (std::sqrt(v_hat) + hyper_.eps) + wd * p.value[i];
      p.value[i] -= last_lr_ * update;
    }
  }
}

}  // namespace mwa
