#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mwa/tape.hpp"

namespace mwa {

/// Builds the forward pass on the given tape and returns the 1x1 loss.
using Objective = std::function<Var(Tape&)>;

struct ParameterCheck {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::vector<ParameterCheck> parameters;
};

/// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

/// Compares reverse-mode gradients of `objective` against central differences
/// (f(x+eps) - f(x-eps)) / 2eps for every scalar entry of every parameter.
/// Parameter gradients are zeroed before and hold the analytic gradient after.
/// Throws DeterminismError if two evaluations at the base point differ and
/// ConfigError unless eps is in (0, 1e-3].
GradCheckReport finite_diff_check(const Objective& objective, std::span<Parameter* const> params,
                                  double eps);

/// Forward-only evaluation of an objective.
double evaluate_objective(const Objective& objective);

}  // namespace mwa
