#include "mwa/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mwa/errors.hpp"

namespace mwa {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

double evaluate_objective(const Objective& objective) {
  Tape tape;
  const Var loss = objective(tape);
  const Matrix& v = tape.value(loss);
  if (v.rows() != 1 || v.cols() != 1) {
    throw ShapeError("objective must return a 1x1 loss, got " + v.shape_string());
  }
  return v(0, 0);
}

GradCheckReport finite_diff_check(const Objective& objective, std::span<Parameter* const> params,
                                  double eps) {
  if (!(eps > 0.0 && eps <= 1e-3)) {
    throw ConfigError("finite_diff_check: epsilon must lie in (0, 1e-3], got " +
                      std::to_string(eps));
  }
  const double base_a = evaluate_objective(objective);
  const double base_b = evaluate_objective(objective);
  if (base_a != base_b) {
    throw DeterminismError("finite_diff_check: objective is not deterministic");
  }

  zero_grads(params);
  {
    Tape tape;
    tape.backward(objective(tape));
  }

  GradCheckReport report;
  for (Parameter* p : params) {
    ParameterCheck check;
    check.name = p->name;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double original = p->value[i];
      p->value[i] = original + eps;
      const double plus = evaluate_objective(objective);
      p->value[i] = original - eps;
      const double minus = evaluate_objective(objective);
      p->value[i] = original;

      const double numeric = (plus - minus) / (2.0 * eps);
      const double analytic = p->grad[i];
      const double err = relative_error(analytic, numeric);
      if (err > check.max_relative_error || i == 0) {
        check.max_relative_error = err;
        check.worst_index = i;
        check.analytic = analytic;
        check.numeric = numeric;
      }
    }
    if (report.parameters.empty() || check.max_relative_error > report.max_relative_error) {
      report.max_relative_error = check.max_relative_error;
      report.worst_parameter = check.name;
    }
    report.parameters.push_back(std::move(check));
  }
  return report;
}

}  // namespace mwa
