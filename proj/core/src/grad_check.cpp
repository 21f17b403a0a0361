#include "hetattn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hetattn {

namespace {

double evaluate(const LossBuilder& loss_fn, ParamStore& params) {
  Tape tape;
  const double v = tape.value(loss_fn(tape, params))[0];
  if (!std::isfinite(v)) throw std::runtime_error("grad_check: non-finite loss");
  return v;
}

}  // namespace

GradCheckResult grad_check(const LossBuilder& loss_fn, ParamStore& params, double eps) {
  params.zero_grad();
  {
    Tape tape;
    Var loss = loss_fn(tape, params);
    if (!std::isfinite(tape.value(loss)[0])) {
      throw std::runtime_error("grad_check: non-finite loss");
    }
    tape.backward(loss);
  }

  GradCheckResult result;
  for (auto& [name, p] : params) {
    const Matrix analytic = p.grad;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + eps;
      const double up = evaluate(loss_fn, params);
      p.value[i] = saved - eps;
      const double down = evaluate(loss_fn, params);
      p.value[i] = saved;

      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      const double rel = std::fabs(a - numeric) / denom;
      ++result.entries_checked;
      result.max_absolute_error = std::max(result.max_absolute_error, std::fabs(a - numeric));
      if (denom >= 1e-6) result.max_relative_error_large = std::max(result.max_relative_error_large, rel);
      if (rel > result.max_relative_error || result.worst_param.empty()) {
        if (rel >= result.max_relative_error) {
          result.max_relative_error = rel;
          result.worst_param = name;
          result.worst_index = i;
          result.analytic = a;
          result.numeric = numeric;
        }
      }
    }
  }
  params.zero_grad();
  return result;
}

}  // namespace hetattn
