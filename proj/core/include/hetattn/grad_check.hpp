#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "hetattn/param_store.hpp"
#include "hetattn/tape.hpp"

namespace hetattn {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
  /// Largest |analytic - numeric| over all entries.
  double max_absolute_error = 0.0;
  /// Relative error restricted to entries with max(|a|, |numeric|) >= 1e-6.
  /// Below that, double roundoff in the loss (~1e-11 after dividing by
  /// 2 eps) dominates the central difference.
  double max_relative_error_large = 0.0;
};

/// Builds the scalar loss on the given tape from the current parameter values.
using LossBuilder = std::function<Var(Tape&, ParamStore&)>;

/// Compares tape gradients against central differences
/// (f(theta + eps) - f(theta - eps)) / (2 eps) for every parameter entry.
/// Relative error is |a - b| / max(|a|, |b|, 1e-8). Throws std::runtime_error
/// on a non-finite loss. Parameter values are restored afterwards.
GradCheckResult grad_check(const LossBuilder& loss_fn, ParamStore& params, double eps = 1e-5);

}  // namespace hetattn
