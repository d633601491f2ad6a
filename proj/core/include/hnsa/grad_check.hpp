// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hnsa/tensor.hpp"

namespace hnsa::ad {

struct GradCheckOptions {
  double eps = 1e-5;
  /// Upper bound on coordinates checked per tensor; 0 checks all of them.
  std::size_t max_coords_per_tensor = 0;
  /// Drives the coordinate selector when subsampling.
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

/// |a - b| / max(1, |a| + |b|).
double relative_error(double analytic, double numeric) noexcept;

/// Builds the scalar loss on the given tape from the current values of the
/// parameters it closes over.
using LossFn = std::function<Tensor(Tape&)>;

/// Compares reverse-mode gradients of `loss` against central differences.
/// Each param's grad is reset before the analytic pass and left holding the
/// analytic gradient afterwards; values are restored exactly.
/// Throws NumericalError if the loss is not finite at any probe.
GradCheckResult grad_check(const LossFn& loss, std::span<Tensor> params,
                           const GradCheckOptions& options = {});

}  // namespace hnsa::ad
