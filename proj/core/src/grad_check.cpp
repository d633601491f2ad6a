// SPDX-License-Identifier: Apache-2.0
#include "hnsa/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hnsa/error.hpp"
#include "hnsa/rng.hpp"

namespace hnsa::ad {
namespace {

double evaluate(const LossFn& loss) {
  Tape tape(false);
  const double value = loss(tape).item();
  if (!std::isfinite(value)) throw NumericalError("grad_check: loss is not finite");
  return value;
}

std::vector<std::size_t> pick_coordinates(std::size_t n, std::size_t limit, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (limit == 0 || limit >= n) return idx;
  rng.shuffle(idx);
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

double relative_error(double analytic, double numeric) noexcept {
  return std::abs(analytic - numeric) /
         std::max(1.0, std::abs(analytic) + std::abs(numeric));
}

GradCheckResult grad_check(const LossFn& loss, std::span<Tensor> params,
                           const GradCheckOptions& options) {
  for (const auto& p : params) {
    if (!p.requires_grad()) throw UsageError("grad_check: parameter does not require grad");
  }
  for (auto& p : params) p.zero_grad();
  {
    Tape tape;
    const Tensor value = loss(tape);
    if (!std::isfinite(value.item())) throw NumericalError("grad_check: loss is not finite");
    tape.backward(value);
  }

  GradCheckResult result;
  Rng rng = substream(options.seed, "grad_check");
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = params[t];
    const auto analytic = p.grad();
    auto values = p.mutable_values();
    for (auto i : pick_coordinates(p.size(), options.max_coords_per_tensor, rng)) {
      const double original = values[i];
      values[i] = original + options.eps;
      const double up = evaluate(loss);
      values[i] = original - options.eps;
      const double down = evaluate(loss);
      values[i] = original;

      const double numeric = (up - down) / (2.0 * options.eps);
      const double err = relative_error(analytic[i], numeric);
      ++result.coords_checked;
      if (err > result.max_rel_error || result.coords_checked == 1) {
        result.max_rel_error = err;
        result.worst_tensor = t;
        result.worst_index = i;
        result.analytic_at_worst = analytic[i];
        result.numeric_at_worst = numeric;
      }
    }
  }
  return result;
}

}  // namespace hnsa::ad
