// SPDX-License-Identifier: Apache-2.0
#include "hiba/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "hiba/errors.hpp"

namespace hiba::ad {

GradCheckReport grad_check(const std::function<Tensor<double>()>& f,
                           std::vector<NamedLeaf> leaves, double step, double tolerance) {
  require(step > 0.0, "grad_check: step must be positive");
  GradCheckReport report;
  report.tolerance = tolerance;

  for (auto& leaf : leaves) leaf.tensor.zero_grad();
  const Tensor<double> root = f();
  if (root.requires_grad()) root.backward();

  for (auto& leaf : leaves) {
    const std::vector<double> analytic = leaf.tensor.grad();
    auto values = leaf.tensor.mutable_data();
    std::vector<double> numeric(values.size());
    {
      NoGradGuard no_grad;
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double saved = values[i];
        values[i] = saved + step;
        const double up = f().item();
        values[i] = saved - step;
        const double down = f().item();
        values[i] = saved;
        numeric[i] = (up - down) / (2.0 * step);
      }
    }
    double max_diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      max_diff = std::max(max_diff, std::abs(analytic[i] - numeric[i]));
      scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
    }
    LeafCheck check{leaf.name, scale > 0.0 ? max_diff / scale : 0.0, max_diff};
    if (!(check.max_rel_error <= tolerance)) report.passed = false;
    report.leaves.push_back(std::move(check));
  }
  return report;
}

}  // namespace hiba::ad
