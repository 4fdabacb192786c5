// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hiba/tensor.hpp"

namespace hiba::ad {

struct NamedLeaf {
  std::string name;
  Tensor<double> tensor;
};

struct LeafCheck {
  std::string name;
  /// max|analytic - numeric| / max(max|analytic|, max|numeric|); 0 when both vanish.
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::vector<LeafCheck> leaves;
  double tolerance = 0.0;
  bool passed = true;
};

/// Compares backward() against central finite differences for every leaf.
/// `f` must rebuild the graph from the leaves' current values on each call.
/// Leaf values are restored before returning.
GradCheckReport grad_check(const std::function<Tensor<double>()>& f,
                           std::vector<NamedLeaf> leaves, double step = 1e-6,
                           double tolerance = 1e-5);

}  // namespace hiba::ad
