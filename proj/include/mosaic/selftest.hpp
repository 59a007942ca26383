#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mosaic/kernels.hpp"

namespace mosaic {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

using ConvShapeFn = std::function<TensorShape(const TensorShape&, const ConvParams&)>;

// out = ceil(in / stride) over sizes 1..24, strides {1,2}, dilations {1,2}
// and kernels {1,3,5}; also runs the conv kernel to confirm its output shape.
CheckResult check_same_shape_law(const ConvShapeFn& shape_fn = conv_output_shape);
CheckResult check_conv_oracle(int cases);
CheckResult check_group_conv_equivalence(int cases);
CheckResult check_depthwise_oracle(int cases);
CheckResult check_pool_oracle(int cases);
CheckResult check_bilinear_oracle(int cases);
CheckResult check_cost_oracle(int cases);
CheckResult check_pyramid_ordering();
CheckResult check_filter_monotonicity();
CheckResult check_skip_monotonicity();
CheckResult check_policy_preserves_skip_ordering();

std::vector<CheckResult> run_selftest();

}  // namespace mosaic
