#pragma once

// Deliberately naive reference implementations used as independent oracles
// by the test suites and the selftest command. None of them call into the
// production kernels.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mosaic/kernels.hpp"
#include "mosaic/tensor.hpp"

namespace mosaic::reference {

// Materializes the zero-padded input and multiplies every kernel tap,
// padding included. *multiplies, when given, receives the number of scalar
// multiplications performed.
Tensor conv2d(const Tensor& input, std::span<const float> kernels,
              std::optional<std::span<const float>> bias, const ConvParams& p,
              std::uint64_t* multiplies = nullptr);

Tensor depthwise_conv2d(const Tensor& input, std::span<const float> kernels,
                        const ConvParams& p, std::uint64_t* multiplies = nullptr);

// Dense kernel for a grouped conv: zeros outside the diagonal channel blocks,
// laid out as (kernel_h, kernel_w, in_c, out_c).
std::vector<float> block_masked_kernel(std::span<const float> grouped, const ConvParams& p);

Tensor avg_pool_grid(const Tensor& input, int grid_h, int grid_w);

Tensor bilinear_resize(const Tensor& input, int out_h, int out_w, ResizeMode mode);

// mIOU through an explicit k x k confusion matrix.
double confusion_miou(const LabelMap& pred, const LabelMap& gt, int num_classes,
                      std::optional<int> ignore_label = std::nullopt);

}  // namespace mosaic::reference
