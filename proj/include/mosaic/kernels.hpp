#pragma once

// Reference kernels over rank-3 tensors. Every kernel is a pure function of
// its arguments. Reductions accumulate in double and round once on store, in
// a fixed order per output element, so results are bitwise reproducible.

#include <optional>
#include <span>
#include <vector>

#include "mosaic/tensor.hpp"

namespace mosaic {

struct ConvParams {
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  int dilation = 1;
  int groups = 1;
  int in_c = 1;
  int out_c = 1;

  // Throws ConfigError when the record is not internally consistent.
  void validate() const;
  bool is_depthwise() const { return groups == in_c && in_c == out_c; }
  // Number of kernel weights: kernel_h * kernel_w * in_c/groups * out_c.
  std::size_t kernel_elements() const;

  friend bool operator==(const ConvParams&, const ConvParams&) = default;
};

enum class ResizeMode { CornerAligned, HalfPixel };

// SAME padding for one spatial axis: total pad split floor before, ceil after.
struct SamePad {
  int before = 0;
  int after = 0;
};
SamePad same_padding(int in, int kernel, int stride, int dilation);
int same_output_size(int in, int stride);

// Shape laws. Each validates its preconditions and throws ShapeError or
// ConfigError with a descriptive message.
TensorShape conv_output_shape(const TensorShape& in, const ConvParams& p);
TensorShape pool_grid_output_shape(const TensorShape& in, int grid_h, int grid_w);
TensorShape concat_output_shape(std::span<const TensorShape> inputs);

// Kernel layout is (kernel_h, kernel_w, in_c/groups, out_c); output channel o
// belongs to group o / (out_c/groups) and reads the matching input slice.
Tensor conv2d(const Tensor& input, std::span<const float> kernels,
              std::optional<std::span<const float>> bias, const ConvParams& p);

// Kernel layout is (kernel_h, kernel_w, c). p.groups must equal p.in_c.
Tensor depthwise_conv2d(const Tensor& input, std::span<const float> kernels,
                        const ConvParams& p);

// Bin (i, j) covers rows floor(i*h/grid_h) .. floor((i+1)*h/grid_h)-1 and the
// analogous column range.
Tensor avg_pool_grid(const Tensor& input, int grid_h, int grid_w);
Tensor global_avg_pool(const Tensor& input);

Tensor bilinear_resize(const Tensor& input, int out_h, int out_w,
                       ResizeMode mode = ResizeMode::CornerAligned);

Tensor concat_channels(std::span<const Tensor* const> inputs);
Tensor concat_channels(const std::vector<Tensor>& inputs);

// Copies channels [begin, begin + count).
Tensor slice_channels(const Tensor& input, int begin, int count);

Tensor add_elementwise(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& input);
Tensor affine_channels(const Tensor& input, std::span<const float> scale,
                       std::span<const float> bias);

// Lowest channel index wins on ties.
LabelMap argmax_channels(const Tensor& input);

}  // namespace mosaic
