#include "mosaic/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mosaic/error.hpp"

namespace mosaic {
namespace {

void require_finite(const Tensor& t, const char* kernel) {
  if (!t.all_finite()) {
    throw NumericError(std::string(kernel) + ": input contains non-finite values");
  }
}

float store_finite(double v, const char* kernel) {
  const auto f = static_cast<float>(v);
  if (!std::isfinite(f)) {
    throw NumericError(std::string(kernel) + ": result is not finite");
  }
  return f;
}

}  // namespace

void ConvParams::validate() const {
  if (kernel_h < 1 || kernel_w < 1) throw ConfigError("conv kernel size must be positive");
  if (stride < 1) throw ConfigError("conv stride must be positive");
  if (dilation < 1) throw ConfigError("conv dilation must be positive");
  if (groups < 1 || in_c < 1 || out_c < 1) {
    throw ConfigError("conv groups and channel counts must be positive");
  }
  if (in_c % groups != 0 || out_c % groups != 0) {
    throw ConfigError("conv groups=" + std::to_string(groups) + " does not divide in_c=" +
                      std::to_string(in_c) + " and out_c=" + std::to_string(out_c));
  }
}

std::size_t ConvParams::kernel_elements() const {
  return static_cast<std::size_t>(kernel_h) * kernel_w * (in_c / groups) * out_c;
}

int same_output_size(int in, int stride) { return (in + stride - 1) / stride; }

SamePad same_padding(int in, int kernel, int stride, int dilation) {
  const int extent = (kernel - 1) * dilation + 1;
  const int out = same_output_size(in, stride);
  const int total = std::max((out - 1) * stride + extent - in, 0);
  return {total / 2, total - total / 2};
}

TensorShape conv_output_shape(const TensorShape& in, const ConvParams& p) {
  p.validate();
  if (in.c != p.in_c) {
    throw ShapeError("conv expects " + std::to_string(p.in_c) + " input channels, got " +
                     in.str());
  }
  return {same_output_size(in.h, p.stride), same_output_size(in.w, p.stride), p.out_c};
}

TensorShape pool_grid_output_shape(const TensorShape& in, int grid_h, int grid_w) {
  if (grid_h < 1 || grid_w < 1) throw ConfigError("pooling grid must be positive");
  if (grid_h > in.h || grid_w > in.w) {
    throw ConfigError("pooling grid " + std::to_string(grid_h) + "x" + std::to_string(grid_w) +
                      " exceeds input " + in.str());
  }
  return {grid_h, grid_w, in.c};
}

TensorShape concat_output_shape(std::span<const TensorShape> inputs) {
  if (inputs.empty()) throw ShapeError("concat of an empty list");
  TensorShape out = inputs.front();
  out.c = 0;
  for (const auto& s : inputs) {
    if (s.h != out.h || s.w != out.w) {
      throw ShapeError("concat spatial mismatch: " + inputs.front().str() + " vs " + s.str());
    }
    out.c += s.c;
  }
  return out;
}

Tensor conv2d(const Tensor& input, std::span<const float> kernels,
              std::optional<std::span<const float>> bias, const ConvParams& p) {
  const TensorShape out_shape = conv_output_shape(input.shape(), p);
  if (kernels.size() != p.kernel_elements()) {
    throw ShapeError("conv kernel block has " + std::to_string(kernels.size()) +
                     " values, expected " + std::to_string(p.kernel_elements()));
  }
  if (bias && bias->size() != static_cast<std::size_t>(p.out_c)) {
    throw ShapeError("conv bias length does not match out_c");
  }
  require_finite(input, "conv2d");

  const auto pad_h = same_padding(input.h(), p.kernel_h, p.stride, p.dilation);
  const auto pad_w = same_padding(input.w(), p.kernel_w, p.stride, p.dilation);
  const int icg = p.in_c / p.groups;
  const int ocg = p.out_c / p.groups;

  Tensor out(out_shape);
  std::vector<double> acc(p.out_c);
  for (int r = 0; r < out_shape.h; ++r) {
    for (int q = 0; q < out_shape.w; ++q) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int i = 0; i < p.kernel_h; ++i) {
        const int sr = r * p.stride - pad_h.before + i * p.dilation;
        if (sr < 0 || sr >= input.h()) continue;
        for (int j = 0; j < p.kernel_w; ++j) {
          const int sq = q * p.stride - pad_w.before + j * p.dilation;
          if (sq < 0 || sq >= input.w()) continue;
          const float* px = &input.data()[input.index(sr, sq, 0)];
          const float* tap = &kernels[static_cast<std::size_t>(i * p.kernel_w + j) * icg * p.out_c];
          for (int g = 0; g < p.groups; ++g) {
            for (int icl = 0; icl < icg; ++icl) {
              const double x = px[g * icg + icl];
              const float* wrow = tap + static_cast<std::size_t>(icl) * p.out_c + g * ocg;
              double* a = acc.data() + g * ocg;
              for (int o = 0; o < ocg; ++o) a[o] += x * static_cast<double>(wrow[o]);
            }
          }
        }
      }
      float* dst = &out.data()[out.index(r, q, 0)];
      for (int o = 0; o < p.out_c; ++o) {
        const double b = bias ? static_cast<double>((*bias)[o]) : 0.0;
        dst[o] = store_finite(acc[o] + b, "conv2d");
      }
    }
  }
  return out;
}

Tensor depthwise_conv2d(const Tensor& input, std::span<const float> kernels,
                        const ConvParams& p) {
  if (p.groups != p.in_c || p.in_c != p.out_c) {
    throw ConfigError("depthwise conv requires groups = in_c = out_c");
  }
  const TensorShape out_shape = conv_output_shape(input.shape(), p);
  const int c = p.in_c;
  if (kernels.size() != static_cast<std::size_t>(p.kernel_h) * p.kernel_w * c) {
    throw ShapeError("depthwise kernel count does not match input channels (" +
                     std::to_string(kernels.size()) + " values for " + std::to_string(c) +
                     " channels of " + std::to_string(p.kernel_h) + "x" +
                     std::to_string(p.kernel_w) + ")");
  }
  require_finite(input, "depthwise_conv2d");

  const auto pad_h = same_padding(input.h(), p.kernel_h, p.stride, p.dilation);
  const auto pad_w = same_padding(input.w(), p.kernel_w, p.stride, p.dilation);

  Tensor out(out_shape);
  std::vector<double> acc(c);
  for (int r = 0; r < out_shape.h; ++r) {
    for (int q = 0; q < out_shape.w; ++q) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int i = 0; i < p.kernel_h; ++i) {
        const int sr = r * p.stride - pad_h.before + i * p.dilation;
        if (sr < 0 || sr >= input.h()) continue;
        for (int j = 0; j < p.kernel_w; ++j) {
          const int sq = q * p.stride - pad_w.before + j * p.dilation;
          if (sq < 0 || sq >= input.w()) continue;
          const float* px = &input.data()[input.index(sr, sq, 0)];
          const float* tap = &kernels[static_cast<std::size_t>(i * p.kernel_w + j) * c];
          for (int ch = 0; ch < c; ++ch) {
            acc[ch] += static_cast<double>(px[ch]) * static_cast<double>(tap[ch]);
          }
        }
      }
      float* dst = &out.data()[out.index(r, q, 0)];
      for (int ch = 0; ch < c; ++ch) dst[ch] = store_finite(acc[ch], "depthwise_conv2d");
    }
  }
  return out;
}

Tensor avg_pool_grid(const Tensor& input, int grid_h, int grid_w) {
  const TensorShape out_shape = pool_grid_output_shape(input.shape(), grid_h, grid_w);
  const int h = input.h();
  const int w = input.w();
  const int c = input.c();
  Tensor out(out_shape);
  std::vector<double> acc(c);
  for (int i = 0; i < grid_h; ++i) {
    const int r0 = static_cast<int>(static_cast<long long>(i) * h / grid_h);
    const int r1 = static_cast<int>(static_cast<long long>(i + 1) * h / grid_h);
    for (int j = 0; j < grid_w; ++j) {
      const int q0 = static_cast<int>(static_cast<long long>(j) * w / grid_w);
      const int q1 = static_cast<int>(static_cast<long long>(j + 1) * w / grid_w);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int r = r0; r < r1; ++r) {
        for (int q = q0; q < q1; ++q) {
          const float* px = &input.data()[input.index(r, q, 0)];
          for (int ch = 0; ch < c; ++ch) acc[ch] += px[ch];
        }
      }
      const double count = static_cast<double>(r1 - r0) * (q1 - q0);
      float* dst = &out.data()[out.index(i, j, 0)];
      for (int ch = 0; ch < c; ++ch) dst[ch] = static_cast<float>(acc[ch] / count);
    }
  }
  return out;
}

Tensor global_avg_pool(const Tensor& input) { return avg_pool_grid(input, 1, 1); }

namespace {

struct Sample {
  int lo;
  int hi;
  double frac;
};

Sample source_coord(int t, int in, int out, ResizeMode mode) {
  double src = 0.0;
  if (mode == ResizeMode::CornerAligned) {
    src = out > 1 ? static_cast<double>(t) * (in - 1) / (out - 1) : 0.0;
  } else {
    src = (t + 0.5) * static_cast<double>(in) / out - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
  }
  const int lo = std::min(static_cast<int>(std::floor(src)), in - 1);
  const int hi = std::min(lo + 1, in - 1);
  return {lo, hi, src - lo};
}

}  // namespace

Tensor bilinear_resize(const Tensor& input, int out_h, int out_w, ResizeMode mode) {
  if (out_h < 1 || out_w < 1) throw ShapeError("resize target must be positive");
  const int c = input.c();
  Tensor out({out_h, out_w, c});
  std::vector<Sample> cols(out_w);
  for (int q = 0; q < out_w; ++q) cols[q] = source_coord(q, input.w(), out_w, mode);

  for (int r = 0; r < out_h; ++r) {
    const Sample sy = source_coord(r, input.h(), out_h, mode);
    for (int q = 0; q < out_w; ++q) {
      const Sample& sx = cols[q];
      const float* p00 = &input.data()[input.index(sy.lo, sx.lo, 0)];
      const float* p01 = &input.data()[input.index(sy.lo, sx.hi, 0)];
      const float* p10 = &input.data()[input.index(sy.hi, sx.lo, 0)];
      const float* p11 = &input.data()[input.index(sy.hi, sx.hi, 0)];
      float* dst = &out.data()[out.index(r, q, 0)];
      if (sy.frac == 0.0 && sx.frac == 0.0) {
        std::copy(p00, p00 + c, dst);
        continue;
      }
      for (int ch = 0; ch < c; ++ch) {
        const double top = (1.0 - sx.frac) * p00[ch] + sx.frac * p01[ch];
        const double bot = (1.0 - sx.frac) * p10[ch] + sx.frac * p11[ch];
        dst[ch] = static_cast<float>((1.0 - sy.frac) * top + sy.frac * bot);
      }
    }
  }
  return out;
}

Tensor concat_channels(std::span<const Tensor* const> inputs) {
  std::vector<TensorShape> shapes;
  shapes.reserve(inputs.size());
  for (const Tensor* t : inputs) shapes.push_back(t->shape());
  const TensorShape out_shape = concat_output_shape(shapes);

  Tensor out(out_shape);
  const std::size_t pixels = static_cast<std::size_t>(out_shape.h) * out_shape.w;
  int offset = 0;
  for (const Tensor* t : inputs) {
    const int c = t->c();
    for (std::size_t px = 0; px < pixels; ++px) {
      std::copy_n(t->data().data() + px * c, c,
                  out.data().data() + px * out_shape.c + offset);
    }
    offset += c;
  }
  return out;
}

Tensor concat_channels(const std::vector<Tensor>& inputs) {
  std::vector<const Tensor*> ptrs;
  ptrs.reserve(inputs.size());
  for (const auto& t : inputs) ptrs.push_back(&t);
  return concat_channels(std::span<const Tensor* const>(ptrs));
}

Tensor slice_channels(const Tensor& input, int begin, int count) {
  if (begin < 0 || count < 1 || begin + count > input.c()) {
    throw ShapeError("channel slice [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " +
                     input.shape().str());
  }
  Tensor out({input.h(), input.w(), count});
  const std::size_t pixels = static_cast<std::size_t>(input.h()) * input.w();
  for (std::size_t px = 0; px < pixels; ++px) {
    std::copy_n(input.data().data() + px * input.c() + begin, count,
                out.data().data() + px * count);
  }
  return out;
}

Tensor add_elementwise(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add shape mismatch: " + a.shape().str() + " vs " + b.shape().str());
  }
  Tensor out(a.shape());
  auto dst = out.data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = x[i] + y[i];
  return out;
}

Tensor relu(const Tensor& input) {
  Tensor out(input.shape());
  auto dst = out.data();
  auto src = input.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::max(src[i], 0.0f);
  return out;
}

Tensor affine_channels(const Tensor& input, std::span<const float> scale,
                       std::span<const float> bias) {
  const auto c = static_cast<std::size_t>(input.c());
  if (scale.size() != c || bias.size() != c) {
    throw ShapeError("affine parameter length does not match " + std::to_string(c) +
                     " channels");
  }
  Tensor out(input.shape());
  auto dst = out.data();
  auto src = input.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const std::size_t ch = i % c;
    dst[i] = scale[ch] * src[i] + bias[ch];
  }
  return out;
}

LabelMap argmax_channels(const Tensor& input) {
  LabelMap out(input.h(), input.w());
  const int c = input.c();
  for (int r = 0; r < input.h(); ++r) {
    for (int q = 0; q < input.w(); ++q) {
      const float* px = &input.data()[input.index(r, q, 0)];
      int best = 0;
      for (int ch = 1; ch < c; ++ch) {
        if (px[ch] > px[best]) best = ch;
      }
      out.at(r, q) = best;
    }
  }
  return out;
}

}  // namespace mosaic
