#include "mosaic/reference.hpp"

#include <algorithm>
#include <cmath>

namespace mosaic::reference {
namespace {

struct Padded {
  int h, w, c, top, left;
  std::vector<double> v;
  double at(int r, int q, int ch) const { return v[(static_cast<std::size_t>(r) * w + q) * c + ch]; }
};

Padded pad_input(const Tensor& input, const ConvParams& p) {
  const int oh = (input.h() + p.stride - 1) / p.stride;
  const int ow = (input.w() + p.stride - 1) / p.stride;
  const int eh = (p.kernel_h - 1) * p.dilation + 1;
  const int ew = (p.kernel_w - 1) * p.dilation + 1;
  const int th = std::max((oh - 1) * p.stride + eh - input.h(), 0);
  const int tw = std::max((ow - 1) * p.stride + ew - input.w(), 0);
  Padded out{input.h() + th, input.w() + tw, input.c(), th / 2, tw / 2, {}};
  out.v.assign(static_cast<std::size_t>(out.h) * out.w * out.c, 0.0);
  for (int r = 0; r < input.h(); ++r) {
    for (int q = 0; q < input.w(); ++q) {
      for (int ch = 0; ch < input.c(); ++ch) {
        out.v[(static_cast<std::size_t>(r + out.top) * out.w + q + out.left) * out.c + ch] =
            input.at(r, q, ch);
      }
    }
  }
  return out;
}

}  // namespace

Tensor conv2d(const Tensor& input, std::span<const float> kernels,
              std::optional<std::span<const float>> bias, const ConvParams& p,
              std::uint64_t* multiplies) {
  const Padded x = pad_input(input, p);
  const int oh = (input.h() + p.stride - 1) / p.stride;
  const int ow = (input.w() + p.stride - 1) / p.stride;
  const int icg = p.in_c / p.groups;
  const int ocg = p.out_c / p.groups;
  Tensor out({oh, ow, p.out_c});
  std::uint64_t count = 0;
  for (int r = 0; r < oh; ++r) {
    for (int q = 0; q < ow; ++q) {
      for (int o = 0; o < p.out_c; ++o) {
        const int g = o / ocg;
        double acc = 0.0;
        for (int i = 0; i < p.kernel_h; ++i) {
          for (int j = 0; j < p.kernel_w; ++j) {
            for (int icl = 0; icl < icg; ++icl) {
              const double xv = x.at(r * p.stride + i * p.dilation, q * p.stride + j * p.dilation,
                                     g * icg + icl);
              const double wv =
                  kernels[((static_cast<std::size_t>(i) * p.kernel_w + j) * icg + icl) * p.out_c +
                          o];
              acc += xv * wv;
              ++count;
            }
          }
        }
        if (bias) acc += (*bias)[o];
        out.at(r, q, o) = static_cast<float>(acc);
      }
    }
  }
  if (multiplies) *multiplies = count;
  return out;
}

Tensor depthwise_conv2d(const Tensor& input, std::span<const float> kernels,
                        const ConvParams& p, std::uint64_t* multiplies) {
  const Padded x = pad_input(input, p);
  const int oh = (input.h() + p.stride - 1) / p.stride;
  const int ow = (input.w() + p.stride - 1) / p.stride;
  const int c = input.c();
  Tensor out({oh, ow, c});
  std::uint64_t count = 0;
  for (int ch = 0; ch < c; ++ch) {
    for (int r = 0; r < oh; ++r) {
      for (int q = 0; q < ow; ++q) {
        double acc = 0.0;
        for (int i = 0; i < p.kernel_h; ++i) {
          for (int j = 0; j < p.kernel_w; ++j) {
            acc += x.at(r * p.stride + i * p.dilation, q * p.stride + j * p.dilation, ch) *
                   kernels[(static_cast<std::size_t>(i) * p.kernel_w + j) * c + ch];
            ++count;
          }
        }
        out.at(r, q, ch) = static_cast<float>(acc);
      }
    }
  }
  if (multiplies) *multiplies = count;
  return out;
}

std::vector<float> block_masked_kernel(std::span<const float> grouped, const ConvParams& p) {
  const int icg = p.in_c / p.groups;
  const int ocg = p.out_c / p.groups;
  std::vector<float> dense(static_cast<std::size_t>(p.kernel_h) * p.kernel_w * p.in_c * p.out_c,
                           0.0f);
  for (int i = 0; i < p.kernel_h; ++i) {
    for (int j = 0; j < p.kernel_w; ++j) {
      for (int ic = 0; ic < p.in_c; ++ic) {
        for (int o = 0; o < p.out_c; ++o) {
          if (ic / icg != o / ocg) continue;
          const std::size_t tap = static_cast<std::size_t>(i) * p.kernel_w + j;
          dense[(tap * p.in_c + ic) * p.out_c + o] =
              grouped[(tap * icg + ic % icg) * p.out_c + o];
        }
      }
    }
  }
  return dense;
}

Tensor avg_pool_grid(const Tensor& input, int grid_h, int grid_w) {
  Tensor out({grid_h, grid_w, input.c()});
  for (int i = 0; i < grid_h; ++i) {
    for (int j = 0; j < grid_w; ++j) {
      for (int ch = 0; ch < input.c(); ++ch) {
        double sum = 0.0;
        int n = 0;
        for (int r = 0; r < input.h(); ++r) {
          // Row r lies in bin i iff i*h < (r+1)*grid_h <= (i+1)*h.
          if (((r + 1) * grid_h - 1) / input.h() != i) continue;
          for (int q = 0; q < input.w(); ++q) {
            if (((q + 1) * grid_w - 1) / input.w() != j) continue;
            sum += input.at(r, q, ch);
            ++n;
          }
        }
        out.at(i, j, ch) = static_cast<float>(sum / n);
      }
    }
  }
  return out;
}

Tensor bilinear_resize(const Tensor& input, int out_h, int out_w, ResizeMode mode) {
  auto coord = [mode](int t, int in, int out) {
    if (mode == ResizeMode::CornerAligned) {
      return out == 1 ? 0.0 : t * (in - 1.0) / (out - 1.0);
    }
    const double s = (t + 0.5) * in / out - 0.5;
    return std::min(std::max(s, 0.0), in - 1.0);
  };
  Tensor out({out_h, out_w, input.c()});
  for (int r = 0; r < out_h; ++r) {
    const double y = coord(r, input.h(), out_h);
    for (int q = 0; q < out_w; ++q) {
      const double x = coord(q, input.w(), out_w);
      for (int ch = 0; ch < input.c(); ++ch) {
        // Tent-weighted sum over the whole source grid.
        double v = 0.0;
        for (int sr = 0; sr < input.h(); ++sr) {
          const double wy = std::max(0.0, 1.0 - std::abs(y - sr));
          if (wy == 0.0) continue;
          for (int sq = 0; sq < input.w(); ++sq) {
            const double wx = std::max(0.0, 1.0 - std::abs(x - sq));
            if (wx == 0.0) continue;
            v += wy * wx * input.at(sr, sq, ch);
          }
        }
        out.at(r, q, ch) = static_cast<float>(v);
      }
    }
  }
  return out;
}

double confusion_miou(const LabelMap& pred, const LabelMap& gt, int num_classes,
                      std::optional<int> ignore_label) {
  std::vector<std::vector<long long>> cm(num_classes, std::vector<long long>(num_classes, 0));
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    if (ignore_label && gt.labels[i] == *ignore_label) continue;
    ++cm[gt.labels[i]][pred.labels[i]];
  }
  double sum = 0.0;
  int n = 0;
  for (int c = 0; c < num_classes; ++c) {
    long long row = 0;
    long long col = 0;
    for (int k = 0; k < num_classes; ++k) {
      row += cm[c][k];
      col += cm[k][c];
    }
    const long long uni = row + col - cm[c][c];
    if (uni == 0) continue;
    sum += static_cast<double>(cm[c][c]) / static_cast<double>(uni);
    ++n;
  }
  return n ? sum / n : 1.0;
}

}  // namespace mosaic::reference
