#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mosaic {

struct TensorShape {
  int h = 1;
  int w = 1;
  int c = 1;

  std::size_t elements() const {
    return static_cast<std::size_t>(h) * static_cast<std::size_t>(w) *
           static_cast<std::size_t>(c);
  }
  bool valid() const { return h >= 1 && w >= 1 && c >= 1; }
  std::string str() const;

  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

// Dense rank-3 feature map in (row, column, channel) order.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(TensorShape shape, float fill = 0.0f);
  Tensor(TensorShape shape, std::vector<float> data);

  const TensorShape& shape() const { return shape_; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  int c() const { return shape_.c; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(int r, int q, int ch) const {
    return (static_cast<std::size_t>(r) * shape_.w + q) * shape_.c + ch;
  }
  float& at(int r, int q, int ch) { return data_[index(r, q, ch)]; }
  float at(int r, int q, int ch) const { return data_[index(r, q, ch)]; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  TensorShape shape_{};
  std::vector<float> data_ = std::vector<float>(1, 0.0f);
};

// Per-pixel integer class labels, row-major.
struct LabelMap {
  int h = 0;
  int w = 0;
  std::vector<std::int32_t> labels;

  LabelMap() = default;
  LabelMap(int h_, int w_, std::int32_t fill = 0)
      : h(h_), w(w_), labels(static_cast<std::size_t>(h_) * w_, fill) {}

  std::int32_t& at(int r, int q) { return labels[static_cast<std::size_t>(r) * w + q]; }
  std::int32_t at(int r, int q) const { return labels[static_cast<std::size_t>(r) * w + q]; }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

}  // namespace mosaic
