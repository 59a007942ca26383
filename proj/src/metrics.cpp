#include "mosaic/metrics.hpp"

#include <cstdint>
#include <string>

#include "mosaic/error.hpp"

namespace mosaic {

std::vector<std::optional<double>> per_class_iou(const LabelMap& pred, const LabelMap& gt,
                                                 int num_classes,
                                                 std::optional<int> ignore_label) {
  if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
  if (pred.h != gt.h || pred.w != gt.w || pred.labels.size() != gt.labels.size()) {
    throw ShapeError("label map dimensions differ: " + std::to_string(pred.h) + "x" +
                     std::to_string(pred.w) + " vs " + std::to_string(gt.h) + "x" +
                     std::to_string(gt.w));
  }
  std::vector<std::uint64_t> inter(num_classes, 0);
  std::vector<std::uint64_t> pred_count(num_classes, 0);
  std::vector<std::uint64_t> gt_count(num_classes, 0);
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const int g = gt.labels[i];
    const int p = pred.labels[i];
    if (ignore_label && g == *ignore_label) continue;
    if (g < 0 || g >= num_classes) {
      throw ConfigError("ground-truth label " + std::to_string(g) + " out of range");
    }
    if (p < 0 || p >= num_classes) {
      throw ConfigError("predicted label " + std::to_string(p) + " out of range");
    }
    ++gt_count[g];
    ++pred_count[p];
    if (p == g) ++inter[g];
  }
  std::vector<std::optional<double>> iou(num_classes);
  for (int c = 0; c < num_classes; ++c) {
    const std::uint64_t uni = pred_count[c] + gt_count[c] - inter[c];
    if (uni > 0) iou[c] = static_cast<double>(inter[c]) / static_cast<double>(uni);
  }
  return iou;
}

double compute_miou(const LabelMap& pred, const LabelMap& gt, int num_classes,
                    std::optional<int> ignore_label) {
  const auto iou = per_class_iou(pred, gt, num_classes, ignore_label);
  double sum = 0.0;
  int present = 0;
  for (const auto& v : iou) {
    if (v) {
      sum += *v;
      ++present;
    }
  }
  return present ? sum / present : 1.0;
}

}  // namespace mosaic
