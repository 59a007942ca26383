#pragma once

#include <optional>
#include <vector>

#include "mosaic/tensor.hpp"

namespace mosaic {

// Per-class IoU over non-ignored pixels; nullopt for classes absent from
// both maps.
std::vector<std::optional<double>> per_class_iou(const LabelMap& pred, const LabelMap& gt,
                                                 int num_classes,
                                                 std::optional<int> ignore_label = std::nullopt);

// Mean of per_class_iou over the classes present in pred or gt. Returns 1.0
// when no pixel is evaluated.
double compute_miou(const LabelMap& pred, const LabelMap& gt, int num_classes,
                    std::optional<int> ignore_label = std::nullopt);

}  // namespace mosaic
