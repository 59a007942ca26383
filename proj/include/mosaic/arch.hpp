#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mosaic/graph.hpp"

namespace mosaic {

enum class MergeStyle { Concat, Sum };

struct SkipSpec {
  int output_stride = 8;
  MergeStyle merge = MergeStyle::Concat;

  // "8-C", "4-S", ...
  std::string token() const;
  static SkipSpec parse(const std::string& token);

  friend bool operator==(const SkipSpec&, const SkipSpec&) = default;
};

struct EncoderConfig {
  std::vector<int> pyramid_bins{4, 8, 16};  // G means a GxG grid; 1 is the global branch
  bool use_group_conv = true;
  std::vector<int> group_kernels{3, 5};
  int enc_filters = 32;

  void validate() const;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct DecoderConfig {
  std::vector<SkipSpec> skips{{8, MergeStyle::Concat}, {4, MergeStyle::Sum}};
  int dec_filters = 64;

  void validate() const;
  friend bool operator==(const DecoderConfig&, const DecoderConfig&) = default;
};

// Output width of the 1x1 conv that aggregates the concatenated pyramid.
enum class AggregationWidthMode { EncoderWidth, DecoderWidth };

struct ModelConfig {
  int m = 480;
  int num_classes = 19;
  int input_h = 1024;
  int input_w = 2048;
  EncoderConfig encoder;
  DecoderConfig decoder;
  AggregationWidthMode aggregation_width_mode = AggregationWidthMode::EncoderWidth;
  // 1-based backbone rows whose depthwise convolutions use dilation 2.
  std::vector<int> dilation_rows{15, 16, 17};
  ResizeMode resize_mode = ResizeMode::CornerAligned;

  void validate() const;
  int aggregation_width() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class BackboneOp { Conv2d, Bneck };

struct BackboneRow {
  BackboneOp op = BackboneOp::Bneck;
  int kernel = 3;
  std::optional<int> exp_size;
  int out_c = 0;  // 0 stands for the endpoint width m
  int stride = 1;
  int dilation = 1;
  int tap_stride = 0;  // output stride registered as a tap after this row, 0 for none
};

// The 18 segmentation rows of the tailored backbone, dilation 1 everywhere.
std::span<const BackboneRow> backbone_table();
inline constexpr int kBackboneRows = 18;

// A graph node together with its channel count.
struct Feature {
  NodeRef ref;
  int channels = 0;
};

using TapSet = std::map<int, Feature>;  // output stride -> feature

Feature build_conv_unit(Graph& g, const std::string& name, Feature in, int out_c, int kernel,
                        int stride, int dilation, bool activation);
Feature build_depthwise_unit(Graph& g, const std::string& name, Feature in, int kernel,
                             int stride, int dilation);

Feature build_bneck(Graph& g, const std::string& prefix, Feature in, int exp_size, int out_c,
                    int kernel, int stride, int dilation);

// Taps are registered on the graph as "os2", "os4", "os8", "os16".
TapSet build_backbone(Graph& g, Feature source, int m,
                      std::span<const int> dilation_rows = std::span<const int>());

Feature build_multi_kernel_group_conv(Graph& g, const std::string& prefix, Feature level,
                                      const EncoderConfig& cfg);

// Pyramid levels are resized back to the spatial size the graph source has
// at feature_stride. os16_hw, when given, is the spatial size of the feature
// used to reject grids that would not fit.
Feature build_context_encoder(Graph& g, Feature os16, const EncoderConfig& cfg, int out_width,
                              ResizeMode mode = ResizeMode::CornerAligned,
                              std::optional<TensorShape> os16_hw = std::nullopt,
                              int feature_stride = 16);

Feature build_concat_merge(Graph& g, const std::string& prefix, Feature semantic, Feature skip,
                           int dec_filters);
Feature build_sum_merge(Graph& g, const std::string& prefix, Feature semantic, Feature skip,
                        int width);

// Returns the full-resolution logits.
Feature build_decoder(Graph& g, Feature encoded, const TapSet& taps, const DecoderConfig& cfg,
                      int num_classes, ResizeMode mode = ResizeMode::CornerAligned);

struct Model {
  ModelConfig config;
  Graph graph;
  TapSet taps;
  Feature encoded;
  NodeRef logits;
  NodeRef labels;
  ShapeTable shapes;  // at (input_h, input_w, 3)
};

Model build_model(const ModelConfig& cfg);

// Stage of a node from its hierarchical name: backbone, encoder, decoder,
// head or input.
std::string stage_of(const std::string& node_name);

}  // namespace mosaic
