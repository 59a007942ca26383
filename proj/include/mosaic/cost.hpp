#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mosaic/arch.hpp"
#include "mosaic/graph.hpp"

namespace mosaic {

// Standard: one madd per multiply-accumulate of a conv or depthwise conv;
// affine, additions, pooling and interpolation are free.
// IncludeEverything: additionally one madd per affine, add and relu output
// element, one per pooled input element, and four per interpolated output
// element. Meant for sensitivity analysis only.
enum class CountingPolicy { Standard, IncludeEverything };

struct NodeCost {
  std::uint64_t madds = 0;
  std::uint64_t params = 0;
  friend bool operator==(const NodeCost&, const NodeCost&) = default;
};

NodeCost count_node(const NodeSpec& spec, std::span<const TensorShape> in_shapes,
                     const TensorShape& out_shape,
                     CountingPolicy policy = CountingPolicy::Standard);

struct CostEntry {
  std::string name;
  OpKind kind = OpKind::Relu;
  std::string stage;
  std::uint64_t madds = 0;
  std::uint64_t params = 0;
};

struct StageCost {
  std::string stage;
  std::uint64_t madds = 0;
  std::uint64_t params = 0;
};

struct CostReport {
  std::vector<CostEntry> per_node;
  std::vector<StageCost> stages;  // backbone, encoder, decoder, head
  std::uint64_t total_madds = 0;
  std::uint64_t total_params = 0;
  int input_h = 0;
  int input_w = 0;
};

CostReport count_graph(const Graph& graph, const TensorShape& input_shape,
                       CountingPolicy policy = CountingPolicy::Standard);
CostReport count_model(const Model& model, int input_h, int input_w,
                       CountingPolicy policy = CountingPolicy::Standard);

enum class AblationAxis { EncoderFilters, DecoderFilters, Pyramid, Skips };

AblationAxis parse_axis(const std::string& text);
const char* axis_name(AblationAxis axis);

struct AblationRow {
  std::string label;
  std::uint64_t madds = 0;
  std::uint64_t params = 0;
};

// Variant syntax per axis:
//   encoder_filters, decoder_filters: an integer, e.g. "64"
//   pyramid: comma list of grids with optional ":Y"/":N" group-conv flag, e.g. "4,8,16:N"
//   skips: "0" for none, otherwise a comma list of tokens, e.g. "8-C,4-S"
// Returns the label and the varied config; throws ConfigError naming the variant.
std::pair<std::string, ModelConfig> apply_variant(const ModelConfig& base, AblationAxis axis,
                                                  const std::string& variant);

std::vector<AblationRow> ablation_report(const ModelConfig& base, AblationAxis axis,
                                         const std::vector<std::string>& variants,
                                         CountingPolicy policy = CountingPolicy::Standard);

// Billions rounded to two decimals, e.g. "20.86".
std::string format_billions(std::uint64_t madds, int decimals = 2);

void render_report_text(const CostReport& report, std::ostream& os, bool per_node = true);
// Columns: label, madds, madds_B, params. One row per node, one per stage
// ("stage:<name>") and a final "total" row.
void render_report_csv(const CostReport& report, std::ostream& os);
void render_ablation_text(const std::vector<AblationRow>& rows, std::ostream& os);
void render_ablation_csv(const std::vector<AblationRow>& rows, std::ostream& os);

}  // namespace mosaic
