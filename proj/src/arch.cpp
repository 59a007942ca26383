#include "mosaic/arch.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "mosaic/error.hpp"

namespace mosaic {

std::string SkipSpec::token() const {
  return std::to_string(output_stride) + (merge == MergeStyle::Concat ? "-C" : "-S");
}

SkipSpec SkipSpec::parse(const std::string& token) {
  const auto dash = token.find('-');
  if (dash == std::string::npos || dash + 2 != token.size()) {
    throw ConfigError("bad skip token '" + token + "', expected e.g. 8-C or 4-S");
  }
  SkipSpec s;
  const std::string os = token.substr(0, dash);
  if (os == "2" || os == "4" || os == "8") {
    s.output_stride = std::stoi(os);
  } else {
    throw ConfigError("skip token '" + token + "' must use output stride 2, 4 or 8");
  }
  const char style = token[dash + 1];
  if (style == 'C' || style == 'c') {
    s.merge = MergeStyle::Concat;
  } else if (style == 'S' || style == 's') {
    s.merge = MergeStyle::Sum;
  } else {
    throw ConfigError("skip token '" + token + "' must end in C or S");
  }
  return s;
}

void EncoderConfig::validate() const {
  if (pyramid_bins.empty()) throw ConfigError("pyramid_bins must not be empty");
  for (std::size_t i = 0; i < pyramid_bins.size(); ++i) {
    if (pyramid_bins[i] < 1) throw ConfigError("pyramid_bins entries must be >= 1");
    if (i && pyramid_bins[i] <= pyramid_bins[i - 1]) {
      throw ConfigError("pyramid_bins must be strictly increasing");
    }
  }
  if (group_kernels.empty()) throw ConfigError("group_kernels must not be empty");
  for (int k : group_kernels) {
    if (k < 1 || k % 2 == 0) throw ConfigError("group_kernels entries must be odd and positive");
  }
  if (enc_filters < 1) throw ConfigError("enc_filters must be positive");
  const int branches = static_cast<int>(group_kernels.size());
  if (enc_filters % branches != 0) {
    throw ConfigError("enc_filters=" + std::to_string(enc_filters) +
                      " is not divisible by the number of groups (" + std::to_string(branches) +
                      ")");
  }
}

void DecoderConfig::validate() const {
  if (dec_filters < 1) throw ConfigError("dec_filters must be positive");
  for (std::size_t i = 0; i < skips.size(); ++i) {
    const int os = skips[i].output_stride;
    if (os != 2 && os != 4 && os != 8) throw ConfigError("skips must use output stride 2, 4 or 8");
    if (i && os >= skips[i - 1].output_stride) {
      throw ConfigError("skips must be ordered by strictly decreasing output stride");
    }
  }
}

void ModelConfig::validate() const {
  if (m < 1) throw ConfigError("m must be positive");
  if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
  if (input_h < 16 || input_w < 16 || input_h % 16 != 0 || input_w % 16 != 0) {
    throw ConfigError("input_h and input_w must be positive multiples of 16, got " +
                      std::to_string(input_h) + "x" + std::to_string(input_w));
  }
  encoder.validate();
  decoder.validate();
  if (encoder.use_group_conv && m % static_cast<int>(encoder.group_kernels.size()) != 0) {
    throw ConfigError("m=" + std::to_string(m) + " cannot be split into " +
                      std::to_string(encoder.group_kernels.size()) + " equal groups");
  }
  std::set<int> seen;
  for (int r : dilation_rows) {
    if (r < 1 || r > kBackboneRows) {
      throw ConfigError("dilation_rows entries must lie in 1.." + std::to_string(kBackboneRows));
    }
    if (!seen.insert(r).second) throw ConfigError("dilation_rows contains a duplicate");
  }
  const int os16_h = input_h / 16;
  const int os16_w = input_w / 16;
  for (int grid : encoder.pyramid_bins) {
    if (grid > os16_h || grid > os16_w) {
      throw ConfigError("pyramid grid " + std::to_string(grid) + "x" + std::to_string(grid) +
                        " exceeds the os16 feature size " + std::to_string(os16_h) + "x" +
                        std::to_string(os16_w));
    }
  }
}

int ModelConfig::aggregation_width() const {
  return aggregation_width_mode == AggregationWidthMode::EncoderWidth ? encoder.enc_filters
                                                                      : decoder.dec_filters;
}

std::span<const BackboneRow> backbone_table() {
  using enum BackboneOp;
  static constexpr std::array<BackboneRow, kBackboneRows> rows{{
      {Conv2d, 3, std::nullopt, 32, 2, 1, 2},
      {Bneck, 3, 96, 32, 2, 1, 0},
      {Bneck, 3, 64, 32, 1, 1, 4},
      {Bneck, 5, 160, 64, 2, 1, 0},
      {Bneck, 3, 192, 64, 1, 1, 0},
      {Bneck, 3, 128, 64, 1, 1, 0},
      {Bneck, 3, 192, 64, 1, 1, 8},
      {Bneck, 5, 384, 128, 2, 1, 0},
      {Bneck, 3, 384, 128, 1, 1, 0},
      {Bneck, 3, 384, 128, 1, 1, 0},
      {Bneck, 3, 384, 128, 1, 1, 0},
      {Bneck, 3, 768, 160, 1, 1, 0},
      {Bneck, 3, 640, 160, 1, 1, 0},
      {Bneck, 3, 960, 192, 1, 1, 0},
      {Bneck, 5, 384, 96, 1, 1, 0},
      {Bneck, 5, 384, 96, 1, 1, 0},
      {Bneck, 5, 384, 96, 1, 1, 0},
      {Conv2d, 1, std::nullopt, 0, 1, 1, 16},
  }};
  return rows;
}

Feature build_conv_unit(Graph& g, const std::string& name, Feature in, int out_c, int kernel,
                        int stride, int dilation, bool activation) {
  ConvParams p{kernel, kernel, stride, dilation, 1, in.channels, out_c};
  p.validate();
  NodeRef x = g.add_node(NodeSpec::conv(name, p), {in.ref});
  x = g.add_node(NodeSpec::affine(name + "/bn", out_c), {x});
  if (activation) x = g.add_node(NodeSpec::relu(name + "/relu"), {x});
  return {x, out_c};
}

Feature build_depthwise_unit(Graph& g, const std::string& name, Feature in, int kernel,
                             int stride, int dilation) {
  ConvParams p{kernel, kernel, stride, dilation, in.channels, in.channels, in.channels};
  p.validate();
  NodeRef x = g.add_node(NodeSpec::depthwise(name, p), {in.ref});
  x = g.add_node(NodeSpec::affine(name + "/bn", in.channels), {x});
  x = g.add_node(NodeSpec::relu(name + "/relu"), {x});
  return {x, in.channels};
}

Feature build_bneck(Graph& g, const std::string& prefix, Feature in, int exp_size, int out_c,
                    int kernel, int stride, int dilation) {
  if (stride != 1 && stride != 2) throw ConfigError(prefix + ": bneck stride must be 1 or 2");
  if (kernel != 3 && kernel != 5) throw ConfigError(prefix + ": bneck kernel must be 3 or 5");
  if (exp_size < 1 || out_c < 1) throw ConfigError(prefix + ": bneck widths must be positive");
  if (dilation < 1) throw ConfigError(prefix + ": bneck dilation must be positive");

  Feature x = build_conv_unit(g, prefix + "/expand", in, exp_size, 1, 1, 1, true);
  x = build_depthwise_unit(g, prefix + "/dw", x, kernel, stride, dilation);
  x = build_conv_unit(g, prefix + "/project", x, out_c, 1, 1, 1, false);
  if (stride == 1 && in.channels == out_c) {
    x.ref = g.add_node(NodeSpec::add(prefix + "/add"), {in.ref, x.ref});
  }
  return x;
}

TapSet build_backbone(Graph& g, Feature source, int m, std::span<const int> dilation_rows) {
  if (m < 1) throw ConfigError("backbone endpoint width m must be positive");
  const auto rows = backbone_table();
  TapSet taps;
  Feature x = source;
  for (int idx = 0; idx < kBackboneRows; ++idx) {
    const int row = idx + 1;
    const BackboneRow& spec = rows[idx];
    const int dilation =
        std::find(dilation_rows.begin(), dilation_rows.end(), row) != dilation_rows.end() ? 2 : 1;
    const int out_c = spec.out_c == 0 ? m : spec.out_c;
    if (spec.op == BackboneOp::Conv2d) {
      const std::string name = row == 1 ? "backbone/stem" : "backbone/endpoint";
      x = build_conv_unit(g, name, x, out_c, spec.kernel, spec.stride, dilation, true);
    } else {
      const std::string name =
          std::string("backbone/bneck") + (row < 10 ? "0" : "") + std::to_string(row);
      x = build_bneck(g, name, x, *spec.exp_size, out_c, spec.kernel, spec.stride, dilation);
    }
    if (spec.tap_stride) {
      taps[spec.tap_stride] = x;
      g.set_tap("os" + std::to_string(spec.tap_stride), x.ref);
    }
  }
  return taps;
}

namespace {

Feature build_separable(Graph& g, const std::string& prefix, Feature in, int kernel, int out_c) {
  Feature x = build_depthwise_unit(g, prefix + "/dw", in, kernel, 1, 1);
  return build_conv_unit(g, prefix + "/pw", x, out_c, 1, 1, 1, true);
}

}  // namespace

Feature build_multi_kernel_group_conv(Graph& g, const std::string& prefix, Feature level,
                                      const EncoderConfig& cfg) {
  const int branches = static_cast<int>(cfg.group_kernels.size());
  if (branches < 1) throw ConfigError(prefix + ": group_kernels must not be empty");
  if (cfg.enc_filters % branches != 0) {
    throw ConfigError(prefix + ": enc_filters not divisible by " + std::to_string(branches));
  }
  const int per_branch = cfg.enc_filters / branches;
  if (cfg.use_group_conv && level.channels % branches != 0) {
    throw ConfigError(prefix + ": " + std::to_string(level.channels) +
                      " channels cannot be split into " + std::to_string(branches) +
                      " equal groups");
  }

  std::vector<Feature> outs;
  for (int b = 0; b < branches; ++b) {
    const int kernel = cfg.group_kernels[b];
    const std::string branch = prefix + "/g" + std::to_string(b) + "_k" + std::to_string(kernel);
    Feature in = level;
    if (cfg.use_group_conv && branches > 1) {
      const int width = level.channels / branches;
      in = {g.add_node(NodeSpec::slice(branch + "/split", b * width, width), {level.ref}), width};
    }
    outs.push_back(build_separable(g, branch, in, kernel, per_branch));
  }
  if (outs.size() == 1) return outs.front();
  std::vector<NodeRef> refs;
  for (const auto& f : outs) refs.push_back(f.ref);
  return {g.add_node(NodeSpec::concat(prefix + "/concat"), refs), cfg.enc_filters};
}

Feature build_context_encoder(Graph& g, Feature os16, const EncoderConfig& cfg, int out_width,
                              ResizeMode mode, std::optional<TensorShape> os16_hw,
                              int feature_stride) {
  cfg.validate();
  if (out_width < 1) throw ConfigError("encoder output width must be positive");
  std::vector<NodeRef> parts{os16.ref};
  int width = os16.channels;
  for (int grid : cfg.pyramid_bins) {
    if (os16_hw && (grid > os16_hw->h || grid > os16_hw->w)) {
      throw ConfigError("pyramid grid " + std::to_string(grid) + "x" + std::to_string(grid) +
                        " exceeds the os16 feature size " + std::to_string(os16_hw->h) + "x" +
                        std::to_string(os16_hw->w));
    }
    const std::string prefix = "encoder/level" + std::to_string(grid);
    NodeRef pooled =
        grid == 1 ? g.add_node(NodeSpec::global_pool(prefix + "/pool"), {os16.ref})
                  : g.add_node(NodeSpec::pool_grid(prefix + "/pool", grid, grid), {os16.ref});
    Feature level = build_multi_kernel_group_conv(g, prefix + "/mkgc",
                                                  {pooled, os16.channels}, cfg);
    parts.push_back(g.add_node(NodeSpec::resize_to_stride(prefix + "/resize", feature_stride, mode),
                               {level.ref}));
    width += level.channels;
  }
  NodeRef cat = g.add_node(NodeSpec::concat("encoder/concat"), parts);
  return build_conv_unit(g, "encoder/project", {cat, width}, out_width, 1, 1, 1, true);
}

Feature build_concat_merge(Graph& g, const std::string& prefix, Feature semantic, Feature skip,
                           int dec_filters) {
  if (dec_filters < 1) throw ConfigError(prefix + ": dec_filters must be positive");
  NodeRef cat = g.add_node(NodeSpec::concat(prefix + "/concat"), {semantic.ref, skip.ref});
  Feature x{cat, semantic.channels + skip.channels};
  x = build_conv_unit(g, prefix + "/conv1", x, dec_filters, 1, 1, 1, true);
  x = build_depthwise_unit(g, prefix + "/dw", x, 3, 1, 1);
  return build_conv_unit(g, prefix + "/conv2", x, dec_filters, 1, 1, 1, true);
}

Feature build_sum_merge(Graph& g, const std::string& prefix, Feature semantic, Feature skip,
                        int width) {
  if (width != semantic.channels) {
    throw ShapeError(prefix + ": sum merge width " + std::to_string(width) +
                     " differs from the semantic branch width " +
                     std::to_string(semantic.channels));
  }
  Feature proj = build_conv_unit(g, prefix + "/proj", skip, width, 1, 1, 1, false);
  return {g.add_node(NodeSpec::add(prefix + "/add"), {semantic.ref, proj.ref}), width};
}

Feature build_decoder(Graph& g, Feature encoded, const TapSet& taps, const DecoderConfig& cfg,
                      int num_classes, ResizeMode mode) {
  cfg.validate();
  if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
  Feature x = encoded;
  for (const SkipSpec& skip : cfg.skips) {
    auto it = taps.find(skip.output_stride);
    if (it == taps.end()) {
      throw ConfigError("no backbone tap at output stride " + std::to_string(skip.output_stride));
    }
    const std::string prefix = "decoder/merge_os" + std::to_string(skip.output_stride);
    Feature up{g.add_node(NodeSpec::resize_to_stride(prefix + "/resize", skip.output_stride, mode),
                          {x.ref}),
               x.channels};
    x = skip.merge == MergeStyle::Concat
            ? build_concat_merge(g, prefix, up, it->second, cfg.dec_filters)
            : build_sum_merge(g, prefix, up, it->second, up.channels);
  }
  ConvParams cls{1, 1, 1, 1, 1, x.channels, num_classes};
  NodeRef logits = g.add_node(NodeSpec::conv("head/classifier", cls, true), {x.ref});
  logits = g.add_node(NodeSpec::resize_to_stride("head/upsample", 1, mode), {logits});
  return {logits, num_classes};
}

namespace {

template <class Fn>
auto in_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(stage) + ": " + e.what());
  } catch (const ShapeError& e) {
    throw ShapeError(std::string(stage) + ": " + e.what());
  } catch (const GraphError& e) {
    throw GraphError(std::string(stage) + ": " + e.what());
  }
}

}  // namespace

Model build_model(const ModelConfig& cfg) {
  in_stage("config", [&] { cfg.validate(); });
  Model model;
  model.config = cfg;
  Graph& g = model.graph;
  Feature source{g.add_node(NodeSpec::input("input", 3), {}), 3};

  model.taps = in_stage("backbone", [&] { return build_backbone(g, source, cfg.m, cfg.dilation_rows); });
  const TensorShape os16_hw{cfg.input_h / 16, cfg.input_w / 16, cfg.m};
  model.encoded = in_stage("encoder", [&] {
    return build_context_encoder(g, model.taps.at(16), cfg.encoder, cfg.aggregation_width(),
                                 cfg.resize_mode, os16_hw);
  });
  const Feature logits = in_stage("decoder", [&] {
    return build_decoder(g, model.encoded, model.taps, cfg.decoder, cfg.num_classes,
                         cfg.resize_mode);
  });
  model.logits = logits.ref;
  model.labels = g.add_node(NodeSpec::argmax("head/argmax"), {logits.ref});
  g.add_output("logits", model.logits);
  g.add_output("labels", model.labels);
  model.shapes = in_stage("shape check",
                          [&] { return infer_shapes(g, {cfg.input_h, cfg.input_w, 3}); });
  return model;
}

std::string stage_of(const std::string& node_name) {
  const auto slash = node_name.find('/');
  const std::string head = node_name.substr(0, slash);
  if (head == "backbone" || head == "encoder" || head == "decoder" || head == "head") return head;
  return "input";
}

}  // namespace mosaic
