#include "mosaic/cost.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "mosaic/config_io.hpp"
#include "mosaic/error.hpp"

namespace mosaic {

namespace {

std::uint64_t pixels(const TensorShape& s) {
  return static_cast<std::uint64_t>(s.h) * static_cast<std::uint64_t>(s.w);
}

void expect_conv_shapes(const ConvParams& p, std::span<const TensorShape> in,
                        const TensorShape& out) {
  if (in.size() != 1) throw ShapeError("conv cost expects one input shape");
  const TensorShape expected = conv_output_shape(in[0], p);
  if (expected != out) {
    throw ShapeError("conv output " + out.str() + " inconsistent with input " + in[0].str() +
                     " (expected " + expected.str() + ")");
  }
}

}  // namespace

NodeCost count_node(const NodeSpec& spec, std::span<const TensorShape> in_shapes,
                    const TensorShape& out_shape, CountingPolicy policy) {
  const bool everything = policy == CountingPolicy::IncludeEverything;
  const std::uint64_t out_elems = out_shape.elements();
  switch (spec.kind) {
    case OpKind::Conv: {
      const auto& cp = std::get<ConvNodeParams>(spec.params);
      const ConvParams& p = cp.conv;
      expect_conv_shapes(p, in_shapes, out_shape);
      const std::uint64_t taps = static_cast<std::uint64_t>(p.kernel_h) * p.kernel_w *
                                 static_cast<std::uint64_t>(p.in_c / p.groups);
      NodeCost c;
      c.madds = pixels(out_shape) * static_cast<std::uint64_t>(p.out_c) * taps;
      c.params = taps * static_cast<std::uint64_t>(p.out_c) + (cp.bias ? p.out_c : 0);
      return c;
    }
    case OpKind::DepthwiseConv: {
      const ConvParams& p = std::get<ConvNodeParams>(spec.params).conv;
      expect_conv_shapes(p, in_shapes, out_shape);
      const std::uint64_t k = static_cast<std::uint64_t>(p.kernel_h) * p.kernel_w;
      return {pixels(out_shape) * static_cast<std::uint64_t>(p.out_c) * k,
              static_cast<std::uint64_t>(p.out_c) * k};
    }
    case OpKind::Affine: {
      const int c = std::get<AffineParams>(spec.params).channels;
      if (in_shapes.size() != 1 || in_shapes[0].c != c || out_shape != in_shapes[0]) {
        throw ShapeError("affine shapes inconsistent with " + std::to_string(c) + " channels");
      }
      return {everything ? out_elems : 0, 2ULL * static_cast<std::uint64_t>(c)};
    }
    case OpKind::Add:
    case OpKind::Relu:
      return {everything ? out_elems : 0, 0};
    case OpKind::AvgPoolGrid:
    case OpKind::GlobalPool: {
      if (in_shapes.size() != 1) throw ShapeError("pool cost expects one input shape");
      return {everything ? in_shapes[0].elements() : 0, 0};
    }
    case OpKind::BilinearResize:
      return {everything ? 4 * out_elems : 0, 0};
    case OpKind::Input:
    case OpKind::ConcatChannels:
    case OpKind::SliceChannels:
    case OpKind::Argmax:
      return {};
  }
  return {};
}

CostReport count_graph(const Graph& graph, const TensorShape& input_shape,
                       CountingPolicy policy) {
  const ShapeTable shapes = infer_shapes(graph, input_shape);
  CostReport report;
  report.input_h = input_shape.h;
  report.input_w = input_shape.w;
  for (const char* s : {"backbone", "encoder", "decoder", "head"}) report.stages.push_back({s});

  std::vector<TensorShape> in;
  for (const NodeRef ref : topo_order(graph)) {
    const Node& node = graph.node(ref);
    in.clear();
    for (const NodeRef& i : node.inputs) in.push_back(shapes[i.id]);
    const NodeCost c = count_node(node.spec, in, shapes[ref.id], policy);
    CostEntry e{node.spec.name, node.spec.kind, stage_of(node.spec.name), c.madds, c.params};
    report.total_madds += e.madds;
    report.total_params += e.params;
    for (auto& s : report.stages) {
      if (s.stage == e.stage) {
        s.madds += e.madds;
        s.params += e.params;
      }
    }
    report.per_node.push_back(std::move(e));
  }
  return report;
}

CostReport count_model(const Model& model, int input_h, int input_w, CountingPolicy policy) {
  return count_graph(model.graph, {input_h, input_w, 3}, policy);
}

AblationAxis parse_axis(const std::string& text) {
  if (text == "encoder_filters") return AblationAxis::EncoderFilters;
  if (text == "decoder_filters") return AblationAxis::DecoderFilters;
  if (text == "pyramid") return AblationAxis::Pyramid;
  if (text == "skips") return AblationAxis::Skips;
  throw ConfigError("unknown ablation axis '" + text +
                    "' (expected encoder_filters, decoder_filters, pyramid or skips)");
}

const char* axis_name(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::EncoderFilters: return "encoder_filters";
    case AblationAxis::DecoderFilters: return "decoder_filters";
    case AblationAxis::Pyramid: return "pyramid";
    case AblationAxis::Skips: return "skips";
  }
  return "?";
}

std::pair<std::string, ModelConfig> apply_variant(const ModelConfig& base, AblationAxis axis,
                                                  const std::string& variant) {
  ModelConfig cfg = base;
  std::string label;
  try {
    switch (axis) {
      case AblationAxis::EncoderFilters:
        cfg.encoder.enc_filters = parse_int(variant, "enc_filters");
        label = "enc=" + std::to_string(cfg.encoder.enc_filters);
        break;
      case AblationAxis::DecoderFilters:
        cfg.decoder.dec_filters = parse_int(variant, "dec_filters");
        label = "dec=" + std::to_string(cfg.decoder.dec_filters);
        break;
      case AblationAxis::Pyramid: {
        std::string bins = variant;
        const auto colon = variant.find(':');
        if (colon != std::string::npos) {
          bins = variant.substr(0, colon);
          cfg.encoder.use_group_conv = parse_bool(variant.substr(colon + 1), "use_group_conv");
        }
        cfg.encoder.pyramid_bins = parse_int_list(bins, "pyramid_bins");
        std::ostringstream os;
        os << '[';
        for (std::size_t i = 0; i < cfg.encoder.pyramid_bins.size(); ++i) {
          os << (i ? "," : "") << cfg.encoder.pyramid_bins[i];
        }
        os << "] GC=" << (cfg.encoder.use_group_conv ? 'Y' : 'N');
        label = os.str();
        break;
      }
      case AblationAxis::Skips:
        cfg.decoder.skips = parse_skip_list(variant);
        label = format_skip_list(cfg.decoder.skips);
        break;
    }
    cfg.validate();
  } catch (const Error& e) {
    throw ConfigError("variant '" + variant + "': " + e.what());
  }
  return {label, cfg};
}

std::vector<AblationRow> ablation_report(const ModelConfig& base, AblationAxis axis,
                                         const std::vector<std::string>& variants,
                                         CountingPolicy policy) {
  if (variants.empty()) throw ConfigError("ablation needs at least one variant");
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    auto [label, cfg] = apply_variant(base, axis, v);
    Model model;
    try {
      model = build_model(cfg);
    } catch (const Error& e) {
      throw ConfigError("variant '" + v + "': " + e.what());
    }
    const CostReport r = count_model(model, cfg.input_h, cfg.input_w, policy);
    rows.push_back({label, r.total_madds, r.total_params});
  }
  return rows;
}

std::string format_billions(std::uint64_t madds, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, static_cast<double>(madds) / 1e9);
  return buf;
}

void render_report_text(const CostReport& report, std::ostream& os, bool per_node) {
  std::size_t width = 5;
  for (const auto& e : report.per_node) width = std::max(width, e.name.size());
  auto row = [&](const std::string& label, std::uint64_t madds, std::uint64_t params) {
    os << std::left << std::setw(static_cast<int>(width)) << label << "  " << std::right
       << std::setw(14) << madds << "  " << std::setw(8) << format_billions(madds) << "  "
       << std::setw(10) << params << '\n';
  };
  os << "input " << report.input_h << "x" << report.input_w << "\n";
  os << std::left << std::setw(static_cast<int>(width)) << "label" << "  " << std::right
     << std::setw(14) << "madds" << "  " << std::setw(8) << "madds_B" << "  " << std::setw(10)
     << "params" << '\n';
  if (per_node) {
    for (const auto& e : report.per_node) {
      if (e.madds || e.params) row(e.name, e.madds, e.params);
    }
  }
  for (const auto& s : report.stages) row("stage:" + s.stage, s.madds, s.params);
  row("total", report.total_madds, report.total_params);
}

void render_report_csv(const CostReport& report, std::ostream& os) {
  os << "label,madds,madds_B,params\n";
  for (const auto& e : report.per_node) {
    os << e.name << ',' << e.madds << ',' << format_billions(e.madds) << ',' << e.params << '\n';
  }
  for (const auto& s : report.stages) {
    os << "stage:" << s.stage << ',' << s.madds << ',' << format_billions(s.madds) << ','
       << s.params << '\n';
  }
  os << "total," << report.total_madds << ',' << format_billions(report.total_madds) << ','
     << report.total_params << '\n';
}

void render_ablation_text(const std::vector<AblationRow>& rows, std::ostream& os) {
  std::size_t width = 7;
  for (const auto& r : rows) width = std::max(width, r.label.size());
  os << std::left << std::setw(static_cast<int>(width)) << "variant" << "  " << std::right
     << std::setw(14) << "madds" << "  " << std::setw(8) << "madds_B" << "  " << std::setw(10)
     << "params" << '\n';
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(width)) << r.label << "  " << std::right
       << std::setw(14) << r.madds << "  " << std::setw(8) << format_billions(r.madds) << "  "
       << std::setw(10) << r.params << '\n';
  }
}

void render_ablation_csv(const std::vector<AblationRow>& rows, std::ostream& os) {
  os << "label,madds,madds_B,params\n";
  for (const auto& r : rows) {
    // Labels may contain commas (skip lists, bin lists).
    os << '"' << r.label << '"' << ',' << r.madds << ',' << format_billions(r.madds) << ','
       << r.params << '\n';
  }
}

}  // namespace mosaic
