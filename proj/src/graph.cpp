#include "mosaic/graph.hpp"

#include <chrono>
#include <queue>
#include <sstream>

#include "mosaic/error.hpp"
#include "mosaic/weights.hpp"

namespace mosaic {

const char* kind_name(OpKind kind) {
  switch (kind) {
    case OpKind::Input: return "Input";
    case OpKind::Conv: return "Conv";
    case OpKind::DepthwiseConv: return "DepthwiseConv";
    case OpKind::AvgPoolGrid: return "AvgPoolGrid";
    case OpKind::GlobalPool: return "GlobalPool";
    case OpKind::BilinearResize: return "BilinearResize";
    case OpKind::ConcatChannels: return "ConcatChannels";
    case OpKind::SliceChannels: return "SliceChannels";
    case OpKind::Add: return "Add";
    case OpKind::Affine: return "Affine";
    case OpKind::Relu: return "Relu";
    case OpKind::Argmax: return "Argmax";
  }
  return "?";
}

NodeSpec NodeSpec::input(std::string name, int channels) {
  return {OpKind::Input, std::move(name), InputParams{channels}};
}
NodeSpec NodeSpec::conv(std::string name, const ConvParams& p, bool bias) {
  return {OpKind::Conv, std::move(name), ConvNodeParams{p, bias}};
}
NodeSpec NodeSpec::depthwise(std::string name, const ConvParams& p) {
  return {OpKind::DepthwiseConv, std::move(name), ConvNodeParams{p, false}};
}
NodeSpec NodeSpec::pool_grid(std::string name, int grid_h, int grid_w) {
  return {OpKind::AvgPoolGrid, std::move(name), GridParams{grid_h, grid_w}};
}
NodeSpec NodeSpec::global_pool(std::string name) {
  return {OpKind::GlobalPool, std::move(name), NoParams{}};
}
NodeSpec NodeSpec::resize_fixed(std::string name, int out_h, int out_w, ResizeMode mode) {
  return {OpKind::BilinearResize, std::move(name),
          ResizeParams{TensorShape{out_h, out_w, 1}, 1, mode}};
}
NodeSpec NodeSpec::resize_to_stride(std::string name, int source_stride, ResizeMode mode) {
  return {OpKind::BilinearResize, std::move(name), ResizeParams{std::nullopt, source_stride, mode}};
}
NodeSpec NodeSpec::concat(std::string name) {
  return {OpKind::ConcatChannels, std::move(name), NoParams{}};
}
NodeSpec NodeSpec::slice(std::string name, int begin, int count) {
  return {OpKind::SliceChannels, std::move(name), SliceParams{begin, count}};
}
NodeSpec NodeSpec::add(std::string name) { return {OpKind::Add, std::move(name), NoParams{}}; }
NodeSpec NodeSpec::affine(std::string name, int channels) {
  return {OpKind::Affine, std::move(name), AffineParams{channels}};
}
NodeSpec NodeSpec::relu(std::string name) { return {OpKind::Relu, std::move(name), NoParams{}}; }
NodeSpec NodeSpec::argmax(std::string name) {
  return {OpKind::Argmax, std::move(name), NoParams{}};
}

std::string NodeSpec::param_summary() const {
  std::ostringstream os;
  if (const auto* cp = std::get_if<ConvNodeParams>(&params)) {
    const ConvParams& p = cp->conv;
    os << "k=" << p.kernel_h << "x" << p.kernel_w << " s=" << p.stride << " d=" << p.dilation
       << " g=" << p.groups << " in=" << p.in_c << " out=" << p.out_c;
    if (cp->bias) os << " bias";
  } else if (const auto* gp = std::get_if<GridParams>(&params)) {
    os << "grid=" << gp->grid_h << "x" << gp->grid_w;
  } else if (const auto* rp = std::get_if<ResizeParams>(&params)) {
    if (rp->fixed) {
      os << "to=" << rp->fixed->h << "x" << rp->fixed->w;
    } else {
      os << "to=os" << rp->source_stride;
    }
    os << (rp->mode == ResizeMode::CornerAligned ? " corner" : " half_pixel");
  } else if (const auto* sp = std::get_if<SliceParams>(&params)) {
    os << "channels=[" << sp->begin << "," << sp->begin + sp->count << ")";
  } else if (const auto* ap = std::get_if<AffineParams>(&params)) {
    os << "c=" << ap->channels;
  } else if (const auto* ip = std::get_if<InputParams>(&params)) {
    os << "c=" << ip->channels;
  } else {
    os << "-";
  }
  return os.str();
}

namespace {

bool arity_ok(OpKind kind, std::size_t n) {
  switch (kind) {
    case OpKind::Input: return n == 0;
    case OpKind::ConcatChannels: return n >= 1;
    case OpKind::Add: return n == 2;
    default: return n == 1;
  }
}

}  // namespace

NodeRef Graph::add_node(NodeSpec spec, std::vector<NodeRef> inputs) {
  const std::size_t id = nodes_.size();
  if (spec.name.empty()) throw GraphError("node name must not be empty");
  if (by_name_.contains(spec.name)) throw GraphError("duplicate node name '" + spec.name + "'");
  for (const NodeRef& in : inputs) {
    if (in.id == id) throw CycleError("node '" + spec.name + "' references itself");
    if (in.id > id) {
      throw GraphError("node '" + spec.name + "' references missing node #" +
                       std::to_string(in.id));
    }
  }
  if (!arity_ok(spec.kind, inputs.size())) {
    throw GraphError("node '" + spec.name + "' of kind " + kind_name(spec.kind) + " cannot take " +
                     std::to_string(inputs.size()) + " inputs");
  }
  if (spec.kind == OpKind::Input) {
    if (source_) throw GraphError("graph already has a source node");
    source_ = NodeRef{id};
  }
  by_name_.emplace(spec.name, id);
  nodes_.push_back({std::move(spec), std::move(inputs)});
  return NodeRef{id};
}

void Graph::set_tap(const std::string& name, NodeRef ref) {
  if (ref.id >= nodes_.size()) throw GraphError("tap '" + name + "' references a missing node");
  taps_[name] = ref;
}

std::optional<NodeRef> Graph::find_tap(const std::string& name) const {
  auto it = taps_.find(name);
  if (it == taps_.end()) return std::nullopt;
  return it->second;
}

void Graph::add_output(const std::string& name, NodeRef ref) {
  if (ref.id >= nodes_.size()) throw GraphError("output '" + name + "' references a missing node");
  for (const auto& [existing, _] : outputs_) {
    if (existing == name) throw GraphError("duplicate output '" + name + "'");
  }
  outputs_.emplace_back(name, ref);
}

std::optional<NodeRef> Graph::find(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return NodeRef{it->second};
}

std::vector<NodeRef> topo_order(const Graph& graph) {
  const std::size_t n = graph.size();
  std::vector<std::size_t> pending(n, 0);
  std::vector<std::vector<std::size_t>> consumers(n);
  for (std::size_t id = 0; id < n; ++id) {
    for (const NodeRef& in : graph.nodes()[id].inputs) {
      if (in.id >= n) throw GraphError("dangling edge into node #" + std::to_string(id));
      ++pending[id];
      consumers[in.id].push_back(id);
    }
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t id = 0; id < n; ++id) {
    if (pending[id] == 0) ready.push(id);
  }
  std::vector<NodeRef> order;
  order.reserve(n);
  while (!ready.empty()) {
    const std::size_t id = ready.top();
    ready.pop();
    order.push_back(NodeRef{id});
    for (std::size_t c : consumers[id]) {
      if (--pending[c] == 0) ready.push(c);
    }
  }
  if (order.size() != n) throw CycleError("graph contains a cycle");
  return order;
}

TensorShape node_output_shape(const NodeSpec& spec, const std::vector<TensorShape>& in,
                              const TensorShape& source_shape) {
  switch (spec.kind) {
    case OpKind::Input: {
      const auto& p = std::get<InputParams>(spec.params);
      if (p.channels > 0 && source_shape.c != p.channels) {
        throw ShapeError("source expects " + std::to_string(p.channels) + " channels, got " +
                         source_shape.str());
      }
      return source_shape;
    }
    case OpKind::Conv:
      return conv_output_shape(in[0], std::get<ConvNodeParams>(spec.params).conv);
    case OpKind::DepthwiseConv: {
      const ConvParams& p = std::get<ConvNodeParams>(spec.params).conv;
      if (!p.is_depthwise()) throw ConfigError("depthwise conv requires groups = in_c = out_c");
      return conv_output_shape(in[0], p);
    }
    case OpKind::AvgPoolGrid: {
      const auto& p = std::get<GridParams>(spec.params);
      return pool_grid_output_shape(in[0], p.grid_h, p.grid_w);
    }
    case OpKind::GlobalPool:
      return {1, 1, in[0].c};
    case OpKind::BilinearResize: {
      const auto& p = std::get<ResizeParams>(spec.params);
      if (p.fixed) {
        if (p.fixed->h < 1 || p.fixed->w < 1) throw ShapeError("resize target must be positive");
        return {p.fixed->h, p.fixed->w, in[0].c};
      }
      if (p.source_stride < 1) throw ConfigError("resize stride must be positive");
      return {same_output_size(source_shape.h, p.source_stride),
              same_output_size(source_shape.w, p.source_stride), in[0].c};
    }
    case OpKind::ConcatChannels:
      return concat_output_shape(in);
    case OpKind::SliceChannels: {
      const auto& p = std::get<SliceParams>(spec.params);
      if (p.begin < 0 || p.count < 1 || p.begin + p.count > in[0].c) {
        throw ShapeError("channel slice out of range for " + in[0].str());
      }
      return {in[0].h, in[0].w, p.count};
    }
    case OpKind::Add:
      if (in[0] != in[1]) {
        throw ShapeError("add shape mismatch: " + in[0].str() + " vs " + in[1].str());
      }
      return in[0];
    case OpKind::Affine: {
      const auto& p = std::get<AffineParams>(spec.params);
      if (p.channels != in[0].c) {
        throw ShapeError("affine declared for " + std::to_string(p.channels) +
                         " channels, input is " + in[0].str());
      }
      return in[0];
    }
    case OpKind::Relu:
      return in[0];
    case OpKind::Argmax:
      return {in[0].h, in[0].w, 1};
  }
  throw GraphError("unknown node kind");
}

namespace {

template <class Fn>
auto with_node_context(const std::string& node, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ShapeError& e) {
    throw ShapeError("node '" + node + "': " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError("node '" + node + "': " + e.what());
  } catch (const NumericError& e) {
    throw NumericError("node '" + node + "': " + e.what());
  }
}

}  // namespace

ShapeTable infer_shapes(const Graph& graph, const TensorShape& input_shape) {
  if (!input_shape.valid()) throw ShapeError("invalid input shape " + input_shape.str());
  ShapeTable shapes(graph.size());
  std::vector<TensorShape> in;
  for (const NodeRef ref : topo_order(graph)) {
    const Node& node = graph.node(ref);
    in.clear();
    for (const NodeRef& i : node.inputs) in.push_back(shapes[i.id]);
    shapes[ref.id] = with_node_context(
        node.spec.name, [&] { return node_output_shape(node.spec, in, input_shape); });
  }
  return shapes;
}

namespace {

Tensor run_node(const Node& node, const std::vector<const Tensor*>& in,
                const WeightStore& weights, const TensorShape& source_shape,
                const Tensor& source) {
  const NodeSpec& spec = node.spec;
  switch (spec.kind) {
    case OpKind::Input:
      return source;
    case OpKind::Conv: {
      const auto& p = std::get<ConvNodeParams>(spec.params);
      const WeightArray& k = weights.require(spec.name, spec.name);
      if (k.values.size() != p.conv.kernel_elements()) {
        throw ShapeError("weight entry '" + spec.name + "' has the wrong shape");
      }
      std::optional<std::span<const float>> bias;
      if (p.bias) {
        const WeightArray& b = weights.require(bias_entry(spec.name), spec.name);
        if (b.values.size() != static_cast<std::size_t>(p.conv.out_c)) {
          throw ShapeError("weight entry '" + bias_entry(spec.name) + "' has the wrong shape");
        }
        bias = std::span<const float>(b.values);
      }
      return conv2d(*in[0], k.values, bias, p.conv);
    }
    case OpKind::DepthwiseConv: {
      const auto& p = std::get<ConvNodeParams>(spec.params);
      const WeightArray& k = weights.require(spec.name, spec.name);
      return depthwise_conv2d(*in[0], k.values, p.conv);
    }
    case OpKind::AvgPoolGrid: {
      const auto& p = std::get<GridParams>(spec.params);
      return avg_pool_grid(*in[0], p.grid_h, p.grid_w);
    }
    case OpKind::GlobalPool:
      return global_avg_pool(*in[0]);
    case OpKind::BilinearResize: {
      const auto& p = std::get<ResizeParams>(spec.params);
      const TensorShape target = node_output_shape(spec, {in[0]->shape()}, source_shape);
      return bilinear_resize(*in[0], target.h, target.w, p.mode);
    }
    case OpKind::ConcatChannels:
      return concat_channels(std::span<const Tensor* const>(in));
    case OpKind::SliceChannels: {
      const auto& p = std::get<SliceParams>(spec.params);
      return slice_channels(*in[0], p.begin, p.count);
    }
    case OpKind::Add:
      return add_elementwise(*in[0], *in[1]);
    case OpKind::Affine: {
      const auto& p = std::get<AffineParams>(spec.params);
      const WeightArray& a = weights.require(spec.name, spec.name);
      const auto c = static_cast<std::size_t>(p.channels);
      if (a.values.size() != 2 * c) {
        throw ShapeError("weight entry '" + spec.name + "' has the wrong shape");
      }
      const std::span<const float> all(a.values);
      return affine_channels(*in[0], all.first(c), all.subspan(c, c));
    }
    case OpKind::Relu:
      return relu(*in[0]);
    case OpKind::Argmax: {
      const LabelMap labels = argmax_channels(*in[0]);
      Tensor out({labels.h, labels.w, 1});
      for (std::size_t i = 0; i < labels.labels.size(); ++i) {
        out.data()[i] = static_cast<float>(labels.labels[i]);
      }
      return out;
    }
  }
  throw GraphError("unknown node kind");
}

}  // namespace

ExecutionResult execute(const Graph& graph, const WeightStore& weights, const Tensor& input,
                        const NodeObserver& observer) {
  const ShapeTable shapes = infer_shapes(graph, input.shape());
  const std::vector<NodeRef> order = topo_order(graph);

  std::vector<bool> keep(graph.size(), false);
  for (const auto& [_, ref] : graph.taps()) keep[ref.id] = true;
  for (const auto& [_, ref] : graph.outputs()) keep[ref.id] = true;
  std::vector<std::size_t> last_use(graph.size(), 0);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    for (const NodeRef& in : graph.node(order[pos]).inputs) last_use[in.id] = pos;
  }

  std::vector<std::optional<Tensor>> values(graph.size());
  std::vector<const Tensor*> in;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const NodeRef ref = order[pos];
    const Node& node = graph.node(ref);
    in.clear();
    for (const NodeRef& i : node.inputs) in.push_back(&*values[i.id]);

    const auto start = std::chrono::steady_clock::now();
    Tensor result = with_node_context(node.spec.name, [&] {
      return run_node(node, in, weights, input.shape(), input);
    });
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (result.shape() != shapes[ref.id]) {
      throw ShapeError("node '" + node.spec.name + "' produced " + result.shape().str() +
                       ", inferred " + shapes[ref.id].str());
    }
    if (observer) observer(ref, node, result, seconds);
    values[ref.id] = std::move(result);

    for (const NodeRef& i : node.inputs) {
      if (last_use[i.id] == pos && !keep[i.id]) values[i.id].reset();
    }
  }

  ExecutionResult out;
  for (const auto& [name, ref] : graph.taps()) out.taps.emplace(name, *values[ref.id]);
  for (const auto& [name, ref] : graph.outputs()) out.outputs.emplace(name, *values[ref.id]);
  return out;
}

void dump_graph(const Graph& graph, const ShapeTable& shapes, std::ostream& os) {
  for (std::size_t id = 0; id < graph.size(); ++id) {
    const Node& node = graph.nodes()[id];
    os << id << '\t' << node.spec.name << '\t' << kind_name(node.spec.kind) << '\t'
       << node.spec.param_summary() << '\t' << "inputs=";
    if (node.inputs.empty()) os << '-';
    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      if (i) os << ',';
      os << graph.node(node.inputs[i]).spec.name;
    }
    os << '\t' << (id < shapes.size() ? shapes[id].str() : "?") << '\n';
  }
}

}  // namespace mosaic
