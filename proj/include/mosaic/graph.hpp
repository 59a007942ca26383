#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "mosaic/kernels.hpp"
#include "mosaic/tensor.hpp"

namespace mosaic {

class WeightStore;

enum class OpKind {
  Input,
  Conv,
  DepthwiseConv,
  AvgPoolGrid,
  GlobalPool,
  BilinearResize,
  ConcatChannels,
  SliceChannels,
  Add,
  Affine,
  Relu,
  Argmax,
};

const char* kind_name(OpKind kind);

struct NodeRef {
  std::size_t id = 0;
  friend bool operator==(const NodeRef&, const NodeRef&) = default;
  friend auto operator<=>(const NodeRef&, const NodeRef&) = default;
};

struct NoParams {};
struct InputParams {
  int channels = 0;  // 0 accepts any channel count
};
struct ConvNodeParams {
  ConvParams conv;
  bool bias = false;
};
struct GridParams {
  int grid_h = 1;
  int grid_w = 1;
};
// A resize either targets a fixed size or the spatial size the graph source
// has at a given output stride, ceil(source / stride). The latter keeps a
// graph valid at any input resolution.
struct ResizeParams {
  std::optional<TensorShape> fixed;
  int source_stride = 1;
  ResizeMode mode = ResizeMode::CornerAligned;
};
struct SliceParams {
  int begin = 0;
  int count = 1;
};
struct AffineParams {
  int channels = 1;
};

using NodeParams = std::variant<NoParams, InputParams, ConvNodeParams, GridParams, ResizeParams,
                                SliceParams, AffineParams>;

struct NodeSpec {
  OpKind kind = OpKind::Relu;
  std::string name;
  NodeParams params;

  static NodeSpec input(std::string name, int channels);
  static NodeSpec conv(std::string name, const ConvParams& p, bool bias = false);
  static NodeSpec depthwise(std::string name, const ConvParams& p);
  static NodeSpec pool_grid(std::string name, int grid_h, int grid_w);
  static NodeSpec global_pool(std::string name);
  static NodeSpec resize_fixed(std::string name, int out_h, int out_w,
                               ResizeMode mode = ResizeMode::CornerAligned);
  static NodeSpec resize_to_stride(std::string name, int source_stride,
                                   ResizeMode mode = ResizeMode::CornerAligned);
  static NodeSpec concat(std::string name);
  static NodeSpec slice(std::string name, int begin, int count);
  static NodeSpec add(std::string name);
  static NodeSpec affine(std::string name, int channels);
  static NodeSpec relu(std::string name);
  static NodeSpec argmax(std::string name);

  // One-line parameter summary, e.g. "k=3x3 s=2 d=1 g=1 in=3 out=32".
  std::string param_summary() const;
};

struct Node {
  NodeSpec spec;
  std::vector<NodeRef> inputs;
};

using ShapeTable = std::vector<TensorShape>;

class Graph {
 public:
  NodeRef add_node(NodeSpec spec, std::vector<NodeRef> inputs);

  void set_tap(const std::string& name, NodeRef ref);
  std::optional<NodeRef> find_tap(const std::string& name) const;
  const std::map<std::string, NodeRef>& taps() const { return taps_; }

  void add_output(const std::string& name, NodeRef ref);
  const std::vector<std::pair<std::string, NodeRef>>& outputs() const { return outputs_; }

  std::optional<NodeRef> find(const std::string& name) const;
  std::optional<NodeRef> source() const { return source_; }

  std::size_t size() const { return nodes_.size(); }
  const Node& node(NodeRef ref) const { return nodes_.at(ref.id); }
  const std::vector<Node>& nodes() const { return nodes_; }

 private:
  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> by_name_;
  std::map<std::string, NodeRef> taps_;
  std::vector<std::pair<std::string, NodeRef>> outputs_;
  std::optional<NodeRef> source_;
};

// Every node appears after all of its inputs; ties resolve by insertion order.
std::vector<NodeRef> topo_order(const Graph& graph);

// Output shape of one node given its input shapes. The source shape resolves
// stride-relative resize targets.
TensorShape node_output_shape(const NodeSpec& spec, const std::vector<TensorShape>& in,
                              const TensorShape& source_shape);

// Shape of every node, indexed by NodeRef::id. Errors name the failing node.
ShapeTable infer_shapes(const Graph& graph, const TensorShape& input_shape);

using NodeObserver =
    std::function<void(NodeRef ref, const Node& node, const Tensor& result, double seconds)>;

struct ExecutionResult {
  std::map<std::string, Tensor> outputs;
  std::map<std::string, Tensor> taps;
};

// Runs every node in topological order. Intermediate tensors are released
// after their last consumer; taps and outputs are kept.
ExecutionResult execute(const Graph& graph, const WeightStore& weights, const Tensor& input,
                        const NodeObserver& observer = {});

// Line-oriented listing: index, name, kind, params, inputs, inferred shape.
void dump_graph(const Graph& graph, const ShapeTable& shapes, std::ostream& os);

}  // namespace mosaic
