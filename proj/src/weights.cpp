#include "mosaic/weights.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "mosaic/error.hpp"
#include "mosaic/graph.hpp"
#include "mosaic/rng.hpp"

namespace mosaic {

static_assert(std::endian::native == std::endian::little,
              "MOSW encoding assumes a little-endian host");

std::size_t WeightArray::expected_size() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void WeightStore::insert(const std::string& name, WeightArray array) {
  if (array.values.size() != array.expected_size()) {
    throw ConfigError("weight entry '" + name + "' holds " + std::to_string(array.values.size()) +
                      " values but its dims require " + std::to_string(array.expected_size()));
  }
  if (!entries_.emplace(name, std::move(array)).second) {
    throw ConfigError("duplicate weight entry '" + name + "'");
  }
}

const WeightArray* WeightStore::find(const std::string& name) const {
  auto it = entries_.find(name);
  return it == entries_.end() ? nullptr : &it->second;
}

const WeightArray& WeightStore::require(const std::string& name, const std::string& node) const {
  const WeightArray* a = find(name);
  if (!a) throw Error("missing weight entry '" + name + "' for node '" + node + "'");
  return *a;
}

std::string bias_entry(const std::string& node_name) { return node_name + "/bias"; }

std::vector<WeightRequirement> weight_requirements(const Graph& graph) {
  std::vector<WeightRequirement> reqs;
  for (const Node& node : graph.nodes()) {
    const NodeSpec& spec = node.spec;
    if (spec.kind == OpKind::Conv || spec.kind == OpKind::DepthwiseConv) {
      const auto& cp = std::get<ConvNodeParams>(spec.params);
      const ConvParams& p = cp.conv;
      const auto icg = static_cast<std::uint32_t>(p.in_c / p.groups);
      reqs.push_back({spec.name, spec.name,
                      {static_cast<std::uint32_t>(p.kernel_h),
                       static_cast<std::uint32_t>(p.kernel_w), icg,
                       static_cast<std::uint32_t>(p.out_c)},
                      WeightRequirement::Role::Kernel,
                      static_cast<int>(p.kernel_h * p.kernel_w * icg)});
      if (cp.bias) {
        reqs.push_back({bias_entry(spec.name), spec.name,
                        {static_cast<std::uint32_t>(p.out_c)},
                        WeightRequirement::Role::Bias, 1});
      }
    } else if (spec.kind == OpKind::Affine) {
      const auto c = static_cast<std::uint32_t>(std::get<AffineParams>(spec.params).channels);
      reqs.push_back({spec.name, spec.name, {2, c}, WeightRequirement::Role::Affine, 1});
    }
  }
  return reqs;
}

void validate_weights(const Graph& graph, const WeightStore& store) {
  std::set<std::string> expected;
  for (const auto& req : weight_requirements(graph)) {
    const WeightArray& a = store.require(req.entry, req.node);
    if (a.dims != req.dims) {
      throw ShapeError("weight entry '" + req.entry + "' for node '" + req.node +
                       "' has mismatched dims");
    }
    expected.insert(req.entry);
  }
  for (const auto& [name, _] : store.entries()) {
    if (!expected.contains(name)) throw ConfigError("orphan weight entry '" + name + "'");
  }
}

WeightStore init_weights(const Graph& graph, std::uint64_t seed) {
  WeightStore store;
  for (const auto& req : weight_requirements(graph)) {
    WeightArray a;
    a.dims = req.dims;
    a.values.assign(a.expected_size(), 0.0f);
    switch (req.role) {
      case WeightRequirement::Role::Kernel: {
        CounterRng rng(stream_key(seed, req.entry));
        const double scale = 1.0 / std::sqrt(static_cast<double>(req.fan_in));
        for (float& v : a.values) v = static_cast<float>(rng.next_normal() * scale);
        break;
      }
      case WeightRequirement::Role::Bias:
        break;
      case WeightRequirement::Role::Affine: {
        const std::size_t c = req.dims[1];
        std::fill_n(a.values.begin(), c, 1.0f);
        break;
      }
    }
    store.insert(req.entry, std::move(a));
  }
  return store;
}

namespace {

constexpr char kMagic[4] = {'M', 'O', 'S', 'W'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("truncated weight file while reading ") + what, pos_);
    }
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::uint32_t u32(const char* what) {
    auto s = take(4, what);
    return static_cast<std::uint32_t>(s[0]) | static_cast<std::uint32_t>(s[1]) << 8 |
           static_cast<std::uint32_t>(s[2]) << 16 | static_cast<std::uint32_t>(s[3]) << 24;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_weights(const WeightStore& store) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kWeightFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, a] : store.entries()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(a.dims.size()));
    for (auto d : a.dims) put_u32(out, d);
    for (float v : a.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

WeightStore decode_weights(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  auto magic = in.take(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError("bad magic, expected MOSW", 0);
  const std::size_t version_at = in.offset();
  const std::uint32_t version = in.u32("version");
  if (version != kWeightFormatVersion) {
    throw FormatError("unsupported weight format version " + std::to_string(version), version_at);
  }
  const std::uint32_t count = in.u32("entry count");

  WeightStore store;
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::size_t entry_at = in.offset();
    const std::uint32_t name_len = in.u32("name length");
    auto name_bytes = in.take(name_len, "entry name");
    std::string name(name_bytes.begin(), name_bytes.end());
    const std::uint32_t rank = in.u32("rank");
    WeightArray a;
    std::uint64_t elements = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      a.dims.push_back(in.u32("dims"));
      elements *= a.dims.back();
      if (elements > bytes.size()) {
        throw FormatError("entry '" + name + "' declares more values than the file holds",
                          in.offset());
      }
    }
    auto payload = in.take(static_cast<std::size_t>(elements) * 4, "payload");
    a.values.resize(static_cast<std::size_t>(elements));
    for (std::size_t i = 0; i < a.values.size(); ++i) {
      const std::uint32_t bits = static_cast<std::uint32_t>(payload[4 * i]) |
                                 static_cast<std::uint32_t>(payload[4 * i + 1]) << 8 |
                                 static_cast<std::uint32_t>(payload[4 * i + 2]) << 16 |
                                 static_cast<std::uint32_t>(payload[4 * i + 3]) << 24;
      a.values[i] = std::bit_cast<float>(bits);
    }
    if (store.find(name)) {
      throw FormatError("duplicate weight entry '" + name + "'", entry_at);
    }
    store.insert(name, std::move(a));
  }
  if (!in.done()) throw FormatError("trailing bytes after last entry", in.offset());
  return store;
}

void save_weights(const WeightStore& store, const std::filesystem::path& path) {
  const auto bytes = encode_weights(store);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("failed writing '" + path.string() + "'");
}

WeightStore load_weights(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return decode_weights(bytes);
}

}  // namespace mosaic
