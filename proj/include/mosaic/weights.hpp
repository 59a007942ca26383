#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace mosaic {

class Graph;

struct WeightArray {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;

  std::size_t expected_size() const;
  friend bool operator==(const WeightArray&, const WeightArray&) = default;
};

// Named parameter arrays. Conv kernels are stored under the node name in
// (kernel_h, kernel_w, in_c/groups, out_c) order, a conv bias under
// "<node>/bias", and an affine node under its name as a (2, c) array whose
// first row is the scale and second row the bias.
class WeightStore {
 public:
  // Throws ConfigError on a duplicate name or a dims/value-count mismatch.
  void insert(const std::string& name, WeightArray array);
  const WeightArray* find(const std::string& name) const;
  // Throws Error naming the node when absent.
  const WeightArray& require(const std::string& name, const std::string& node) const;

  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, WeightArray>& entries() const { return entries_; }

  friend bool operator==(const WeightStore&, const WeightStore&) = default;

 private:
  std::map<std::string, WeightArray> entries_;
};

std::string bias_entry(const std::string& node_name);

struct WeightRequirement {
  std::string entry;
  std::string node;
  std::vector<std::uint32_t> dims;
  enum class Role { Kernel, Bias, Affine } role = Role::Kernel;
  int fan_in = 1;
};

std::vector<WeightRequirement> weight_requirements(const Graph& graph);

// Every requirement present with matching dims and no orphan entries.
void validate_weights(const Graph& graph, const WeightStore& store);

// Counter-based deterministic initialization: kernels ~ N(0, 1/fan_in),
// biases 0, affine scale 1 and bias 0.
WeightStore init_weights(const Graph& graph, std::uint64_t seed);

// MOSW binary format, little-endian:
//   "MOSW" | version u32 | count u32 |
//   per entry: name_len u32 | name | rank u32 | dims u32[rank] | f32[prod(dims)]
inline constexpr std::uint32_t kWeightFormatVersion = 1;

std::vector<std::uint8_t> encode_weights(const WeightStore& store);
WeightStore decode_weights(std::span<const std::uint8_t> bytes);
void save_weights(const WeightStore& store, const std::filesystem::path& path);
WeightStore load_weights(const std::filesystem::path& path);

}  // namespace mosaic
