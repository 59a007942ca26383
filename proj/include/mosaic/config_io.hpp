#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mosaic/arch.hpp"

namespace mosaic {

// Flat key=value model configuration. Blank lines and lines starting with
// '#' are ignored. Recognised keys:
//   m, num_classes, input_h, input_w, enc_filters, dec_filters,
//   pyramid_bins (comma list), use_group_conv (true/false), group_kernels
//   (comma list), skips (comma list of e.g. 8-C,4-S; "0" or empty for none),
//   aggregation_width_mode (encoder|decoder), dilation_rows (comma list,
//   may be empty), resize_mode (corner|half_pixel).
// Omitted keys keep their defaults; unknown keys are an error. Every error
// message names the offending key.
ModelConfig parse_model_config(const std::string& text);
ModelConfig load_model_config(const std::filesystem::path& path);
std::string format_model_config(const ModelConfig& cfg);

int parse_int(const std::string& text, const std::string& key);
bool parse_bool(const std::string& text, const std::string& key);
std::vector<int> parse_int_list(const std::string& text, const std::string& key);
std::vector<SkipSpec> parse_skip_list(const std::string& text);
std::string format_skip_list(const std::vector<SkipSpec>& skips);

}  // namespace mosaic
