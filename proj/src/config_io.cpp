#include "mosaic/config_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "mosaic/error.hpp"

namespace mosaic {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, ',')) out.push_back(trim(item));
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

int parse_int(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  int value = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError("key '" + key + "': '" + text + "' is not an integer");
  }
  return value;
}

bool parse_bool(const std::string& text, const std::string& key) {
  std::string t = trim(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "true" || t == "1" || t == "y" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "n" || t == "no" || t == "off") return false;
  throw ConfigError("key '" + key + "': '" + text + "' is not a boolean");
}

std::vector<int> parse_int_list(const std::string& text, const std::string& key) {
  std::vector<int> out;
  if (trim(text).empty()) return out;
  for (const auto& item : split_commas(text)) out.push_back(parse_int(item, key));
  return out;
}

std::vector<SkipSpec> parse_skip_list(const std::string& text) {
  const std::string t = trim(text);
  std::vector<SkipSpec> out;
  if (t.empty() || t == "0" || t == "-" || t == "none") return out;
  for (const auto& item : split_commas(t)) {
    try {
      out.push_back(SkipSpec::parse(item));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("key 'skips': ") + e.what());
    }
  }
  return out;
}

std::string format_skip_list(const std::vector<SkipSpec>& skips) {
  if (skips.empty()) return "0";
  std::string s;
  for (std::size_t i = 0; i < skips.size(); ++i) s += (i ? "," : "") + skips[i].token();
  return s;
}

ModelConfig parse_model_config(const std::string& text) {
  ModelConfig cfg;
  std::set<std::string> seen;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError("key '" + key + "' given twice");

    if (key == "m") {
      cfg.m = parse_int(value, key);
    } else if (key == "num_classes") {
      cfg.num_classes = parse_int(value, key);
    } else if (key == "input_h") {
      cfg.input_h = parse_int(value, key);
    } else if (key == "input_w") {
      cfg.input_w = parse_int(value, key);
    } else if (key == "enc_filters") {
      cfg.encoder.enc_filters = parse_int(value, key);
    } else if (key == "dec_filters") {
      cfg.decoder.dec_filters = parse_int(value, key);
    } else if (key == "pyramid_bins") {
      cfg.encoder.pyramid_bins = parse_int_list(value, key);
    } else if (key == "use_group_conv") {
      cfg.encoder.use_group_conv = parse_bool(value, key);
    } else if (key == "group_kernels") {
      cfg.encoder.group_kernels = parse_int_list(value, key);
    } else if (key == "skips") {
      cfg.decoder.skips = parse_skip_list(value);
    } else if (key == "aggregation_width_mode") {
      if (value == "encoder" || value == "EncoderWidth") {
        cfg.aggregation_width_mode = AggregationWidthMode::EncoderWidth;
      } else if (value == "decoder" || value == "DecoderWidth") {
        cfg.aggregation_width_mode = AggregationWidthMode::DecoderWidth;
      } else {
        throw ConfigError("key 'aggregation_width_mode': expected encoder or decoder");
      }
    } else if (key == "dilation_rows") {
      cfg.dilation_rows = parse_int_list(value, key);
    } else if (key == "resize_mode") {
      if (value == "corner") {
        cfg.resize_mode = ResizeMode::CornerAligned;
      } else if (value == "half_pixel") {
        cfg.resize_mode = ResizeMode::HalfPixel;
      } else {
        throw ConfigError("key 'resize_mode': expected corner or half_pixel");
      }
    } else {
      throw ConfigError("unknown key '" + key + "'");
    }
  }

  // Map invariant violations back to the key that carries them.
  auto check = [](const std::string& key, bool ok, const std::string& why) {
    if (!ok) throw ConfigError("key '" + key + "': " + why);
  };
  const auto& bins = cfg.encoder.pyramid_bins;
  check("pyramid_bins", !bins.empty(), "must not be empty");
  check("pyramid_bins", std::all_of(bins.begin(), bins.end(), [](int b) { return b >= 1; }),
        "entries must be >= 1");
  check("pyramid_bins", std::adjacent_find(bins.begin(), bins.end(), std::greater_equal<>()) ==
                            bins.end(),
        "must be strictly increasing");
  check("m", cfg.m > 0, "must be positive");
  check("num_classes", cfg.num_classes >= 1, "must be >= 1");
  check("input_h", cfg.input_h > 0 && cfg.input_h % 16 == 0, "must be a positive multiple of 16");
  check("input_w", cfg.input_w > 0 && cfg.input_w % 16 == 0, "must be a positive multiple of 16");
  check("enc_filters", cfg.encoder.enc_filters > 0, "must be positive");
  check("dec_filters", cfg.decoder.dec_filters > 0, "must be positive");
  check("group_kernels", !cfg.encoder.group_kernels.empty(), "must not be empty");
  cfg.validate();
  return cfg;
}

ModelConfig load_model_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_model_config(ss.str());
}

std::string format_model_config(const ModelConfig& cfg) {
  std::ostringstream os;
  os << "m=" << cfg.m << '\n'
     << "num_classes=" << cfg.num_classes << '\n'
     << "input_h=" << cfg.input_h << '\n'
     << "input_w=" << cfg.input_w << '\n'
     << "enc_filters=" << cfg.encoder.enc_filters << '\n'
     << "dec_filters=" << cfg.decoder.dec_filters << '\n'
     << "pyramid_bins=" << join_ints(cfg.encoder.pyramid_bins) << '\n'
     << "use_group_conv=" << (cfg.encoder.use_group_conv ? "true" : "false") << '\n'
     << "group_kernels=" << join_ints(cfg.encoder.group_kernels) << '\n'
     << "skips=" << format_skip_list(cfg.decoder.skips) << '\n'
     << "aggregation_width_mode="
     << (cfg.aggregation_width_mode == AggregationWidthMode::EncoderWidth ? "encoder" : "decoder")
     << '\n'
     << "dilation_rows=" << join_ints(cfg.dilation_rows) << '\n'
     << "resize_mode=" << (cfg.resize_mode == ResizeMode::CornerAligned ? "corner" : "half_pixel")
     << '\n';
  return os.str();
}

}  // namespace mosaic
