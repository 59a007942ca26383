#include "mosaic/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

#include "mosaic/error.hpp"

namespace mosaic {
namespace {

struct NetpbmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t data_offset = 0;
};

class HeaderParser {
 public:
  explicit HeaderParser(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::string magic() {
    if (bytes_.size() < 2) throw FormatError("file too short for a netpbm header", 0);
    pos_ = 2;
    return {static_cast<char>(bytes_[0]), static_cast<char>(bytes_[1])};
  }

  int number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 1'000'000) throw FormatError(std::string(what) + " is too large", start);
      ++pos_;
    }
    if (pos_ == start) throw FormatError(std::string("expected ") + what, start);
    return static_cast<int>(v);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t end_of_header() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw FormatError("missing whitespace after header", pos_);
    }
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

NetpbmHeader parse_header(std::span<const std::uint8_t> bytes, const char* expected_magic,
                          std::size_t channels) {
  HeaderParser p(bytes);
  NetpbmHeader h;
  h.magic = p.magic();
  if (h.magic != expected_magic) {
    throw FormatError("unsupported magic '" + h.magic + "', expected " + expected_magic, 0);
  }
  h.width = p.number("width");
  h.height = p.number("height");
  h.maxval = p.number("maxval");
  h.data_offset = p.end_of_header();
  if (h.width < 1 || h.height < 1) throw FormatError("image dimensions must be positive", 2);
  if (h.maxval != 255) {
    throw FormatError("unsupported bit depth (maxval " + std::to_string(h.maxval) +
                      "), only 8-bit images are accepted", 2);
  }
  const std::size_t need = static_cast<std::size_t>(h.width) * h.height * channels;
  if (bytes.size() - h.data_offset < need) {
    throw FormatError("truncated raster", bytes.size());
  }
  return h;
}

std::vector<std::uint8_t> header_bytes(const char* magic, int h, int w) {
  const std::string s = std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) +
                        "\n255\n";
  return {s.begin(), s.end()};
}

}  // namespace

float pixel_to_unit(std::uint8_t v) { return static_cast<float>(v / 127.5 - 1.0); }

std::uint8_t unit_to_pixel(float x) {
  const double v = std::round((static_cast<double>(x) + 1.0) * 127.5);
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

Tensor decode_ppm(std::span<const std::uint8_t> bytes) {
  const NetpbmHeader h = parse_header(bytes, "P6", 3);
  Tensor t({h.height, h.width, 3});
  auto out = t.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pixel_to_unit(bytes[h.data_offset + i]);
  return t;
}

Tensor read_image_ppm(const std::filesystem::path& path) { return decode_ppm(read_file_bytes(path)); }

std::vector<std::uint8_t> encode_ppm(int h, int w, std::span<const std::uint8_t> rgb) {
  if (h < 1 || w < 1 || rgb.size() != static_cast<std::size_t>(h) * w * 3) {
    throw ShapeError("PPM raster size does not match dimensions");
  }
  auto out = header_bytes("P6", h, w);
  out.insert(out.end(), rgb.begin(), rgb.end());
  return out;
}

std::vector<std::uint8_t> encode_labelmap_pgm(const LabelMap& map) {
  if (map.h < 1 || map.w < 1) throw ShapeError("label map must be non-empty");
  auto out = header_bytes("P5", map.h, map.w);
  out.reserve(out.size() + map.labels.size());
  for (std::int32_t v : map.labels) {
    if (v < 0 || v > 255) {
      throw FormatError("label " + std::to_string(v) + " does not fit an 8-bit PGM");
    }
    out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

LabelMap decode_labelmap_pgm(std::span<const std::uint8_t> bytes) {
  const NetpbmHeader h = parse_header(bytes, "P5", 1);
  LabelMap map(h.height, h.width);
  for (std::size_t i = 0; i < map.labels.size(); ++i) map.labels[i] = bytes[h.data_offset + i];
  return map;
}

void write_labelmap_pgm(const LabelMap& map, const std::filesystem::path& path) {
  write_file_bytes(path, encode_labelmap_pgm(map));
}

LabelMap read_labelmap_pgm(const std::filesystem::path& path) {
  return decode_labelmap_pgm(read_file_bytes(path));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("failed writing '" + path.string() + "'");
}

}  // namespace mosaic
