#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mosaic/tensor.hpp"

namespace mosaic {

// Binary 8-bit PPM (P6). Pixels map to [-1, 1] via x / 127.5 - 1.
Tensor decode_ppm(std::span<const std::uint8_t> bytes);
Tensor read_image_ppm(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_ppm(int h, int w, std::span<const std::uint8_t> rgb);

float pixel_to_unit(std::uint8_t v);
std::uint8_t unit_to_pixel(float x);

// Binary 8-bit PGM (P5) holding raw label bytes; labels must be < 256.
std::vector<std::uint8_t> encode_labelmap_pgm(const LabelMap& map);
LabelMap decode_labelmap_pgm(std::span<const std::uint8_t> bytes);
void write_labelmap_pgm(const LabelMap& map, const std::filesystem::path& path);
LabelMap read_labelmap_pgm(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace mosaic
