#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "spikekit/image.hpp"

namespace spikekit {

/// Binary P5 PGM with maxval 255. Throws ParseError on malformed input.
GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes, const std::string& origin = "<pgm>");
std::vector<std::uint8_t> encode_pgm(const GrayImage& image);

GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const GrayImage& image, const std::filesystem::path& path);

/// 8-bit PNG; colour images are converted to gray.
GrayImage read_png(const std::filesystem::path& path);
void write_png(const GrayImage& image, const std::filesystem::path& path);

/// Dispatches on the extension (.pgm or .png).
GrayImage read_image(const std::filesystem::path& path);
void write_image(const GrayImage& image, const std::filesystem::path& path);

bool is_image_path(const std::filesystem::path& path);

} // namespace spikekit
