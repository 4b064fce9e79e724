#include "spikekit/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <fstream>

namespace spikekit {

namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> slurp(const fs::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open image '" + path.string() + "'");
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
}

std::string lower_extension(const fs::path& path)
{
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

} // namespace

GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes, const std::string& origin)
{
  std::size_t pos = 0;
  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError(origin + ": " + what);
  };
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n')
          ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&](const char* what) {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos]))
      throw fail(std::string("expected ") + what);
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > (1u << 24))
        throw fail(std::string(what) + " too large");
    }
    return v;
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    throw fail("not a binary PGM (P5)");
  pos = 2;
  const std::size_t width = read_uint("width");
  const std::size_t height = read_uint("height");
  const std::size_t maxval = read_uint("maxval");
  if (maxval == 0 || maxval > 255)
    throw fail("only 8-bit PGM is supported, maxval " + std::to_string(maxval));
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    throw fail("missing whitespace after header");
  ++pos;
  if (bytes.size() - pos < width * height)
    throw fail("truncated pixel data");

  std::vector<std::uint8_t> pixels(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                   bytes.begin() + static_cast<std::ptrdiff_t>(pos + width * height));
  if (maxval != 255)
    for (auto& p : pixels)
      p = static_cast<std::uint8_t>(std::min<std::size_t>(255, (p * 255 + maxval / 2) / maxval));
  return GrayImage(height, width, std::move(pixels));
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& image)
{
  const std::string header =
    "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels().begin(), image.pixels().end());
  return out;
}

GrayImage read_pgm(const fs::path& path)
{
  return decode_pgm(slurp(path), path.string());
}

void write_pgm(const GrayImage& image, const fs::path& path)
{
  const auto bytes = encode_pgm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw IoError("write to '" + path.string() + "' failed");
}

GrayImage read_png(const fs::path& path)
{
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str()))
    throw ParseError(path.string() + ": " + img.message);
  img.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, pixels.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw ParseError(path.string() + ": " + msg);
  }
  return GrayImage(img.height, img.width, std::move(pixels));
}

void write_png(const GrayImage& image, const fs::path& path)
{
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, image.pixels().data(), 0, nullptr))
    throw IoError(path.string() + ": " + img.message);
}

GrayImage read_image(const fs::path& path)
{
  const std::string ext = lower_extension(path);
  if (ext == ".png")
    return read_png(path);
  if (ext == ".pgm")
    return read_pgm(path);
  throw ParseError(path.string() + ": unsupported image extension '" + ext + "'");
}

void write_image(const GrayImage& image, const fs::path& path)
{
  if (lower_extension(path) == ".png")
    write_png(image, path);
  else
    write_pgm(image, path);
}

bool is_image_path(const fs::path& path)
{
  const std::string ext = lower_extension(path);
  return ext == ".pgm" || ext == ".png";
}

} // namespace spikekit
