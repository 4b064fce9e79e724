#include "spikekit/dat_codec.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <system_error>

namespace spikekit {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, 7> kLabelNames = {
  "raw", "image", "flow", "depth", "detection", "tracking", "recognition"};

std::size_t parse_dimension(const std::string& key, const std::string& value,
                            std::string_view origin)
{
  std::size_t out = 0;
  const auto* first = value.data();
  const auto* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last || value.empty())
    throw ParseError(std::string(origin) + ": '" + key + "' must be a non-negative integer, got '" +
                     value + "'");
  return out;
}

double parse_real(const std::string& key, const std::string& value, std::string_view origin)
{
  double out = 0.0;
  const auto* first = value.data();
  const auto* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last || value.empty() || !std::isfinite(out))
    throw ParseError(std::string(origin) + ": '" + key + "' must be a number, got '" + value + "'");
  return out;
}

std::uintmax_t file_size_or_throw(const fs::path& path)
{
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  if (ec)
    throw IoError("cannot stat '" + path.string() + "': " + ec.message());
  return size;
}

} // namespace

std::string_view to_string(LabelType type)
{
  return kLabelNames[static_cast<std::size_t>(type)];
}

LabelType parse_label_type(std::string_view name)
{
  for (std::size_t i = 0; i < kLabelNames.size(); ++i)
    if (kLabelNames[i] == name)
      return static_cast<LabelType>(i);
  throw ParseError("unknown label type '" + std::string(name) + "'");
}

void StreamMeta::validate() const
{
  if (width < 1 || height < 1)
    throw DomainError("meta needs width >= 1 and height >= 1, got " + std::to_string(width) + "x" +
                      std::to_string(height));
  if (!(polling_interval_us > 0.0))
    throw DomainError("polling_interval_us must be positive, got " +
                      format_number(polling_interval_us));
}

std::string trim(std::string_view text)
{
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  std::size_t b = 0;
  std::size_t e = text.size();
  while (b < e && is_space(text[b]))
    ++b;
  while (e > b && is_space(text[e - 1]))
    --e;
  return std::string(text.substr(b, e - b));
}

std::string format_number(double value)
{
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

std::size_t dat_frame_count(const fs::path& path, const StreamMeta& meta)
{
  meta.validate();
  const auto size = file_size_or_throw(path);
  const std::size_t bpf = meta.geometry().bytes_per_frame();
  if (size % bpf != 0)
    throw CorruptFileError("'" + path.string() + "' holds " + std::to_string(size) +
                           " bytes, not a multiple of the " + std::to_string(bpf) +
                           "-byte frame; " + std::to_string(size % bpf) + " trailing bytes");
  return static_cast<std::size_t>(size / bpf);
}

SpikeStream read_dat(const fs::path& path, const StreamMeta& meta, const DecodeOptions& options)
{
  const std::size_t frames = dat_frame_count(path, meta);
  const StreamGeometry g = meta.geometry(frames);
  std::vector<std::uint8_t> bytes(g.total_bytes());
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open '" + path.string() + "' for reading");
  if (!bytes.empty() &&
      !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size())))
    throw IoError("short read from '" + path.string() + "'");
  if (options.flip_vertical)
    return from_packed(bytes, g, options);
  return SpikeStream(g, std::move(bytes));
}

SpikeStream read_dat_block(const fs::path& path, const StreamMeta& meta, std::size_t start,
                           std::size_t length)
{
  const std::size_t frames = dat_frame_count(path, meta);
  if (start > frames || length > frames - start)
    throw RangeError("block [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") outside '" + path.string() + "' with " + std::to_string(frames) +
                     " frames");
  const StreamGeometry g = meta.geometry(length);
  std::vector<std::uint8_t> bytes(g.total_bytes());
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open '" + path.string() + "' for reading");
  in.seekg(static_cast<std::streamoff>(start * g.bytes_per_frame()));
  if (!bytes.empty() &&
      !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size())))
    throw IoError("short read from '" + path.string() + "'");
  return SpikeStream(g, std::move(bytes));
}

void write_dat(const SpikeStream& stream, const fs::path& path)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot open '" + path.string() + "' for writing");
  const auto bytes = stream.data();
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out)
    throw IoError("write to '" + path.string() + "' failed");
}

StreamMeta parse_meta(std::string_view text, std::string_view origin)
{
  StreamMeta meta;
  bool have_width = false;
  bool have_height = false;
  std::size_t line_no = 0;

  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;

    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#')
      continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ParseError(std::string(origin) + ":" + std::to_string(line_no) +
                       ": expected 'key = value'");
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));
    if (key.empty())
      throw ParseError(std::string(origin) + ":" + std::to_string(line_no) + ": empty key");

    if (key == "width") {
      meta.width = parse_dimension(key, value, origin);
      have_width = true;
    } else if (key == "height") {
      meta.height = parse_dimension(key, value, origin);
      have_height = true;
    } else if (key == "polling_interval_us") {
      meta.polling_interval_us = parse_real(key, value, origin);
    } else if (key == "label_type") {
      meta.label_type = parse_label_type(value);
    } else {
      meta.extra[key] = value;
    }
  }

  if (!have_width)
    throw SchemaError(std::string(origin) + ": missing required key 'width'");
  if (!have_height)
    throw SchemaError(std::string(origin) + ": missing required key 'height'");
  meta.validate();
  return meta;
}

std::string format_meta(const StreamMeta& meta)
{
  std::string out;
  out += "width = " + std::to_string(meta.width) + "\n";
  out += "height = " + std::to_string(meta.height) + "\n";
  out += "polling_interval_us = " + format_number(meta.polling_interval_us) + "\n";
  out += "label_type = " + std::string(to_string(meta.label_type)) + "\n";
  for (const auto& [key, value] : meta.extra)
    out += key + " = " + value + "\n";
  return out;
}

StreamMeta read_meta(const fs::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open meta file '" + path.string() + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_meta(text, path.string());
}

void write_meta(const StreamMeta& meta, const fs::path& path)
{
  meta.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot open '" + path.string() + "' for writing");
  out << format_meta(meta);
  out.flush();
  if (!out)
    throw IoError("write to '" + path.string() + "' failed");
}

fs::path sidecar_path(const fs::path& dat_path)
{
  fs::path p = dat_path;
  p.replace_extension(".info");
  return p;
}

} // namespace spikekit
