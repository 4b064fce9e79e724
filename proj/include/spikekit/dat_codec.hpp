#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "spikekit/spike_stream.hpp"

namespace spikekit {

enum class LabelType { raw, image, flow, depth, detection, tracking, recognition };

std::string_view to_string(LabelType type);
/// Throws ParseError for unknown names.
LabelType parse_label_type(std::string_view name);

/// Recording properties kept in the `.info` sidecar next to a `.dat` file.
struct StreamMeta
{
  std::size_t width = 0;
  std::size_t height = 0;
  double polling_interval_us = 25.0;
  LabelType label_type = LabelType::raw;
  std::map<std::string, std::string> extra;

  StreamGeometry geometry(std::size_t num_steps = 0) const
  {
    return StreamGeometry{height, width, num_steps};
  }

  // Throws DomainError on zero dimensions or a non-positive interval.
  void validate() const;

  friend bool operator==(const StreamMeta&, const StreamMeta&) = default;
};

/// Reads a headerless packed spike file. Throws IoError when the file cannot be
/// read and CorruptFileError when its size is not a whole number of frames.
SpikeStream read_dat(const std::filesystem::path& path, const StreamMeta& meta,
                     const DecodeOptions& options = {});

/// Reads frames [start, start + length) without loading the rest of the file.
SpikeStream read_dat_block(const std::filesystem::path& path, const StreamMeta& meta,
                           std::size_t start, std::size_t length);

/// Number of whole frames in a spike file; CorruptFileError on a partial frame.
std::size_t dat_frame_count(const std::filesystem::path& path, const StreamMeta& meta);

void write_dat(const SpikeStream& stream, const std::filesystem::path& path);

/// `key = value` lines, `#` comments. width and height are required.
StreamMeta parse_meta(std::string_view text, std::string_view origin = "<meta>");
std::string format_meta(const StreamMeta& meta);

StreamMeta read_meta(const std::filesystem::path& path);
void write_meta(const StreamMeta& meta, const std::filesystem::path& path);

/// `<stem>.dat` pairs with `<stem>.info` in the same directory.
std::filesystem::path sidecar_path(const std::filesystem::path& dat_path);

/// Shared helpers for the key=value formats used across the project.
std::string trim(std::string_view text);
std::string format_number(double value);

} // namespace spikekit
