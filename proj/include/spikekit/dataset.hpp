#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spikekit/dat_codec.hpp"
#include "spikekit/image.hpp"
#include "spikekit/spike_stream.hpp"

namespace spikekit {

struct SampleEntry
{
  std::string stem;
  std::filesystem::path spike_path;
  std::optional<std::filesystem::path> label_path;
  std::size_t num_steps = 0;

  friend bool operator==(const SampleEntry&, const SampleEntry&) = default;
};

/// Parameter dictionary of a spike dataset.
struct DatasetDescriptor
{
  std::string name;
  std::filesystem::path root;
  StreamMeta meta; // shared geometry and recording properties
  LabelType label_type = LabelType::raw;
  std::vector<SampleEntry> samples;
  // Not serialized: stems without ground truth when some others have one.
  std::vector<std::string> warnings;

  std::size_t width() const { return meta.width; }
  std::size_t height() const { return meta.height; }

  friend bool operator==(const DatasetDescriptor& a, const DatasetDescriptor& b)
  {
    return a.name == b.name && a.root == b.root && a.meta == b.meta &&
           a.label_type == b.label_type && a.samples == b.samples;
  }
};

struct Sample
{
  SpikeStream spikes;
  std::optional<GrayImage> label;
};

struct BlockRange
{
  std::size_t start = 0;
  std::size_t length = 0;
};

/*
 * Scans a dataset directory laid out as
 *
 *   <root>/<root-name>.info   shared meta (any single top-level .info also works)
 *   <root>/<stem>.dat         spike files
 *   <root>/gt/<stem>.pgm|png  optional ground-truth images
 *
 * Samples are sorted by stem. label_type is image when every stem has a
 * ground-truth image, raw otherwise (with a warning naming the unmatched
 * stems). Throws SchemaError when the meta file is missing and
 * CorruptFileError when a .dat is not a whole number of frames.
 */
DatasetDescriptor scan(const std::filesystem::path& root, std::string_view name = {});

/// Loads sample `index`, optionally only frames [block.start, block.start + block.length).
/// Throws RangeError for an invalid index or block.
Sample load_sample(const DatasetDescriptor& desc, std::size_t index,
                   std::optional<BlockRange> block = std::nullopt);

/// `key = value` manifest; paths are stored relative to the root.
std::string format_manifest(const DatasetDescriptor& desc);
DatasetDescriptor parse_manifest(std::string_view text, const std::filesystem::path& root);

void write_manifest(const DatasetDescriptor& desc, const std::filesystem::path& path);
DatasetDescriptor read_manifest(const std::filesystem::path& path);

} // namespace spikekit
