#pragma once

// Generated dataset directories for tests.

#include <filesystem>
#include <string>

#include "spikekit/dat_codec.hpp"
#include "spikekit/image_io.hpp"
#include "spikekit/synthetic.hpp"

namespace testing {

struct FixtureSpec
{
  std::size_t height = 6;
  std::size_t width = 10;
  std::size_t samples = 3;
  std::size_t labels = 0; // first `labels` stems get a gt image
  std::size_t frames = 30;
  std::uint64_t seed = 1;
};

// Writes <root>/<name>.info, <root>/seq_<k>.dat and <root>/gt/seq_<k>.pgm.
inline void make_dataset(const std::filesystem::path& root, const FixtureSpec& spec)
{
  using namespace spikekit;
  std::filesystem::create_directories(root);
  StreamMeta meta;
  meta.height = spec.height;
  meta.width = spec.width;
  meta.extra["scene"] = "fixture";
  write_meta(meta, root / (root.filename().string() + ".info"));
  for (std::size_t k = 0; k < spec.samples; ++k) {
    const std::string stem = "seq_" + std::to_string(k);
    // Different lengths per sample so ordering mistakes show up.
    write_dat(random_stream(meta.geometry(spec.frames + k), spec.seed + k), root / (stem + ".dat"));
    if (k < spec.labels) {
      std::filesystem::create_directories(root / "gt");
      GrayImage label(spec.height, spec.width, static_cast<std::uint8_t>(40 * k));
      write_pgm(label, root / "gt" / (stem + ".pgm"));
    }
  }
}

} // namespace testing
