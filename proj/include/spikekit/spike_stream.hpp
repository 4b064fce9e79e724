#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "spikekit/image.hpp"

namespace spikekit {

/// Sensor geometry of an H x W x T spike cube.
struct StreamGeometry
{
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t num_steps = 0;

  std::size_t pixels() const { return height * width; }
  std::size_t bytes_per_frame() const { return (height * width + 7) / 8; }
  std::size_t total_bytes() const { return num_steps * bytes_per_frame(); }

  // Throws DomainError unless height >= 1 and width >= 1.
  void validate() const;

  friend bool operator==(const StreamGeometry&, const StreamGeometry&) = default;
};

/// Dense {0,1} view with shape (T, H, W).
struct DenseSpikes
{
  std::size_t num_steps = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> values;

  std::uint8_t& operator()(std::size_t k, std::size_t i, std::size_t j)
  {
    return values[(k * height + i) * width + j];
  }
  std::uint8_t operator()(std::size_t k, std::size_t i, std::size_t j) const
  {
    return values[(k * height + i) * width + j];
  }
};

/*
 * Immutable bit-packed spike cube.
 *
 * Layout: frame-major, then row-major inside a frame, LSB-first inside each
 * byte. Pixel (i, j) of frame k lives at bit (i*W + j) % 8 of byte
 * k*ceil(H*W/8) + (i*W + j)/8. Padding bits at the end of each frame are zero.
 *
 * The byte buffer is shared, so copies are cheap and a stream can wrap a
 * pipeline frame slot without copying the payload.
 */
class SpikeStream
{
public:
  SpikeStream();

  /// Takes ownership of an already packed buffer. Padding bits are cleared.
  SpikeStream(StreamGeometry geometry, std::vector<std::uint8_t> data);

  /// Wraps a shared buffer whose first geometry.total_bytes() bytes hold the
  /// frames. The caller guarantees the prefix is not written while any stream
  /// refers to it and that padding bits are already zero.
  SpikeStream(StreamGeometry geometry, std::shared_ptr<const std::vector<std::uint8_t>> buffer);

  const StreamGeometry& geometry() const { return geometry_; }
  std::size_t height() const { return geometry_.height; }
  std::size_t width() const { return geometry_.width; }
  std::size_t num_steps() const { return geometry_.num_steps; }
  std::size_t bytes_per_frame() const { return geometry_.bytes_per_frame(); }

  std::span<const std::uint8_t> data() const;
  std::span<const std::uint8_t> frame(std::size_t k) const;

  /// Bit at row i, column j, step k. Unchecked.
  std::uint8_t get(std::size_t i, std::size_t j, std::size_t k) const
  {
    const std::size_t bit = i * geometry_.width + j;
    return (data_->data()[k * geometry_.bytes_per_frame() + bit / 8] >> (bit % 8)) & 1u;
  }

  /// Checked variant of get(); throws RangeError.
  std::uint8_t at(std::size_t i, std::size_t j, std::size_t k) const;

  std::uint64_t total_spikes() const;

  friend bool operator==(const SpikeStream& a, const SpikeStream& b);

private:
  StreamGeometry geometry_;
  std::shared_ptr<const std::vector<std::uint8_t>> data_;
};

struct DecodeOptions
{
  // Reverse row order on decode for sensors that read out bottom-up.
  bool flip_vertical = false;
};

/// Builds a stream from packed bytes. Throws SizeError when the byte count is
/// not num_steps * ceil(H*W/8).
SpikeStream from_packed(std::span<const std::uint8_t> bytes, const StreamGeometry& geometry,
                        const DecodeOptions& options = {});

/// Frames [start, start + length) as a new stream. Throws RangeError.
SpikeStream get_block(const SpikeStream& stream, std::size_t start, std::size_t length);

DenseSpikes to_dense(const SpikeStream& stream);
SpikeStream from_dense(const DenseSpikes& dense);

/// Per-pixel spike count over frames [start, start + length). Throws RangeError.
CountMap spike_count_map(const SpikeStream& stream, std::size_t start, std::size_t length);

/// Number of set bits in a byte range.
std::uint64_t count_ones(std::span<const std::uint8_t> bytes);

/// Zeroes the padding bits of the last byte of every frame in place.
void clear_padding(std::span<std::uint8_t> bytes, const StreamGeometry& geometry);

} // namespace spikekit
