#include "spikekit/spike_stream.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <string>

namespace spikekit {

namespace {

const std::shared_ptr<const std::vector<std::uint8_t>>& empty_buffer()
{
  static const auto buffer = std::make_shared<const std::vector<std::uint8_t>>();
  return buffer;
}

void check_window(const SpikeStream& stream, std::size_t start, std::size_t length)
{
  if (start > stream.num_steps() || length > stream.num_steps() - start)
    throw RangeError("window [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") outside stream of " + std::to_string(stream.num_steps()) + " steps");
}

} // namespace

void StreamGeometry::validate() const
{
  if (height < 1 || width < 1)
    throw DomainError("stream geometry needs height >= 1 and width >= 1, got " +
                      std::to_string(height) + "x" + std::to_string(width));
}

void clear_padding(std::span<std::uint8_t> bytes, const StreamGeometry& geometry)
{
  const std::size_t tail_bits = geometry.pixels() % 8;
  if (tail_bits == 0)
    return;
  const auto mask = static_cast<std::uint8_t>((1u << tail_bits) - 1u);
  const std::size_t bpf = geometry.bytes_per_frame();
  for (std::size_t k = 0; k < geometry.num_steps; ++k)
    bytes[k * bpf + bpf - 1] &= mask;
}

SpikeStream::SpikeStream() : data_(empty_buffer()) {}

SpikeStream::SpikeStream(StreamGeometry geometry, std::vector<std::uint8_t> data)
  : geometry_(geometry)
{
  geometry_.validate();
  if (data.size() != geometry_.total_bytes())
    throw SizeError("spike buffer holds " + std::to_string(data.size()) + " bytes, expected " +
                    std::to_string(geometry_.total_bytes()));
  clear_padding(data, geometry_);
  data_ = std::make_shared<const std::vector<std::uint8_t>>(std::move(data));
}

SpikeStream::SpikeStream(StreamGeometry geometry,
                         std::shared_ptr<const std::vector<std::uint8_t>> buffer)
  : geometry_(geometry), data_(std::move(buffer))
{
  geometry_.validate();
  if (!data_)
    data_ = empty_buffer();
  if (data_->size() < geometry_.total_bytes())
    throw SizeError("shared spike buffer holds " + std::to_string(data_->size()) +
                    " bytes, expected at least " + std::to_string(geometry_.total_bytes()));
}

std::span<const std::uint8_t> SpikeStream::data() const
{
  return {data_->data(), geometry_.total_bytes()};
}

std::span<const std::uint8_t> SpikeStream::frame(std::size_t k) const
{
  if (k >= geometry_.num_steps)
    throw RangeError("frame " + std::to_string(k) + " outside stream of " +
                     std::to_string(geometry_.num_steps) + " steps");
  const std::size_t bpf = geometry_.bytes_per_frame();
  return {data_->data() + k * bpf, bpf};
}

std::uint8_t SpikeStream::at(std::size_t i, std::size_t j, std::size_t k) const
{
  if (i >= geometry_.height || j >= geometry_.width || k >= geometry_.num_steps)
    throw RangeError("spike index (" + std::to_string(i) + ", " + std::to_string(j) + ", " +
                     std::to_string(k) + ") outside " + std::to_string(geometry_.height) + "x" +
                     std::to_string(geometry_.width) + "x" + std::to_string(geometry_.num_steps));
  return get(i, j, k);
}

std::uint64_t SpikeStream::total_spikes() const
{
  return count_ones(data());
}

// x86-64 baseline has no POPCNT; pick the instruction at load time when the
// CPU has it.
#if defined(__x86_64__) && defined(__GNUC__) && !defined(__clang__)
__attribute__((target_clones("popcnt", "default")))
#endif
std::uint64_t count_ones(std::span<const std::uint8_t> bytes)
{
  // Word at a time; per-byte popcount is a library call without POPCNT.
  std::uint64_t total = 0;
  std::size_t i = 0;
  for (; i + 8 <= bytes.size(); i += 8) {
    std::uint64_t word;
    std::memcpy(&word, bytes.data() + i, 8);
    total += static_cast<std::uint64_t>(std::popcount(word));
  }
  for (; i < bytes.size(); ++i)
    total += static_cast<std::uint64_t>(std::popcount(bytes[i]));
  return total;
}

bool operator==(const SpikeStream& a, const SpikeStream& b)
{
  if (!(a.geometry_ == b.geometry_))
    return false;
  const auto da = a.data();
  const auto db = b.data();
  return std::equal(da.begin(), da.end(), db.begin(), db.end());
}

SpikeStream from_packed(std::span<const std::uint8_t> bytes, const StreamGeometry& geometry,
                        const DecodeOptions& options)
{
  geometry.validate();
  if (bytes.size() != geometry.total_bytes())
    throw SizeError("packed stream has " + std::to_string(bytes.size()) + " bytes, expected " +
                    std::to_string(geometry.total_bytes()) + " for " +
                    std::to_string(geometry.height) + "x" + std::to_string(geometry.width) + "x" +
                    std::to_string(geometry.num_steps));

  if (!options.flip_vertical)
    return SpikeStream(geometry, std::vector<std::uint8_t>(bytes.begin(), bytes.end()));

  // Row flip moves bits across byte boundaries when W is not a multiple of 8.
  std::vector<std::uint8_t> out(bytes.size(), 0);
  const std::size_t bpf = geometry.bytes_per_frame();
  const std::size_t h = geometry.height;
  const std::size_t w = geometry.width;
  for (std::size_t k = 0; k < geometry.num_steps; ++k) {
    const std::uint8_t* src = bytes.data() + k * bpf;
    std::uint8_t* dst = out.data() + k * bpf;
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const std::size_t from = (h - 1 - i) * w + j;
        if ((src[from / 8] >> (from % 8)) & 1u) {
          const std::size_t to = i * w + j;
          dst[to / 8] |= static_cast<std::uint8_t>(1u << (to % 8));
        }
      }
    }
  }
  return SpikeStream(geometry, std::move(out));
}

SpikeStream get_block(const SpikeStream& stream, std::size_t start, std::size_t length)
{
  check_window(stream, start, length);
  StreamGeometry g = stream.geometry();
  g.num_steps = length;
  const std::size_t bpf = g.bytes_per_frame();
  const auto src = stream.data().subspan(start * bpf, length * bpf);
  return SpikeStream(g, std::vector<std::uint8_t>(src.begin(), src.end()));
}

DenseSpikes to_dense(const SpikeStream& stream)
{
  DenseSpikes dense;
  dense.num_steps = stream.num_steps();
  dense.height = stream.height();
  dense.width = stream.width();
  dense.values.assign(dense.num_steps * dense.height * dense.width, 0);

  const std::size_t pixels = stream.geometry().pixels();
  const std::size_t bpf = stream.bytes_per_frame();
  const std::uint8_t* bytes = stream.data().data();
  for (std::size_t k = 0; k < dense.num_steps; ++k) {
    std::uint8_t* out = dense.values.data() + k * pixels;
    const std::uint8_t* frame = bytes + k * bpf;
    for (std::size_t p = 0; p < pixels; ++p)
      out[p] = (frame[p / 8] >> (p % 8)) & 1u;
  }
  return dense;
}

SpikeStream from_dense(const DenseSpikes& dense)
{
  const StreamGeometry g{dense.height, dense.width, dense.num_steps};
  g.validate();
  if (dense.values.size() != dense.num_steps * dense.height * dense.width)
    throw SizeError("dense spike array holds " + std::to_string(dense.values.size()) +
                    " values, expected " +
                    std::to_string(dense.num_steps * dense.height * dense.width));

  std::vector<std::uint8_t> out(g.total_bytes(), 0);
  const std::size_t pixels = g.pixels();
  const std::size_t bpf = g.bytes_per_frame();
  for (std::size_t k = 0; k < g.num_steps; ++k) {
    const std::uint8_t* in = dense.values.data() + k * pixels;
    std::uint8_t* frame = out.data() + k * bpf;
    for (std::size_t p = 0; p < pixels; ++p) {
      if (in[p] > 1)
        throw DomainError("dense spike value " + std::to_string(in[p]) + " is not 0 or 1");
      frame[p / 8] |= static_cast<std::uint8_t>(in[p] << (p % 8));
    }
  }
  return SpikeStream(g, std::move(out));
}

CountMap spike_count_map(const SpikeStream& stream, std::size_t start, std::size_t length)
{
  check_window(stream, start, length);
  CountMap counts(stream.height(), stream.width(), 0);
  const std::size_t pixels = stream.geometry().pixels();
  const std::size_t bpf = stream.bytes_per_frame();
  auto out = counts.pixels();
  const std::uint8_t* bytes = stream.data().data();

  for (std::size_t k = start; k < start + length; ++k) {
    const std::uint8_t* frame = bytes + k * bpf;
    // Branch-free over whole bytes; the partial last byte goes bit by bit.
    const std::size_t whole = pixels / 8;
    std::uint32_t* dst = out.data();
    for (std::size_t b = 0; b < whole; ++b) {
      const unsigned byte = frame[b];
      for (unsigned bit = 0; bit < 8; ++bit)
        dst[b * 8 + bit] += (byte >> bit) & 1u;
    }
    for (std::size_t p = whole * 8; p < pixels; ++p)
      dst[p] += (frame[whole] >> (p % 8)) & 1u;
  }
  return counts;
}

} // namespace spikekit
