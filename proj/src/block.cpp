#include "spikekit/block.hpp"

#include <cstdio>
#include <string>

#include "spikekit/errors.hpp"

namespace spikekit {

namespace {

template <typename T>
void put_le(std::uint8_t* dst, T value)
{
  for (std::size_t i = 0; i < sizeof(T); ++i)
    dst[i] = static_cast<std::uint8_t>(value >> (8 * i));
}

template <typename T>
T get_le(const std::uint8_t* src)
{
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    value |= static_cast<T>(static_cast<T>(src[i]) << (8 * i));
  return value;
}

} // namespace

std::array<std::uint8_t, kBlockHeaderSize> encode_header(const BlockHeader& header)
{
  std::array<std::uint8_t, kBlockHeaderSize> out{};
  put_le(out.data(), header.sequence_number);
  put_le(out.data() + 8, header.payload_len);
  put_le(out.data() + 12, header.flags);
  put_le(out.data() + 14, header.reserved);
  return out;
}

BlockHeader decode_header(std::span<const std::uint8_t> bytes)
{
  if (bytes.size() < kBlockHeaderSize)
    throw ParseError("block header needs " + std::to_string(kBlockHeaderSize) + " bytes, got " +
                     std::to_string(bytes.size()));
  BlockHeader h;
  h.sequence_number = get_le<std::uint64_t>(bytes.data());
  h.payload_len = get_le<std::uint32_t>(bytes.data() + 8);
  h.flags = get_le<std::uint16_t>(bytes.data() + 12);
  h.reserved = get_le<std::uint16_t>(bytes.data() + 14);
  if (h.reserved != 0)
    throw ParseError("block " + std::to_string(h.sequence_number) +
                     ": reserved header field is " + std::to_string(h.reserved));
  if ((h.flags & ~BlockHeader::kKnownFlags) != 0) {
    char hex[8];
    std::snprintf(hex, sizeof(hex), "%04x", static_cast<unsigned>(h.flags));
    throw ParseError("block " + std::to_string(h.sequence_number) + ": unknown flags 0x" + hex);
  }
  return h;
}

void validate_block(const RawBlock& block, std::size_t bytes_per_frame)
{
  const auto& h = block.header;
  if (h.payload_len != block.payload.size())
    throw ParseError("block " + std::to_string(h.sequence_number) + ": header announces " +
                     std::to_string(h.payload_len) + " payload bytes, carries " +
                     std::to_string(block.payload.size()));
  if (bytes_per_frame == 0 || h.payload_len % bytes_per_frame != 0)
    throw ParseError("block " + std::to_string(h.sequence_number) + ": payload of " +
                     std::to_string(h.payload_len) + " bytes is not a whole number of " +
                     std::to_string(bytes_per_frame) + "-byte frames");
  if (h.end_of_stream() && h.payload_len != 0)
    throw ParseError("block " + std::to_string(h.sequence_number) +
                     ": end-of-stream block carries a payload");
}

} // namespace spikekit
