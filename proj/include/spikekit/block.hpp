#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace spikekit {

/*
 * Wire header that precedes every block in a replay block stream, on disk or
 * over a socket. 16 bytes, little-endian:
 *
 *   offset 0  u64 sequence_number
 *   offset 8  u32 payload_len
 *   offset 12 u16 flags
 *   offset 14 u16 reserved (must be 0)
 *
 * The payload that follows is a whole number of packed polling frames. The
 * end of a stream is a block with zero payload and kEndOfStream set.
 */
struct BlockHeader
{
  std::uint64_t sequence_number = 0;
  std::uint32_t payload_len = 0;
  std::uint16_t flags = 0;
  std::uint16_t reserved = 0;

  static constexpr std::uint16_t kEndOfStream = 0x0001;
  static constexpr std::uint16_t kKnownFlags = kEndOfStream;

  bool end_of_stream() const { return (flags & kEndOfStream) != 0; }

  friend bool operator==(const BlockHeader&, const BlockHeader&) = default;
};

inline constexpr std::size_t kBlockHeaderSize = 16;

std::array<std::uint8_t, kBlockHeaderSize> encode_header(const BlockHeader& header);

/// Throws ParseError on short input, non-zero reserved field or unknown flags.
BlockHeader decode_header(std::span<const std::uint8_t> bytes);

struct RawBlock
{
  BlockHeader header;
  std::vector<std::uint8_t> payload;

  static RawBlock end_of_stream(std::uint64_t sequence_number)
  {
    return RawBlock{BlockHeader{sequence_number, 0, BlockHeader::kEndOfStream, 0}, {}};
  }
};

/// Checks a block against the frame size: payload_len equals the payload
/// size, is a whole number of frames, and end-of-stream blocks are empty.
/// Throws ParseError.
void validate_block(const RawBlock& block, std::size_t bytes_per_frame);

} // namespace spikekit
