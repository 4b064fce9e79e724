#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace spikekit {

enum class SlotState { free, filling, ready, processing };

std::string_view to_string(SlotState state);

using SlotId = std::size_t;

struct SlotInfo
{
  std::uint64_t piece_index = 0; // monotone frame-piece counter
  std::uint64_t first_frame = 0; // polling step of the piece's first frame
  std::size_t frames = 0;        // frames held, <= frames_per_slot
};

struct PoolCounts
{
  std::size_t free = 0;
  std::size_t filling = 0;
  std::size_t ready = 0;
  std::size_t processing = 0;

  std::size_t total() const { return free + filling + ready + processing; }
};

/*
 * Fixed set of frame slots, each able to hold `frames_per_slot` packed
 * frames. Slots move strictly along free -> filling -> ready -> processing ->
 * free; any other transition throws StateError and leaves the pool unchanged.
 *
 * Filling slots belong to the assembler, processing slots to the application
 * side. Slot buffers are handed out by address (shared_ptr); when a released
 * buffer is still referenced elsewhere the pool swaps in a fresh one, so a
 * retained SpikeStream is never overwritten.
 */
class FramePool
{
public:
  FramePool(std::size_t capacity, std::size_t bytes_per_frame, std::size_t frames_per_slot);

  FramePool(const FramePool&) = delete;
  FramePool& operator=(const FramePool&) = delete;

  std::size_t capacity() const { return slots_.size(); }
  std::size_t bytes_per_frame() const { return bytes_per_frame_; }
  std::size_t frames_per_slot() const { return frames_per_slot_; }

  /// free -> filling. Blocks until a slot is free; nullopt once the pool is closed.
  std::optional<SlotId> acquire();
  /// free -> filling without waiting.
  std::optional<SlotId> try_acquire();

  /// Writable bytes of a slot the caller is filling.
  std::span<std::uint8_t> fill_buffer(SlotId id);

  /// filling -> ready.
  void mark_ready(SlotId id, const SlotInfo& info);
  /// ready -> processing.
  void begin_processing(SlotId id);
  /// processing -> free.
  void release(SlotId id);

  /// Read-only buffer of a ready or processing slot.
  std::shared_ptr<const std::vector<std::uint8_t>> shared_buffer(SlotId id) const;

  SlotState state(SlotId id) const;
  SlotInfo info(SlotId id) const;
  PoolCounts counts() const;

  /// Wakes blocked acquire() calls; they return nullopt.
  void close();

private:
  struct Slot
  {
    SlotState state = SlotState::free;
    SlotInfo info;
    std::shared_ptr<std::vector<std::uint8_t>> buffer;
  };

  void transition(SlotId id, SlotState from, SlotState to);
  Slot& checked(SlotId id);
  const Slot& checked(SlotId id) const;

  const std::size_t bytes_per_frame_;
  const std::size_t frames_per_slot_;
  mutable std::mutex mutex_;
  std::condition_variable slot_freed_;
  std::vector<Slot> slots_;
  std::deque<SlotId> free_list_; // release order
  bool closed_ = false;
};

} // namespace spikekit
