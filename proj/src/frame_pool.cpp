#include "spikekit/frame_pool.hpp"

#include <algorithm>
#include <string>

#include "spikekit/errors.hpp"

namespace spikekit {

std::string_view to_string(SlotState state)
{
  switch (state) {
    case SlotState::free: return "free";
    case SlotState::filling: return "filling";
    case SlotState::ready: return "ready";
    case SlotState::processing: return "processing";
  }
  return "?";
}

FramePool::FramePool(std::size_t capacity, std::size_t bytes_per_frame, std::size_t frames_per_slot)
  : bytes_per_frame_(bytes_per_frame), frames_per_slot_(frames_per_slot), slots_(capacity)
{
  if (frames_per_slot_ < 1)
    throw DomainError("frame slots must hold at least one frame");
  for (SlotId id = 0; id < slots_.size(); ++id) {
    slots_[id].buffer = std::make_shared<std::vector<std::uint8_t>>(bytes_per_frame_ * frames_per_slot_);
    free_list_.push_back(id);
  }
}

FramePool::Slot& FramePool::checked(SlotId id)
{
  if (id >= slots_.size())
    throw RangeError("slot " + std::to_string(id) + " outside pool of " +
                     std::to_string(slots_.size()));
  return slots_[id];
}

const FramePool::Slot& FramePool::checked(SlotId id) const
{
  if (id >= slots_.size())
    throw RangeError("slot " + std::to_string(id) + " outside pool of " +
                     std::to_string(slots_.size()));
  return slots_[id];
}

void FramePool::transition(SlotId id, SlotState from, SlotState to)
{
  Slot& slot = checked(id);
  if (slot.state != from)
    throw StateError("slot " + std::to_string(id) + " is " + std::string(to_string(slot.state)) +
                     ", cannot move " + std::string(to_string(from)) + " -> " +
                     std::string(to_string(to)));
  slot.state = to;
}

std::optional<SlotId> FramePool::acquire()
{
  std::unique_lock lock(mutex_);
  slot_freed_.wait(lock, [&] { return closed_ || !free_list_.empty(); });
  if (closed_)
    return std::nullopt;
  const SlotId id = free_list_.front();
  free_list_.pop_front();
  transition(id, SlotState::free, SlotState::filling);
  slots_[id].info = {};
  return id;
}

std::optional<SlotId> FramePool::try_acquire()
{
  std::lock_guard lock(mutex_);
  if (closed_ || free_list_.empty())
    return std::nullopt;
  const SlotId id = free_list_.front();
  free_list_.pop_front();
  transition(id, SlotState::free, SlotState::filling);
  slots_[id].info = {};
  return id;
}

std::span<std::uint8_t> FramePool::fill_buffer(SlotId id)
{
  std::lock_guard lock(mutex_);
  Slot& slot = checked(id);
  if (slot.state != SlotState::filling)
    throw StateError("slot " + std::to_string(id) + " is " + std::string(to_string(slot.state)) +
                     ", only filling slots are writable");
  return *slot.buffer;
}

void FramePool::mark_ready(SlotId id, const SlotInfo& info)
{
  std::lock_guard lock(mutex_);
  if (info.frames > frames_per_slot_)
    throw RangeError("slot piece of " + std::to_string(info.frames) + " frames exceeds " +
                     std::to_string(frames_per_slot_));
  transition(id, SlotState::filling, SlotState::ready);
  slots_[id].info = info;
}

void FramePool::begin_processing(SlotId id)
{
  std::lock_guard lock(mutex_);
  transition(id, SlotState::ready, SlotState::processing);
}

void FramePool::release(SlotId id)
{
  std::lock_guard lock(mutex_);
  transition(id, SlotState::processing, SlotState::free);
  Slot& slot = slots_[id];
  if (slot.buffer.use_count() > 1)
    slot.buffer = std::make_shared<std::vector<std::uint8_t>>(bytes_per_frame_ * frames_per_slot_);
  free_list_.push_back(id);
  slot_freed_.notify_one();
}

std::shared_ptr<const std::vector<std::uint8_t>> FramePool::shared_buffer(SlotId id) const
{
  std::lock_guard lock(mutex_);
  const Slot& slot = checked(id);
  if (slot.state != SlotState::ready && slot.state != SlotState::processing)
    throw StateError("slot " + std::to_string(id) + " is " + std::string(to_string(slot.state)) +
                     ", only ready or processing slots can be read");
  return slot.buffer;
}

SlotState FramePool::state(SlotId id) const
{
  std::lock_guard lock(mutex_);
  return checked(id).state;
}

SlotInfo FramePool::info(SlotId id) const
{
  std::lock_guard lock(mutex_);
  return checked(id).info;
}

PoolCounts FramePool::counts() const
{
  std::lock_guard lock(mutex_);
  PoolCounts c;
  for (const auto& slot : slots_) {
    switch (slot.state) {
      case SlotState::free: ++c.free; break;
      case SlotState::filling: ++c.filling; break;
      case SlotState::ready: ++c.ready; break;
      case SlotState::processing: ++c.processing; break;
    }
  }
  return c;
}

void FramePool::close()
{
  std::lock_guard lock(mutex_);
  closed_ = true;
  slot_freed_.notify_all();
}

} // namespace spikekit
