#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <mutex>
#include <optional>

namespace spikekit {

enum class PopStatus { ok, timeout, closed };

/// Multi-producer multi-consumer FIFO with a fixed capacity. close() wakes
/// every waiter; items already queued can still be popped afterwards.
template <typename T>
class BoundedQueue
{
public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  BoundedQueue(const BoundedQueue&) = delete;
  BoundedQueue& operator=(const BoundedQueue&) = delete;

  /// Blocks while full. Returns false if the queue is closed (or has zero capacity).
  bool push(T item)
  {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_)
      return false;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
    return true;
  }

  /// Never blocks. Returns false when full or closed; `item` is left intact then.
  bool try_push(T& item)
  {
    std::lock_guard lock(mutex_);
    if (closed_ || items_.size() >= capacity_)
      return false;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
    return true;
  }

  /// Blocks until an item arrives or the queue is closed and drained.
  std::optional<T> pop()
  {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    return take(lock);
  }

  std::optional<T> try_pop()
  {
    std::unique_lock lock(mutex_);
    return take(lock);
  }

  template <typename Rep, typename Period>
  PopStatus pop_for(T& out, std::chrono::duration<Rep, Period> timeout)
  {
    std::unique_lock lock(mutex_);
    if (!not_empty_.wait_for(lock, timeout, [&] { return closed_ || !items_.empty(); }))
      return PopStatus::timeout;
    auto item = take(lock);
    if (!item)
      return PopStatus::closed;
    out = std::move(*item);
    return PopStatus::ok;
  }

  void close()
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  bool closed() const
  {
    std::lock_guard lock(mutex_);
    return closed_;
  }

  std::size_t size() const
  {
    std::lock_guard lock(mutex_);
    return items_.size();
  }

  std::size_t capacity() const { return capacity_; }

private:
  std::optional<T> take(std::unique_lock<std::mutex>&)
  {
    if (items_.empty())
      return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  const std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<T> items_;
  bool closed_ = false;
};

} // namespace spikekit
