#pragma once

#include <any>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "spikekit/block.hpp"
#include "spikekit/bounded_queue.hpp"
#include "spikekit/dat_codec.hpp"
#include "spikekit/frame_pool.hpp"
#include "spikekit/spike_stream.hpp"

namespace spikekit {

using BlockQueue = BoundedQueue<RawBlock>;
using SlotQueue = BoundedQueue<SlotId>;

// ---------------------------------------------------------------------------
// Frame readers feed the replay source with packed polling frames.

class FrameReader
{
public:
  virtual ~FrameReader() = default;
  virtual std::size_t bytes_per_frame() const = 0;
  /// Copies up to dst.size() / bytes_per_frame() whole frames into dst and
  /// returns how many were written. 0 means the input is exhausted.
  virtual std::size_t read_frames(std::span<std::uint8_t> dst) = 0;
};

/// Streams a headerless `.dat` file without loading it whole.
class FileFrameReader : public FrameReader
{
public:
  FileFrameReader(const std::filesystem::path& path, const StreamMeta& meta);
  std::size_t bytes_per_frame() const override { return bytes_per_frame_; }
  std::size_t read_frames(std::span<std::uint8_t> dst) override;
  std::size_t total_frames() const { return total_frames_; }

private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t bytes_per_frame_;
  std::size_t total_frames_;
  std::size_t remaining_;
};

/// Replays the frames of an in-memory stream cyclically until `total_frames`
/// have been produced. Used for synthetic benchmarks.
class MemoryFrameReader : public FrameReader
{
public:
  MemoryFrameReader(SpikeStream pattern, std::size_t total_frames);
  std::size_t bytes_per_frame() const override { return pattern_.bytes_per_frame(); }
  std::size_t read_frames(std::span<std::uint8_t> dst) override;

private:
  SpikeStream pattern_;
  std::size_t total_frames_;
  std::size_t produced_ = 0;
};

struct ReplayOptions
{
  double rate = 40000.0;         // polling frames per second
  std::size_t block_frames = 400;
  bool unpaced = false;          // ignore `rate` and emit as fast as possible
};

struct ReplayResult
{
  std::uint64_t blocks = 0;
  std::uint64_t frames = 0;
};

/*
 * Packs frames from `reader` into RawBlocks of `block_frames` frames and pushes
 * them into `sink`, releasing block b no earlier than the instant its last
 * frame would have been captured at `rate`. A short final block carries the
 * leftover frames, then an end-of-stream block is pushed. Pushing blocks when
 * the sink is full (acquisition-side backpressure). Returns early, without the
 * end-of-stream block, if `cancel` is set or the sink is closed.
 */
ReplayResult run_replay_source(FrameReader& reader, const ReplayOptions& options, BlockQueue& sink,
                               const std::atomic<bool>& cancel);

ReplayResult run_replay_source(const std::filesystem::path& dat, const StreamMeta& meta,
                               const ReplayOptions& options, BlockQueue& sink);

// ---------------------------------------------------------------------------
// Block streams: header + payload records on disk or over a socket.

/// Serializes every block produced by a replay of `reader` (including the
/// end-of-stream block) through `write`.
ReplayResult write_block_stream(FrameReader& reader, const ReplayOptions& options,
                                const std::function<void(std::span<const std::uint8_t>)>& write);

/// Reads header + payload records via `read_exact` (which must fill the whole
/// span or return false at end of input) and pushes them into `sink` until an
/// end-of-stream block arrives. Malformed headers throw ParseError.
std::uint64_t run_block_stream_source(
  const std::function<bool(std::span<std::uint8_t>)>& read_exact, std::size_t bytes_per_frame,
  BlockQueue& sink, const std::atomic<bool>& cancel);

// ---------------------------------------------------------------------------
// Stats

struct TaskStats
{
  std::string name;
  std::uint64_t processed = 0;
  std::uint64_t failed = 0;
  std::uint64_t results_overflow = 0;
};

struct PipelineStats
{
  std::uint64_t produced = 0;  // frame pieces assembled and marked ready
  std::uint64_t delivered = 0; // pieces handed to the task set
  std::uint64_t dropped = 0;   // pieces released without processing
  std::uint64_t dropped_app_full = 0;
  std::uint64_t dropped_busy = 0;
  std::uint64_t dropped_drain = 0;
  std::uint64_t blocks = 0;
  std::uint64_t frames = 0; // polling frames ingested by the assembler
  std::uint64_t gap_events = 0;
  std::uint64_t missing_blocks = 0;
  std::vector<TaskStats> tasks;
  double wall_seconds = 0.0;
  double frames_per_second = 0.0;

  bool conserved() const { return produced == delivered + dropped; }
  /// `key=value` lines; wall-clock fields are prefixed `wall_`.
  std::string to_text() const;
};

// ---------------------------------------------------------------------------
// Stage functions. Each runs until its input ends or is closed; the session
// below runs them on dedicated threads.

struct StageCounters
{
  std::atomic<std::uint64_t> produced{0};
  std::atomic<std::uint64_t> delivered{0};
  std::atomic<std::uint64_t> dropped_app_full{0};
  std::atomic<std::uint64_t> dropped_busy{0};
  std::atomic<std::uint64_t> dropped_drain{0};
  std::atomic<std::uint64_t> blocks{0};
  std::atomic<std::uint64_t> frames{0};
  std::atomic<std::uint64_t> gap_events{0};
  std::atomic<std::uint64_t> missing_blocks{0};
};

/// Concatenates block payloads into lib-pool slots of `t_cusum` frames, pushes
/// each filled slot into `ready` and flushes a short final slot at the end.
/// Closes `ready` on exit. Throws ParseError on malformed blocks.
void run_assembler(BlockQueue& blocks, FramePool& lib_pool, SlotQueue& ready, StageCounters& counters,
                   const std::atomic<bool>& cancel);

/// Moves ready slots to the app pool by handle. A full app pool releases the
/// slot at once and counts it dropped. Closes `app_pool` on exit.
void run_transfer(SlotQueue& ready, FramePool& lib_pool, SlotQueue& app_pool, StageCounters& counters,
                  const std::atomic<bool>& cancel);

// ---------------------------------------------------------------------------
// Session

struct FramePiece
{
  std::uint64_t index = 0;       // piece counter, 0-based
  std::uint64_t first_frame = 0; // polling step of spikes.frame(0)
  SpikeStream spikes;
};

/// A task maps a frame piece to an opaque result.
using TaskFn = std::function<std::any(const FramePiece&)>;

struct TaskSpec
{
  std::string name;
  TaskFn fn;
  std::size_t result_capacity = 0; // 0 disables the results channel
};

struct TaskResult
{
  std::uint64_t piece_index = 0;
  std::any value;
};

struct PipelineConfig
{
  std::size_t height = 250;
  std::size_t width = 400;
  std::size_t t_cusum = 400;
  std::size_t lib_capacity = 8;
  std::size_t app_capacity = 2;
  std::size_t block_queue_capacity = 8;
  // Adds an internal consumer task feeding get_device_matrix().
  bool device_pull = false;
  std::size_t device_pull_capacity = 1;
};

/// Abstract first stage: anything that fills the block queue.
using SourceFn = std::function<void(BlockQueue& sink, const std::atomic<bool>& cancel)>;

SourceFn replay_source(std::shared_ptr<FrameReader> reader, ReplayOptions options);

/*
 * The acquisition-and-dispatch pipeline:
 *
 *   source -> BlockQueue -> assembler -> lib pool -> transfer -> app pool
 *          -> dispatcher -> task workers
 *
 * The acquisition side (block queue, lib pool) blocks when full and never
 * loses data. The dispatcher hands a piece to every task at once only when
 * all task workers are idle, otherwise the piece is released and counted as
 * dropped, so all tasks see the same pieces. At quiescence
 * produced == delivered + dropped.
 */
class PipelineSession
{
public:
  PipelineSession(SourceFn source, PipelineConfig config, std::vector<TaskSpec> tasks);
  ~PipelineSession();

  PipelineSession(const PipelineSession&) = delete;
  PipelineSession& operator=(const PipelineSession&) = delete;

  void start();
  /// Cancels every stage; pieces in flight are drained as dropped.
  void stop();
  /// Joins every stage. Rethrows the first fatal stage error.
  void wait();
  /// True once every stage has exited.
  bool finished() const;

  const PipelineConfig& config() const { return config_; }
  StreamGeometry piece_geometry(std::size_t frames) const;

  PipelineStats stats() const;
  /// Piece indices processed by a task, in processing order.
  std::vector<std::uint64_t> processed_log(std::size_t task) const;
  std::size_t task_count() const { return workers_.size(); }

  /// Next result of a task's channel. Throws TimeoutError, nullopt once the
  /// session has finished and the channel is drained.
  std::optional<TaskResult> next_result(std::size_t task, std::chrono::milliseconds timeout);

  /// Blocking pull of the next piece delivered to the device consumer.
  /// nullopt after the source is exhausted; TimeoutError on timeout;
  /// ClosedError when the session was stopped.
  std::optional<FramePiece> get_device_matrix(std::chrono::milliseconds timeout);

private:
  struct Worker;

  void run_source();
  void run_assembler_stage();
  void run_transfer_stage();
  void run_dispatcher();
  void worker_loop(Worker& worker);
  void finish_piece(SlotId id);
  void fail(std::exception_ptr error);

  SourceFn source_;
  PipelineConfig config_;
  std::size_t bytes_per_frame_;

  BlockQueue blocks_;
  FramePool lib_pool_;
  SlotQueue ready_;
  SlotQueue app_pool_;
  StageCounters counters_;
  std::atomic<bool> cancel_{false};
  std::atomic<int> running_stages_{0};

  // Idle gate. Guarded by gate_mutex_.
  mutable std::mutex gate_mutex_;
  std::condition_variable gate_cv_;
  std::vector<std::unique_ptr<Worker>> workers_;
  std::size_t busy_workers_ = 0;
  std::vector<std::size_t> outstanding_; // per slot: workers still holding it
  bool workers_stop_ = false;

  std::shared_ptr<BoundedQueue<FramePiece>> device_queue_;

  mutable std::mutex error_mutex_;
  std::exception_ptr error_;

  std::chrono::steady_clock::time_point started_at_;
  std::atomic<std::int64_t> finished_ns_{0};
  std::vector<std::thread> threads_;
  bool started_ = false;
  bool joined_ = false;
};

/// Free-function form of PipelineSession::get_device_matrix. `t_cusum` must
/// match the session's configuration.
std::optional<FramePiece> get_device_matrix(PipelineSession& session, std::size_t t_cusum,
                                            std::chrono::milliseconds timeout);

} // namespace spikekit
