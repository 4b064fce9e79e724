#include "spikekit/pipeline.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>

#include "spikekit/errors.hpp"

namespace spikekit {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Sleeps until `deadline` in short slices so cancellation stays responsive.
void sleep_until_or_cancel(Clock::time_point deadline, const std::atomic<bool>& cancel)
{
  constexpr auto kSlice = std::chrono::milliseconds(20);
  while (!cancel.load(std::memory_order_relaxed)) {
    const auto now = Clock::now();
    if (now >= deadline)
      return;
    std::this_thread::sleep_for(std::min<Clock::duration>(deadline - now, kSlice));
  }
}

} // namespace

// ---------------------------------------------------------------------------
// Frame readers

FileFrameReader::FileFrameReader(const fs::path& path, const StreamMeta& meta)
  : path_(path), bytes_per_frame_(meta.geometry().bytes_per_frame()),
    total_frames_(dat_frame_count(path, meta)), remaining_(total_frames_)
{
  in_.open(path, std::ios::binary);
  if (!in_)
    throw IoError("cannot open '" + path.string() + "' for reading");
}

std::size_t FileFrameReader::read_frames(std::span<std::uint8_t> dst)
{
  const std::size_t frames = std::min(remaining_, dst.size() / bytes_per_frame_);
  if (frames == 0)
    return 0;
  if (!in_.read(reinterpret_cast<char*>(dst.data()),
                static_cast<std::streamsize>(frames * bytes_per_frame_)))
    throw IoError("short read from '" + path_.string() + "'");
  remaining_ -= frames;
  return frames;
}

MemoryFrameReader::MemoryFrameReader(SpikeStream pattern, std::size_t total_frames)
  : pattern_(std::move(pattern)), total_frames_(total_frames)
{
  if (pattern_.num_steps() == 0 && total_frames_ > 0)
    throw DomainError("memory replay needs a non-empty pattern");
}

std::size_t MemoryFrameReader::read_frames(std::span<std::uint8_t> dst)
{
  const std::size_t bpf = pattern_.bytes_per_frame();
  const std::size_t want = std::min(total_frames_ - produced_, dst.size() / bpf);
  const auto src = pattern_.data();
  std::size_t done = 0;
  while (done < want) {
    const std::size_t pos = (produced_ + done) % pattern_.num_steps();
    const std::size_t run = std::min(want - done, pattern_.num_steps() - pos);
    std::memcpy(dst.data() + done * bpf, src.data() + pos * bpf, run * bpf);
    done += run;
  }
  produced_ += done;
  return done;
}

// ---------------------------------------------------------------------------
// Replay source

namespace {

template <typename Emit>
ReplayResult replay_blocks(FrameReader& reader, const ReplayOptions& options,
                           const std::atomic<bool>& cancel, Emit&& emit)
{
  if (options.block_frames < 1)
    throw DomainError("block_frames must be at least 1");
  if (!options.unpaced && !(options.rate > 0.0))
    throw DomainError("replay rate must be positive");

  const std::size_t bpf = reader.bytes_per_frame();
  ReplayResult result;
  const auto t0 = Clock::now();

  while (!cancel.load(std::memory_order_relaxed)) {
    std::vector<std::uint8_t> payload(options.block_frames * bpf);
    const std::size_t n = reader.read_frames(payload);
    if (n == 0)
      break;
    payload.resize(n * bpf);
    if (!options.unpaced) {
      const double due = static_cast<double>(result.frames + n) / options.rate;
      sleep_until_or_cancel(
        t0 + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(due)), cancel);
      if (cancel.load(std::memory_order_relaxed))
        return result;
    }
    RawBlock block{BlockHeader{result.blocks, static_cast<std::uint32_t>(payload.size()), 0, 0},
                   std::move(payload)};
    if (!emit(std::move(block)))
      return result;
    ++result.blocks;
    result.frames += n;
  }
  if (!cancel.load(std::memory_order_relaxed))
    emit(RawBlock::end_of_stream(result.blocks));
  return result;
}

} // namespace

ReplayResult run_replay_source(FrameReader& reader, const ReplayOptions& options, BlockQueue& sink,
                               const std::atomic<bool>& cancel)
{
  return replay_blocks(reader, options, cancel,
                       [&](RawBlock&& block) { return sink.push(std::move(block)); });
}

ReplayResult run_replay_source(const fs::path& dat, const StreamMeta& meta,
                               const ReplayOptions& options, BlockQueue& sink)
{
  FileFrameReader reader(dat, meta);
  const std::atomic<bool> never{false};
  return run_replay_source(reader, options, sink, never);
}

ReplayResult write_block_stream(FrameReader& reader, const ReplayOptions& options,
                                const std::function<void(std::span<const std::uint8_t>)>& write)
{
  const std::atomic<bool> never{false};
  return replay_blocks(reader, options, never, [&](RawBlock&& block) {
    const auto header = encode_header(block.header);
    write(header);
    if (!block.payload.empty())
      write(block.payload);
    return true;
  });
}

std::uint64_t run_block_stream_source(
  const std::function<bool(std::span<std::uint8_t>)>& read_exact, std::size_t bytes_per_frame,
  BlockQueue& sink, const std::atomic<bool>& cancel)
{
  std::uint64_t blocks = 0;
  std::array<std::uint8_t, kBlockHeaderSize> raw{};
  while (!cancel.load(std::memory_order_relaxed)) {
    if (!read_exact(raw))
      throw ParseError("block stream ended after " + std::to_string(blocks) +
                       " blocks without an end-of-stream block");
    RawBlock block;
    block.header = decode_header(raw);
    block.payload.resize(block.header.payload_len);
    if (!block.payload.empty() && !read_exact(block.payload))
      throw ParseError("block " + std::to_string(block.header.sequence_number) +
                       ": payload truncated");
    validate_block(block, bytes_per_frame);
    const bool eos = block.header.end_of_stream();
    if (!sink.push(std::move(block)))
      break;
    if (eos)
      break;
    ++blocks;
  }
  return blocks;
}

// ---------------------------------------------------------------------------
// Stats

std::string PipelineStats::to_text() const
{
  std::ostringstream out;
  out << "produced=" << produced << "\n"
      << "delivered=" << delivered << "\n"
      << "dropped=" << dropped << "\n"
      << "dropped_app_full=" << dropped_app_full << "\n"
      << "dropped_busy=" << dropped_busy << "\n"
      << "dropped_drain=" << dropped_drain << "\n"
      << "blocks=" << blocks << "\n"
      << "frames=" << frames << "\n"
      << "gap_events=" << gap_events << "\n"
      << "missing_blocks=" << missing_blocks << "\n"
      << "conserved=" << (conserved() ? "true" : "false") << "\n";
  for (const auto& t : tasks)
    out << "task." << t.name << ".processed=" << t.processed << "\n"
        << "task." << t.name << ".failed=" << t.failed << "\n";
  out << "wall_seconds=" << wall_seconds << "\n"
      << "wall_frames_per_second=" << frames_per_second << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Assembler and transfer

void run_assembler(BlockQueue& blocks, FramePool& lib_pool, SlotQueue& ready, StageCounters& counters,
                   const std::atomic<bool>& cancel)
{
  struct CloseOnExit
  {
    SlotQueue& q;
    ~CloseOnExit() { q.close(); }
  } close_ready{ready};

  const std::size_t bpf = lib_pool.bytes_per_frame();
  const std::size_t t_cusum = lib_pool.frames_per_slot();
  std::optional<SlotId> slot;
  std::span<std::uint8_t> slot_bytes;
  std::size_t slot_frames = 0;
  std::uint64_t piece_index = 0;
  std::uint64_t frames_seen = 0;
  std::optional<std::uint64_t> expected_seq;

  auto flush = [&] {
    if (!slot)
      return;
    lib_pool.mark_ready(*slot, SlotInfo{piece_index, frames_seen - slot_frames, slot_frames});
    counters.produced.fetch_add(1, std::memory_order_relaxed);
    ready.push(*slot); // capacity equals the pool size, never blocks
    ++piece_index;
    slot.reset();
    slot_frames = 0;
  };

  while (!cancel.load(std::memory_order_relaxed)) {
    auto block = blocks.pop();
    if (!block || cancel.load(std::memory_order_relaxed))
      break;
    validate_block(*block, bpf);

    const std::uint64_t seq = block->header.sequence_number;
    if (expected_seq && seq < *expected_seq)
      throw ParseError("block sequence went backwards: got " + std::to_string(seq) +
                       ", expected " + std::to_string(*expected_seq));
    if (expected_seq && seq > *expected_seq) {
      counters.gap_events.fetch_add(1, std::memory_order_relaxed);
      counters.missing_blocks.fetch_add(seq - *expected_seq, std::memory_order_relaxed);
    }
    expected_seq = seq + 1;
    if (block->header.end_of_stream())
      break;
    counters.blocks.fetch_add(1, std::memory_order_relaxed);

    const std::uint8_t* src = block->payload.data();
    std::size_t frames_left = block->payload.size() / bpf;
    while (frames_left > 0) {
      if (!slot) {
        slot = lib_pool.acquire();
        if (!slot)
          return; // pool closed by cancellation
        slot_bytes = lib_pool.fill_buffer(*slot);
      }
      const std::size_t take = std::min(frames_left, t_cusum - slot_frames);
      std::memcpy(slot_bytes.data() + slot_frames * bpf, src, take * bpf);
      src += take * bpf;
      frames_left -= take;
      slot_frames += take;
      frames_seen += take;
      counters.frames.fetch_add(take, std::memory_order_relaxed);
      if (slot_frames == t_cusum)
        flush();
    }
  }
  flush();
}

void run_transfer(SlotQueue& ready, FramePool& lib_pool, SlotQueue& app_pool, StageCounters& counters,
                  const std::atomic<bool>& cancel)
{
  struct CloseOnExit
  {
    SlotQueue& q;
    ~CloseOnExit() { q.close(); }
  } close_app{app_pool};

  while (auto id = ready.pop()) {
    lib_pool.begin_processing(*id);
    if (cancel.load(std::memory_order_relaxed)) {
      lib_pool.release(*id);
      counters.dropped_drain.fetch_add(1, std::memory_order_relaxed);
      continue;
    }
    SlotId handle = *id;
    if (!app_pool.try_push(handle)) {
      lib_pool.release(handle);
      counters.dropped_app_full.fetch_add(1, std::memory_order_relaxed);
    }
  }
}

// ---------------------------------------------------------------------------
// Session

struct PipelineSession::Worker
{
  TaskSpec spec;
  std::optional<std::pair<SlotId, FramePiece>> job; // guarded by gate_mutex_
  std::thread thread;
  std::atomic<std::uint64_t> processed{0};
  std::atomic<std::uint64_t> failed{0};
  std::atomic<std::uint64_t> overflow{0};
  mutable std::mutex log_mutex;
  std::vector<std::uint64_t> log;
  std::unique_ptr<BoundedQueue<TaskResult>> results;
};

SourceFn replay_source(std::shared_ptr<FrameReader> reader, ReplayOptions options)
{
  return [reader = std::move(reader), options](BlockQueue& sink, const std::atomic<bool>& cancel) {
    run_replay_source(*reader, options, sink, cancel);
  };
}

PipelineSession::PipelineSession(SourceFn source, PipelineConfig config, std::vector<TaskSpec> tasks)
  : source_(std::move(source)), config_(config),
    bytes_per_frame_(StreamGeometry{config.height, config.width, 0}.bytes_per_frame()),
    blocks_(std::max<std::size_t>(1, config.block_queue_capacity)),
    lib_pool_(config.lib_capacity, bytes_per_frame_, config.t_cusum),
    ready_(std::max<std::size_t>(1, config.lib_capacity)), app_pool_(config.app_capacity),
    outstanding_(config.lib_capacity, 0)
{
  StreamGeometry{config.height, config.width, 0}.validate();
  if (config.t_cusum < 1)
    throw DomainError("t_cusum must be at least 1");
  if (config.lib_capacity < 1)
    throw DomainError("lib pool needs at least one slot");

  if (config.device_pull) {
    device_queue_ = std::make_shared<BoundedQueue<FramePiece>>(
      std::max<std::size_t>(1, config.device_pull_capacity));
    tasks.push_back(TaskSpec{"device", [q = device_queue_](const FramePiece& piece) -> std::any {
                               q->push(piece);
                               return {};
                             }});
  }
  for (auto& spec : tasks) {
    auto w = std::make_unique<Worker>();
    if (spec.result_capacity > 0)
      w->results = std::make_unique<BoundedQueue<TaskResult>>(spec.result_capacity);
    w->spec = std::move(spec);
    workers_.push_back(std::move(w));
  }
}

PipelineSession::~PipelineSession()
{
  if (started_ && !joined_) {
    stop();
    try {
      wait();
    } catch (...) {
    }
  }
}

StreamGeometry PipelineSession::piece_geometry(std::size_t frames) const
{
  return StreamGeometry{config_.height, config_.width, frames};
}

void PipelineSession::fail(std::exception_ptr error)
{
  {
    std::lock_guard lock(error_mutex_);
    if (!error_)
      error_ = error;
  }
  cancel_.store(true);
  blocks_.close();
  lib_pool_.close();
}

void PipelineSession::start()
{
  if (started_)
    throw StateError("pipeline session already started");
  started_ = true;
  started_at_ = Clock::now();
  running_stages_ = 4;
  for (auto& w : workers_)
    w->thread = std::thread([this, worker = w.get()] { worker_loop(*worker); });
  threads_.emplace_back([this] { run_source(); });
  threads_.emplace_back([this] { run_assembler_stage(); });
  threads_.emplace_back([this] { run_transfer_stage(); });
  threads_.emplace_back([this] { run_dispatcher(); });
}

void PipelineSession::stop()
{
  cancel_.store(true);
  blocks_.close();
  lib_pool_.close();
  if (device_queue_)
    device_queue_->close();
}

void PipelineSession::wait()
{
  if (!started_ || joined_)
    return;
  for (auto& t : threads_)
    t.join();
  for (auto& w : workers_)
    if (w->thread.joinable())
      w->thread.join();
  joined_ = true;
  std::lock_guard lock(error_mutex_);
  if (error_)
    std::rethrow_exception(error_);
}

bool PipelineSession::finished() const
{
  return started_ && running_stages_.load() == 0;
}

void PipelineSession::run_source()
{
  try {
    source_(blocks_, cancel_);
  } catch (...) {
    fail(std::current_exception());
  }
  blocks_.close();
  --running_stages_;
}

void PipelineSession::run_assembler_stage()
{
  try {
    run_assembler(blocks_, lib_pool_, ready_, counters_, cancel_);
  } catch (...) {
    fail(std::current_exception());
  }
  ready_.close();
  --running_stages_;
}

void PipelineSession::run_transfer_stage()
{
  try {
    run_transfer(ready_, lib_pool_, app_pool_, counters_, cancel_);
  } catch (...) {
    fail(std::current_exception());
  }
  app_pool_.close();
  --running_stages_;
}

void PipelineSession::run_dispatcher()
{
  const std::size_t n = workers_.size();
  while (auto id = app_pool_.pop()) {
    if (cancel_.load(std::memory_order_relaxed)) {
      lib_pool_.release(*id);
      counters_.dropped_drain.fetch_add(1, std::memory_order_relaxed);
      continue;
    }

    std::unique_lock lock(gate_mutex_);
    if (n == 0 || busy_workers_ != 0) {
      lock.unlock();
      lib_pool_.release(*id);
      counters_.dropped_busy.fetch_add(1, std::memory_order_relaxed);
      continue;
    }

    const SlotInfo info = lib_pool_.info(*id);
    FramePiece piece{info.piece_index, info.first_frame,
                     SpikeStream(piece_geometry(info.frames), lib_pool_.shared_buffer(*id))};
    for (std::size_t w = 0; w + 1 < n; ++w)
      workers_[w]->job.emplace(*id, piece);
    workers_[n - 1]->job.emplace(*id, std::move(piece));
    busy_workers_ = n;
    outstanding_[*id] = n;
    counters_.delivered.fetch_add(1, std::memory_order_relaxed);
    gate_cv_.notify_all();
  }

  // Let in-flight work finish, then retire the workers.
  {
    std::unique_lock lock(gate_mutex_);
    gate_cv_.wait(lock, [&] { return busy_workers_ == 0; });
    workers_stop_ = true;
    gate_cv_.notify_all();
  }
  if (device_queue_)
    device_queue_->close();
  finished_ns_.store(std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - started_at_)
                       .count());
  --running_stages_;
}

void PipelineSession::worker_loop(Worker& worker)
{
  for (;;) {
    std::pair<SlotId, FramePiece> job;
    {
      std::unique_lock lock(gate_mutex_);
      gate_cv_.wait(lock, [&] { return workers_stop_ || worker.job.has_value(); });
      if (!worker.job)
        break;
      job = std::move(*worker.job);
      worker.job.reset();
    }

    const std::uint64_t index = job.second.index;
    try {
      std::any value = worker.spec.fn(job.second);
      worker.processed.fetch_add(1, std::memory_order_relaxed);
      {
        std::lock_guard lock(worker.log_mutex);
        worker.log.push_back(index);
      }
      if (worker.results) {
        TaskResult result{index, std::move(value)};
        if (!worker.results->try_push(result))
          worker.overflow.fetch_add(1, std::memory_order_relaxed);
      }
    } catch (...) {
      worker.failed.fetch_add(1, std::memory_order_relaxed);
    }
    job.second = FramePiece{}; // drop the buffer reference before releasing the slot
    finish_piece(job.first);
  }
  if (worker.results)
    worker.results->close();
}

void PipelineSession::finish_piece(SlotId id)
{
  bool last = false;
  {
    std::lock_guard lock(gate_mutex_);
    last = --outstanding_[id] == 0;
    --busy_workers_;
    gate_cv_.notify_all();
  }
  if (last)
    lib_pool_.release(id);
}

PipelineStats PipelineSession::stats() const
{
  PipelineStats s;
  s.produced = counters_.produced.load();
  s.delivered = counters_.delivered.load();
  s.dropped_app_full = counters_.dropped_app_full.load();
  s.dropped_busy = counters_.dropped_busy.load();
  s.dropped_drain = counters_.dropped_drain.load();
  s.dropped = s.dropped_app_full + s.dropped_busy + s.dropped_drain;
  s.blocks = counters_.blocks.load();
  s.frames = counters_.frames.load();
  s.gap_events = counters_.gap_events.load();
  s.missing_blocks = counters_.missing_blocks.load();
  for (const auto& w : workers_)
    s.tasks.push_back(TaskStats{w->spec.name, w->processed.load(), w->failed.load(), w->overflow.load()});

  if (started_) {
    const std::int64_t done = finished_ns_.load();
    const auto elapsed = done > 0 ? std::chrono::nanoseconds(done)
                                  : std::chrono::duration_cast<std::chrono::nanoseconds>(
                                      Clock::now() - started_at_);
    s.wall_seconds = std::chrono::duration<double>(elapsed).count();
    if (s.wall_seconds > 0.0)
      s.frames_per_second = static_cast<double>(s.frames) / s.wall_seconds;
  }
  return s;
}

std::vector<std::uint64_t> PipelineSession::processed_log(std::size_t task) const
{
  if (task >= workers_.size())
    throw RangeError("task " + std::to_string(task) + " outside " +
                     std::to_string(workers_.size()) + " tasks");
  std::lock_guard lock(workers_[task]->log_mutex);
  return workers_[task]->log;
}

std::optional<TaskResult> PipelineSession::next_result(std::size_t task,
                                                       std::chrono::milliseconds timeout)
{
  if (task >= workers_.size() || !workers_[task]->results)
    throw RangeError("task " + std::to_string(task) + " has no results channel");
  TaskResult out;
  switch (workers_[task]->results->pop_for(out, timeout)) {
    case PopStatus::ok: return out;
    case PopStatus::closed: return std::nullopt;
    case PopStatus::timeout: break;
  }
  throw TimeoutError("no result from task '" + workers_[task]->spec.name + "' within " +
                     std::to_string(timeout.count()) + " ms");
}

std::optional<FramePiece> PipelineSession::get_device_matrix(std::chrono::milliseconds timeout)
{
  if (!device_queue_)
    throw StateError("session was created without device_pull");
  if (!started_)
    throw StateError("pipeline session not started");
  FramePiece out;
  switch (device_queue_->pop_for(out, timeout)) {
    case PopStatus::ok: return out;
    case PopStatus::closed:
      if (cancel_.load())
        throw ClosedError("pipeline session was stopped");
      return std::nullopt;
    case PopStatus::timeout: break;
  }
  throw TimeoutError("no frame piece within " + std::to_string(timeout.count()) + " ms");
}

std::optional<FramePiece> get_device_matrix(PipelineSession& session, std::size_t t_cusum,
                                            std::chrono::milliseconds timeout)
{
  if (t_cusum != session.config().t_cusum)
    throw DomainError("session assembles pieces of " + std::to_string(session.config().t_cusum) +
                      " frames, requested " + std::to_string(t_cusum));
  return session.get_device_matrix(timeout);
}

} // namespace spikekit
