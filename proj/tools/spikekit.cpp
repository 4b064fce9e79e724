// spikekit: command-line front end for the spike stream engine.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "net.hpp"
#include "spikekit/dat_codec.hpp"
#include "spikekit/dataset.hpp"
#include "spikekit/image_io.hpp"
#include "spikekit/metrics.hpp"
#include "spikekit/pipeline.hpp"
#include "spikekit/reconstruction.hpp"
#include "spikekit/simulator.hpp"
#include "spikekit/synthetic.hpp"
#include "spikekit/threads.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace spikekit;

namespace {

class UsageError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int)
{
  g_interrupted.store(true);
}

struct Globals
{
  std::string meta;
  std::uint64_t seed = 0;
  bool quiet = false;
  bool json = false;
};

// Collects key/value output. Text mode prints `key=value` lines; JSON mode
// prints one object at the end.
class Report
{
public:
  explicit Report(const Globals& g) : g_(g) {}

  template <typename T>
  void config(const std::string& key, const T& value)
  {
    doc_["config"][key] = value;
  }

  template <typename T>
  void set(const std::string& key, const T& value)
  {
    doc_["result"][key] = value;
  }

  json& result() { return doc_["result"]; }

  void print() const
  {
    if (g_.json) {
      std::cout << doc_.dump(2) << "\n";
      return;
    }
    if (!g_.quiet && doc_.contains("config")) {
      std::cout << "# effective config\n";
      for (const auto& [k, v] : doc_["config"].items())
        std::cout << "config." << k << "=" << scalar(v) << "\n";
    }
    if (doc_.contains("result"))
      print_flat("", doc_["result"]);
  }

private:
  static std::string scalar(const json& v)
  {
    if (v.is_string())
      return v.get<std::string>();
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (std::isinf(d))
        return d > 0 ? "inf" : "-inf";
      std::ostringstream s;
      s.precision(10);
      s << d;
      return s.str();
    }
    return v.dump();
  }

  static void print_flat(const std::string& prefix, const json& v)
  {
    if (v.is_object()) {
      for (const auto& [k, child] : v.items())
        print_flat(prefix.empty() ? k : prefix + "." + k, child);
    } else if (v.is_array() && !v.empty() && (v.front().is_object() || v.front().is_array())) {
      for (std::size_t i = 0; i < v.size(); ++i)
        print_flat(prefix + "." + std::to_string(i), v[i]);
    } else if (v.is_array()) {
      std::string joined;
      for (const auto& x : v)
        joined += (joined.empty() ? "" : ",") + scalar(x);
      std::cout << prefix << "=" << joined << "\n";
    } else {
      std::cout << prefix << "=" << scalar(v) << "\n";
    }
  }

  const Globals& g_;
  json doc_ = json::object();
};

// json does not serialize infinity; keep it as a string.
json number_or_inf(double v)
{
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  return v;
}

StreamMeta resolve_meta(const Globals& g, const fs::path& dat)
{
  const fs::path meta_path = g.meta.empty() ? sidecar_path(dat) : fs::path(g.meta);
  return read_meta(meta_path);
}

std::vector<std::string> split_list(const std::string& text)
{
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ','))
    if (!trim(item).empty())
      out.push_back(trim(item));
  return out;
}

void check_task_cap(std::size_t tasks)
{
  if (const char* env = std::getenv("SPIKEKIT_THREADS"); env && tasks > worker_limit())
    throw UsageError(std::to_string(tasks) + " tasks need one worker each, SPIKEKIT_THREADS=" + env);
}

// ---------------------------------------------------------------------------
// Tasks available to play and bench.

struct TaskOptions
{
  fs::path save_dir;
};

TaskSpec make_task(const std::string& name, const TaskOptions& opts)
{
  if (name == "count") {
    return {name, [](const FramePiece& piece) -> std::any {
              return count_ones(piece.spikes.data());
            }};
  }
  if (name == "tfp") {
    return {name, [dir = opts.save_dir](const FramePiece& piece) -> std::any {
              ReconImage img = tfp(piece.spikes, 0, piece.spikes.num_steps());
              if (!dir.empty()) {
                char file[64];
                std::snprintf(file, sizeof(file), "piece_%06llu.pgm",
                              static_cast<unsigned long long>(piece.index));
                write_pgm(img.pixels, dir / file);
              }
              return img;
            }};
  }
  if (name == "tfi") {
    return {name, [](const FramePiece& piece) -> std::any {
              const std::size_t t = piece.spikes.num_steps();
              return tfi(piece.spikes, t / 2, std::max<std::size_t>(1, t / 2));
            }};
  }
  if (name.rfind("sleep", 0) == 0) {
    // sleepN: synthetic task that takes N milliseconds.
    double ms = 0.0;
    try {
      ms = std::stod(name.substr(5));
    } catch (const std::exception&) {
      throw UsageError("task '" + name + "' needs a duration, e.g. sleep2");
    }
    return {name, [ms](const FramePiece&) -> std::any {
              std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
              return {};
            }};
  }
  throw UsageError("unknown task '" + name + "' (expected count, tfp, tfi, sleepN or none)");
}

std::vector<TaskSpec> make_tasks(const std::string& list, const TaskOptions& opts)
{
  std::vector<TaskSpec> tasks;
  if (list == "none")
    return tasks;
  for (const auto& name : split_list(list))
    tasks.push_back(make_task(name, opts));
  if (tasks.empty())
    throw UsageError("--tasks is empty; use 'none' for no tasks");
  return tasks;
}

// Runs a session until it finishes, the duration elapses or SIGINT arrives.
void drive(PipelineSession& session, std::optional<double> duration)
{
  session.start();
  const auto t0 = std::chrono::steady_clock::now();
  while (!session.finished()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (g_interrupted.load() || (duration && elapsed >= *duration)) {
      session.stop();
      break;
    }
  }
  session.wait();
}

json stats_json(const PipelineStats& s)
{
  json j;
  j["produced"] = s.produced;
  j["delivered"] = s.delivered;
  j["dropped"] = s.dropped;
  j["dropped_app_full"] = s.dropped_app_full;
  j["dropped_busy"] = s.dropped_busy;
  j["dropped_drain"] = s.dropped_drain;
  j["blocks"] = s.blocks;
  j["frames"] = s.frames;
  j["gap_events"] = s.gap_events;
  j["missing_blocks"] = s.missing_blocks;
  j["conserved"] = s.conserved();
  json tasks = json::object();
  for (const auto& t : s.tasks)
    tasks[t.name] = {{"processed", t.processed}, {"failed", t.failed}};
  j["tasks"] = tasks;
  j["wall_seconds"] = s.wall_seconds;
  j["wall_frames_per_second"] = s.frames_per_second;
  return j;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs
{
  std::string images_dir;
  std::string out_stem;
  double theta = 255.0;
  double gain_tau = 1.0;
  std::size_t repeats = 255;
  double noise = 0.0;
  double interval_us = 25.0;
  bool random_phase = false;
};

int cmd_simulate(const Globals& g, const SimulateArgs& a)
{
  const fs::path dir = a.images_dir;
  if (!fs::is_directory(dir))
    throw IoError("image directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && is_image_path(e.path()))
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw IoError("no .pgm or .png images in '" + dir.string() + "'");

  std::vector<IntensityFrame> frames;
  for (const auto& f : files) {
    const GrayImage img = read_image(f);
    if (!frames.empty() && !frames.front().same_shape(img))
      throw SizeError("image '" + f.string() + "' is " + std::to_string(img.height()) + "x" +
                      std::to_string(img.width()) + ", expected " +
                      std::to_string(frames.front().height()) + "x" +
                      std::to_string(frames.front().width()));
    frames.push_back(to_intensity(img));
  }

  const SensorConfig sensor = SensorConfig::calibrated(frames.front().height(), frames.front().width(),
                                                       a.gain_tau, a.theta, a.interval_us);
  SimulateOptions opts;
  opts.initial = a.random_phase ? InitialResidual::uniform_random : InitialResidual::zeros;
  opts.seed = g.seed;
  opts.noise_amplitude = a.noise;
  opts.threads = worker_limit();
  SimulationDiagnostics diag;
  const SpikeStream stream = simulate(frames, a.repeats, sensor, opts, &diag);

  const fs::path dat = a.out_stem + ".dat";
  write_dat(stream, dat);
  StreamMeta meta;
  meta.width = sensor.width;
  meta.height = sensor.height;
  meta.polling_interval_us = a.interval_us;
  meta.extra["simulator.theta"] = format_number(a.theta);
  meta.extra["simulator.gain_tau"] = format_number(a.gain_tau);
  meta.extra["simulator.repeats"] = std::to_string(a.repeats);
  write_meta(meta, sidecar_path(dat));

  const CountMap counts = spike_count_map(stream, 0, stream.num_steps());
  const auto px = counts.pixels();
  const auto [mn, mx] = std::minmax_element(px.begin(), px.end());
  double sum = 0;
  for (auto c : px)
    sum += c;

  if (diag.multi_crossings > 0 && !g.quiet)
    std::cerr << "warning: " << diag.multi_crossings
              << " pixel-steps crossed the threshold more than once (gain*tau*L >= 2*theta); "
                 "collapsed to one spike each\n";

  Report r(g);
  r.config("images_dir", dir.string());
  r.config("out", dat.string());
  r.config("theta", a.theta);
  r.config("gain_tau", a.gain_tau);
  r.config("repeats", a.repeats);
  r.config("noise", a.noise);
  r.config("interval_us", a.interval_us);
  r.config("initial", a.random_phase ? "uniform_random" : "zeros");
  r.config("seed", g.seed);
  r.set("images", files.size());
  r.set("height", stream.height());
  r.set("width", stream.width());
  r.set("frames", stream.num_steps());
  r.set("total_spikes", stream.total_spikes());
  r.set("min_count_per_pixel", *mn);
  r.set("max_count_per_pixel", *mx);
  r.set("mean_count_per_pixel", sum / static_cast<double>(px.size()));
  r.set("multi_crossings", diag.multi_crossings);
  r.print();
  return 0;
}

// ---------------------------------------------------------------------------
// reconstruct

struct ReconstructArgs
{
  std::string dat;
  std::string method = "tfp";
  std::size_t start = 0;
  std::size_t window = 255;
  std::optional<std::size_t> full_scale;
  std::optional<std::size_t> anchor;
  std::optional<std::size_t> max_search;
  std::optional<double> gamma;
  std::optional<std::size_t> stride;
  std::string out;
  std::string gt;
  bool despike = false;
};

int cmd_reconstruct(const Globals& g, const ReconstructArgs& a)
{
  if (a.method != "tfp" && a.method != "tfi")
    throw UsageError("--method must be tfp or tfi");
  if (a.out.empty())
    throw UsageError("--out is required");
  if (a.gamma && !(*a.gamma > 0.0))
    throw UsageError("--gamma must be positive");

  const fs::path dat = a.dat;
  const StreamMeta meta = resolve_meta(g, dat);
  SpikeStream stream = read_dat(dat, meta);
  if (a.despike)
    stream = median_despike(stream);

  std::vector<ReconImage> images;
  if (a.method == "tfp") {
    if (a.stride)
      images = sliding_tfp(stream, a.window, *a.stride, a.full_scale);
    else
      images.push_back(tfp(stream, a.start, a.window, a.full_scale));
  } else {
    const std::size_t anchor = a.anchor.value_or(stream.num_steps() / 2);
    const std::size_t search = a.max_search.value_or(std::max<std::size_t>(1, stream.num_steps()));
    images.push_back(tfi(stream, anchor, search));
  }
  if (a.gamma)
    for (auto& img : images)
      img = brighten(img, *a.gamma);

  std::vector<std::string> written;
  const fs::path out = a.out;
  if (a.stride) {
    for (std::size_t i = 0; i < images.size(); ++i) {
      char suffix[32];
      std::snprintf(suffix, sizeof(suffix), "_%05zu", i);
      const fs::path p = out.parent_path() / (out.stem().string() + suffix + out.extension().string());
      write_image(images[i].pixels, p);
      written.push_back(p.string());
    }
  } else {
    write_image(images.front().pixels, out);
    written.push_back(out.string());
  }

  Report r(g);
  r.config("dat", dat.string());
  r.config("method", a.method);
  if (a.method == "tfp") {
    r.config("start", a.start);
    r.config("window", a.window);
    r.config("full_scale", a.full_scale.value_or(a.window));
    if (a.stride)
      r.config("stride", *a.stride);
  } else {
    r.config("anchor", images.front().anchor);
  }
  if (a.gamma)
    r.config("gamma", *a.gamma);
  r.config("despike", a.despike);
  r.set("frames", stream.num_steps());
  r.set("images", images.size());
  r.set("written", written);

  if (!a.gt.empty()) {
    const GrayImage gt = read_image(a.gt);
    const QualityReport q = compare(gt, images.front().pixels);
    r.set("mse", q.mse);
    r.set("psnr_db", number_or_inf(q.psnr_db));
    r.set("ssim", q.ssim);
  }
  r.print();
  return 0;
}

// ---------------------------------------------------------------------------
// play

struct PlayArgs
{
  std::string dat;
  std::string remote;
  std::string blocks_file;
  double rate = 40000.0;
  std::size_t t_cusum = 400;
  std::size_t block_frames = 400;
  std::size_t lib_capacity = 8;
  std::size_t app_capacity = 2;
  std::string tasks = "count";
  std::optional<double> duration;
  std::string save_dir;
  bool log = false;
};

int cmd_play(const Globals& g, const PlayArgs& a)
{
  if (!(a.rate > 0.0))
    throw UsageError("--rate must be positive");
  if (a.t_cusum < 1 || a.block_frames < 1)
    throw UsageError("--t-cusum and --block-frames must be at least 1");
  const int sources = !a.dat.empty() + !a.remote.empty() + !a.blocks_file.empty();
  if (sources != 1)
    throw UsageError("give exactly one of DAT, --remote or --blocks");

  StreamMeta meta;
  if (!a.dat.empty()) {
    meta = resolve_meta(g, a.dat);
  } else {
    if (g.meta.empty())
      throw UsageError("--meta is required with --remote or --blocks");
    meta = read_meta(g.meta);
  }

  TaskOptions topts;
  if (!a.save_dir.empty()) {
    topts.save_dir = a.save_dir;
    fs::create_directories(topts.save_dir);
  }
  auto tasks = make_tasks(a.tasks, topts);
  check_task_cap(tasks.size());

  PipelineConfig cfg;
  cfg.height = meta.height;
  cfg.width = meta.width;
  cfg.t_cusum = a.t_cusum;
  cfg.lib_capacity = a.lib_capacity;
  cfg.app_capacity = a.app_capacity;

  const std::size_t bpf = meta.geometry().bytes_per_frame();
  SourceFn source;
  std::shared_ptr<net::Socket> socket;
  std::shared_ptr<std::ifstream> block_file;
  if (!a.dat.empty()) {
    ReplayOptions ro;
    ro.rate = a.rate;
    ro.block_frames = a.block_frames;
    source = replay_source(std::make_shared<FileFrameReader>(a.dat, meta), ro);
  } else if (!a.remote.empty()) {
    socket = std::make_shared<net::Socket>(net::connect_to(a.remote));
    source = [socket, bpf](BlockQueue& sink, const std::atomic<bool>& cancel) {
      run_block_stream_source([&](std::span<std::uint8_t> dst) { return socket->read_exact(dst); },
                              bpf, sink, cancel);
    };
  } else {
    block_file = std::make_shared<std::ifstream>(a.blocks_file, std::ios::binary);
    if (!*block_file)
      throw IoError("cannot open block stream '" + a.blocks_file + "'");
    source = [block_file, bpf](BlockQueue& sink, const std::atomic<bool>& cancel) {
      run_block_stream_source(
        [&](std::span<std::uint8_t> dst) {
          block_file->read(reinterpret_cast<char*>(dst.data()), static_cast<std::streamsize>(dst.size()));
          return static_cast<std::size_t>(block_file->gcount()) == dst.size();
        },
        bpf, sink, cancel);
    };
  }

  std::vector<std::string> names;
  for (const auto& t : tasks)
    names.push_back(t.name);
  PipelineSession session(std::move(source), cfg, std::move(tasks));
  drive(session, a.duration);
  const PipelineStats s = session.stats();

  Report r(g);
  r.config("source", !a.dat.empty() ? a.dat : !a.remote.empty() ? "remote:" + a.remote : a.blocks_file);
  r.config("rate", a.rate);
  r.config("t_cusum", a.t_cusum);
  r.config("block_frames", a.block_frames);
  r.config("lib_capacity", a.lib_capacity);
  r.config("app_capacity", a.app_capacity);
  r.config("tasks", a.tasks);
  if (a.duration)
    r.config("duration", *a.duration);
  r.result() = stats_json(s);
  r.set("interrupted", g_interrupted.load());
  if (a.log)
    for (std::size_t i = 0; i < names.size(); ++i)
      r.result()["log"][names[i]] = session.processed_log(i);
  r.print();
  return s.conserved() ? 0 : 1;
}

// ---------------------------------------------------------------------------
// serve: push a block stream to one TCP client or into a file.

struct ServeArgs
{
  std::string dat;
  std::optional<std::uint16_t> port;
  std::string output;
  double rate = 40000.0;
  std::size_t block_frames = 400;
  bool unpaced = false;
};

int cmd_serve(const Globals& g, const ServeArgs& a)
{
  if (!a.unpaced && !(a.rate > 0.0))
    throw UsageError("--rate must be positive");
  if (a.port.has_value() == !a.output.empty())
    throw UsageError("give exactly one of --port or --output");
  const StreamMeta meta = resolve_meta(g, a.dat);
  FileFrameReader reader(a.dat, meta);
  ReplayOptions ro;
  ro.rate = a.rate;
  ro.block_frames = a.block_frames;
  ro.unpaced = a.unpaced;

  ReplayResult res;
  if (!a.output.empty()) {
    std::ofstream out(a.output, std::ios::binary | std::ios::trunc);
    if (!out)
      throw IoError("cannot open '" + a.output + "' for writing");
    res = write_block_stream(reader, ro, [&](std::span<const std::uint8_t> bytes) {
      out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    });
    if (!out)
      throw IoError("write to '" + a.output + "' failed");
  } else {
    net::Socket listener = net::listen_local(*a.port);
    if (!g.quiet)
      std::cerr << "listening on 127.0.0.1:" << net::local_port(listener) << "\n";
    net::Socket client = net::accept_one(listener);
    res = write_block_stream(reader, ro,
                             [&](std::span<const std::uint8_t> bytes) { client.write_all(bytes); });
  }

  Report r(g);
  r.config("dat", a.dat);
  r.config("rate", a.rate);
  r.config("block_frames", a.block_frames);
  r.config("unpaced", a.unpaced);
  r.set("blocks", res.blocks);
  r.set("frames", res.frames);
  r.print();
  return 0;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs
{
  std::string dat;
  bool synthetic = false;
  std::string rates = "10000,20000,40000,80000";
  std::size_t frames = 40000;
  std::size_t height = 250;
  std::size_t width = 400;
  std::size_t t_cusum = 400;
  std::size_t block_frames = 400;
  std::string tasks = "count";
  bool ceiling = true;
};

int cmd_bench(const Globals& g, const BenchArgs& a)
{
  if (!a.dat.empty() && a.synthetic)
    throw UsageError("give either DAT or --synthetic, not both");
  std::vector<double> rates;
  for (const auto& item : split_list(a.rates)) {
    double v = 0;
    try {
      v = std::stod(item);
    } catch (const std::exception&) {
      throw UsageError("bad rate '" + item + "' in --rate-sweep");
    }
    if (!(v > 0.0))
      throw UsageError("rates must be positive");
    rates.push_back(v);
  }
  {
    const auto probe = make_tasks(a.tasks, {});
    check_task_cap(probe.size());
  }

  StreamMeta meta;
  SpikeStream pattern;
  std::size_t frames = a.frames;
  if (!a.dat.empty()) {
    meta = resolve_meta(g, a.dat);
    pattern = read_dat(a.dat, meta);
    if (pattern.num_steps() == 0)
      throw CorruptFileError("'" + a.dat + "' holds no frames");
  } else {
    meta.height = a.height;
    meta.width = a.width;
    // 64 distinct frames replayed cyclically keep the working set small.
    pattern = random_stream(meta.geometry(64), g.seed);
  }

  auto run_point = [&](std::optional<double> rate) {
    PipelineConfig cfg;
    cfg.height = meta.height;
    cfg.width = meta.width;
    cfg.t_cusum = a.t_cusum;
    ReplayOptions ro;
    ro.block_frames = a.block_frames;
    ro.unpaced = !rate;
    ro.rate = rate.value_or(1.0);
    PipelineSession session(replay_source(std::make_shared<MemoryFrameReader>(pattern, frames), ro),
                            cfg, make_tasks(a.tasks, {}));
    drive(session, std::nullopt);
    const PipelineStats s = session.stats();
    const ThroughputReport t = throughput_report(s.produced, s.dropped, std::max(s.wall_seconds, 1e-9));
    json row;
    row["requested_fps"] = rate ? json(*rate) : json("max");
    row["frames"] = s.frames;
    row["achieved_fps"] = static_cast<double>(s.frames) / std::max(s.wall_seconds, 1e-9);
    row["payload_mb_per_s"] = static_cast<double>(s.frames) *
                              static_cast<double>(meta.geometry().bytes_per_frame()) / 1e6 /
                              std::max(s.wall_seconds, 1e-9);
    row["pieces_per_second"] = t.frames_per_second;
    row["produced"] = s.produced;
    row["delivered"] = s.delivered;
    row["dropped"] = s.dropped;
    row["drop_ratio"] = t.drop_ratio;
    row["dropped_app_full"] = s.dropped_app_full;
    row["dropped_busy"] = s.dropped_busy;
    row["dropped_drain"] = s.dropped_drain;
    row["conserved"] = s.conserved();
    row["wall_seconds"] = s.wall_seconds;
    return row;
  };

  json table = json::array();
  for (double rate : rates) {
    if (g_interrupted.load())
      break;
    table.push_back(run_point(rate));
  }
  std::optional<json> ceiling;
  if (a.ceiling && !g_interrupted.load())
    ceiling = run_point(std::nullopt);

  if (g.json) {
    json doc;
    doc["config"] = {{"source", a.dat.empty() ? "synthetic" : a.dat},
                     {"height", meta.height},
                     {"width", meta.width},
                     {"frames", frames},
                     {"t_cusum", a.t_cusum},
                     {"block_frames", a.block_frames},
                     {"tasks", a.tasks},
                     {"seed", g.seed}};
    doc["result"]["points"] = table;
    if (ceiling)
      doc["result"]["ceiling"] = *ceiling;
    std::cout << doc.dump(2) << "\n";
    return 0;
  }

  if (!g.quiet) {
    std::cout << "# effective config\n"
              << "config.source=" << (a.dat.empty() ? "synthetic" : a.dat) << "\n"
              << "config.geometry=" << meta.height << "x" << meta.width << "\n"
              << "config.frames=" << frames << "\n"
              << "config.t_cusum=" << a.t_cusum << "\n"
              << "config.block_frames=" << a.block_frames << "\n"
              << "config.tasks=" << a.tasks << "\n"
              << "config.seed=" << g.seed << "\n";
  }
  char line[160];
  std::snprintf(line, sizeof(line), "%14s %14s %10s %10s %10s %10s\n", "requested_fps",
                "wall_fps", "wall_MB/s", "produced", "dropped", "drop_ratio");
  std::cout << line;
  auto print_row = [&](const json& row) {
    const std::string req = row["requested_fps"].is_string()
                              ? row["requested_fps"].get<std::string>()
                              : std::to_string(static_cast<long long>(row["requested_fps"].get<double>()));
    std::snprintf(line, sizeof(line), "%14s %14.0f %10.1f %10llu %10llu %10.4f\n", req.c_str(),
                  row["achieved_fps"].get<double>(), row["payload_mb_per_s"].get<double>(),
                  static_cast<unsigned long long>(row["produced"].get<std::uint64_t>()),
                  static_cast<unsigned long long>(row["dropped"].get<std::uint64_t>()),
                  row["drop_ratio"].get<double>());
    std::cout << line;
  };
  for (const auto& row : table)
    print_row(row);
  if (ceiling)
    print_row(*ceiling);
  return 0;
}

// ---------------------------------------------------------------------------
// inspect

int cmd_inspect(const Globals& g, const std::string& dat_arg, std::size_t bins)
{
  if (bins < 1)
    throw UsageError("--bins must be at least 1");
  const fs::path dat = dat_arg;
  const StreamMeta meta = resolve_meta(g, dat);
  const SpikeStream stream = read_dat(dat, meta);
  const std::size_t pixels = stream.geometry().pixels();

  std::vector<std::uint64_t> histogram(bins, 0);
  std::uint64_t total = 0;
  for (std::size_t k = 0; k < stream.num_steps(); ++k) {
    const std::uint64_t n = count_ones(stream.frame(k));
    total += n;
    const double d = static_cast<double>(n) / static_cast<double>(pixels);
    histogram[std::min(bins - 1, static_cast<std::size_t>(d * static_cast<double>(bins)))]++;
  }
  const double bits = static_cast<double>(pixels) * static_cast<double>(stream.num_steps());

  Report r(g);
  r.config("dat", dat.string());
  r.config("bins", bins);
  r.set("height", stream.height());
  r.set("width", stream.width());
  r.set("frames", stream.num_steps());
  r.set("bytes_per_frame", stream.bytes_per_frame());
  r.set("polling_interval_us", meta.polling_interval_us);
  r.set("duration_ms", static_cast<double>(stream.num_steps()) * meta.polling_interval_us / 1000.0);
  r.set("label_type", std::string(to_string(meta.label_type)));
  r.set("total_spikes", total);
  r.set("density", bits > 0 ? static_cast<double>(total) / bits : 0.0);
  r.set("frame_density_histogram", histogram);
  r.print();
  return 0;
}

// ---------------------------------------------------------------------------
// dataset

int cmd_dataset(const Globals& g, const std::string& root, const std::string& name,
                const std::string& manifest)
{
  const DatasetDescriptor desc = scan(root, name);
  if (!manifest.empty())
    write_manifest(desc, manifest);
  for (const auto& w : desc.warnings)
    if (!g.quiet)
      std::cerr << "warning: " << w << "\n";

  Report r(g);
  r.config("root", desc.root.string());
  r.config("name", desc.name);
  if (!manifest.empty())
    r.config("manifest", manifest);
  r.set("width", desc.width());
  r.set("height", desc.height());
  r.set("label_type", std::string(to_string(desc.label_type)));
  r.set("samples", desc.samples.size());
  json samples = json::array();
  for (const auto& s : desc.samples) {
    json j;
    j["stem"] = s.stem;
    j["frames"] = s.num_steps;
    j["label"] = s.label_path ? s.label_path->string() : "";
    samples.push_back(j);
  }
  r.set("sample", samples);
  r.set("warnings", desc.warnings);
  r.print();
  return 0;
}

} // namespace

int main(int argc, char** argv)
{
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  CLI::App app{"spikekit: spike camera stream engine"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--meta", g.meta, "Meta (.info) file; defaults to the sidecar of the .dat");
  app.add_option("--seed", g.seed, "Seed for every random choice");
  app.add_flag("--quiet", g.quiet, "Suppress the effective-config block and warnings");
  app.add_flag("--json", g.json, "Machine-readable JSON output");
  app.fallthrough();

  std::function<int()> run;

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Generate spikes from a directory of 8-bit images");
  c_sim->add_option("images_dir", sim.images_dir)->required();
  c_sim->add_option("out_stem", sim.out_stem, "Writes <out_stem>.dat and <out_stem>.info")->required();
  c_sim->add_option("--theta", sim.theta)->check(CLI::PositiveNumber);
  c_sim->add_option("--gain-tau", sim.gain_tau, "Charge per step per unit intensity")->check(CLI::PositiveNumber);
  c_sim->add_option("--repeats", sim.repeats, "Polling steps per image")->check(CLI::PositiveNumber);
  c_sim->add_option("--noise", sim.noise, "Additive accumulator noise amplitude")->check(CLI::NonNegativeNumber);
  c_sim->add_option("--interval-us", sim.interval_us)->check(CLI::PositiveNumber);
  c_sim->add_flag("--random-phase", sim.random_phase, "Seeded uniform initial residuals");
  c_sim->callback([&] { run = [&] { return cmd_simulate(g, sim); }; });

  ReconstructArgs rec;
  auto* c_rec = app.add_subcommand("reconstruct", "Reconstruct PGM images from a spike file");
  c_rec->add_option("dat", rec.dat)->required();
  c_rec->add_option("--method", rec.method)->check(CLI::IsMember({"tfp", "tfi"}));
  c_rec->add_option("--start", rec.start);
  c_rec->add_option("--window", rec.window)->check(CLI::PositiveNumber);
  c_rec->add_option("--full-scale", rec.full_scale);
  c_rec->add_option("--anchor", rec.anchor);
  c_rec->add_option("--max-search", rec.max_search);
  c_rec->add_option("--gamma", rec.gamma);
  c_rec->add_option("--stride", rec.stride, "Write a numbered sliding-window sequence")->check(CLI::PositiveNumber);
  c_rec->add_option("--out", rec.out)->required();
  c_rec->add_option("--gt", rec.gt, "Ground-truth image for PSNR/SSIM");
  c_rec->add_flag("--despike", rec.despike, "3-step temporal median pre-filter");
  c_rec->callback([&] { run = [&] { return cmd_reconstruct(g, rec); }; });

  PlayArgs play;
  auto* c_play = app.add_subcommand("play", "Replay a stream through the real-time pipeline");
  c_play->add_option("dat", play.dat);
  c_play->add_option("--remote", play.remote, "Read a block stream from host:port");
  c_play->add_option("--blocks", play.blocks_file, "Read a block stream file");
  c_play->add_option("--rate", play.rate, "Polling frames per second");
  c_play->add_option("--t-cusum", play.t_cusum);
  c_play->add_option("--block-frames", play.block_frames);
  c_play->add_option("--lib-capacity", play.lib_capacity)->check(CLI::PositiveNumber);
  c_play->add_option("--app-capacity", play.app_capacity);
  c_play->add_option("--tasks", play.tasks, "Comma list of count,tfp,tfi,sleepN or none");
  c_play->add_option("--duration", play.duration, "Stop after this many seconds");
  c_play->add_option("--save-dir", play.save_dir, "Directory for tfp task images");
  c_play->add_flag("--log", play.log, "Print processed piece indices per task");
  c_play->callback([&] { run = [&] { return cmd_play(g, play); }; });

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "Emit a replay block stream over TCP or into a file");
  c_serve->add_option("dat", serve.dat)->required();
  c_serve->add_option("--port", serve.port);
  c_serve->add_option("--output", serve.output);
  c_serve->add_option("--rate", serve.rate);
  c_serve->add_option("--block-frames", serve.block_frames)->check(CLI::PositiveNumber);
  c_serve->add_flag("--unpaced", serve.unpaced);
  c_serve->callback([&] { run = [&] { return cmd_serve(g, serve); }; });

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Pipeline throughput sweep");
  c_bench->add_option("dat", bench.dat);
  c_bench->add_flag("--synthetic", bench.synthetic, "Random 50% density frames (default without DAT)");
  c_bench->add_option("--rate-sweep", bench.rates, "Comma list of frame rates");
  c_bench->add_option("--frames", bench.frames, "Frames replayed per rate point")->check(CLI::PositiveNumber);
  c_bench->add_option("--height", bench.height)->check(CLI::PositiveNumber);
  c_bench->add_option("--width", bench.width)->check(CLI::PositiveNumber);
  c_bench->add_option("--t-cusum", bench.t_cusum)->check(CLI::PositiveNumber);
  c_bench->add_option("--block-frames", bench.block_frames)->check(CLI::PositiveNumber);
  c_bench->add_option("--tasks", bench.tasks);
  c_bench->add_flag("!--no-ceiling", bench.ceiling, "Skip the unpaced ceiling run");
  c_bench->callback([&] { run = [&] { return cmd_bench(g, bench); }; });

  std::string inspect_dat;
  std::size_t inspect_bins = 10;
  auto* c_inspect = app.add_subcommand("inspect", "Summarize a spike file");
  c_inspect->add_option("dat", inspect_dat)->required();
  c_inspect->add_option("--bins", inspect_bins, "Per-frame density histogram bins");
  c_inspect->callback([&] { run = [&] { return cmd_inspect(g, inspect_dat, inspect_bins); }; });

  std::string ds_root, ds_name, ds_manifest;
  auto* c_ds = app.add_subcommand("dataset", "Scan a dataset directory");
  c_ds->add_option("root", ds_root)->required();
  c_ds->add_option("--name", ds_name);
  c_ds->add_option("--manifest", ds_manifest, "Write a dataset.manifest file");
  c_ds->callback([&] { run = [&] { return cmd_dataset(g, ds_root, ds_name, ds_manifest); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return run();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
