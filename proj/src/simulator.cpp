#include "spikekit/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <thread>

#include "spikekit/threads.hpp"

namespace spikekit {

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based noise so the value for (step, pixel) does not depend on the
// order in which pixels are visited.
double noise_sample(std::uint64_t seed, std::uint64_t step, std::size_t pixel, double amplitude)
{
  const std::uint64_t bits = splitmix64(seed ^ splitmix64(step * 0x100000001b3ULL + pixel));
  const double unit = static_cast<double>(bits >> 11) * 0x1.0p-53; // [0, 1)
  return (2.0 * unit - 1.0) * amplitude;
}

void check_intensity(const IntensityFrame& intensity, const SensorConfig& config)
{
  if (intensity.height() != config.height || intensity.width() != config.width)
    throw SizeError("intensity frame is " + std::to_string(intensity.height()) + "x" +
                    std::to_string(intensity.width()) + ", sensor is " +
                    std::to_string(config.height) + "x" + std::to_string(config.width));
  for (double v : intensity.pixels())
    if (!(v >= 0.0) || !std::isfinite(v))
      throw DomainError("intensity must be finite and non-negative, got " + std::to_string(v));
}

struct Kernel
{
  const SensorConfig& config;
  const SimulateOptions& options;

  double charge(double intensity) const
  {
    return config.gain * config.polling_interval_us * intensity / 1e6;
  }

  // Advances pixels [begin, end) by one step. `begin` is a multiple of 8 so
  // that concurrent callers never share an output byte. `charge` holds the
  // per-step charge of every pixel.
  void operator()(std::size_t begin, std::size_t end, const double* charge, double* residual,
                  std::uint8_t* frame, std::uint64_t step_index, std::uint64_t& multi) const
  {
    const double threshold = config.threshold;
    const bool noisy = options.noise_amplitude > 0.0;
    for (std::size_t b = begin; b < end; b += 8) {
      const std::size_t stop = std::min(end, b + 8);
      if (!noisy && stop == b + 8 && fast_byte(residual + b, charge + b, frame + b / 8))
        continue;
      unsigned bits = 0;
      for (std::size_t p = b; p < stop; ++p) {
        double accum = residual[p] + charge[p];
        if (noisy)
          accum = std::max(0.0, accum + noise_sample(options.seed, step_index, p,
                                                     options.noise_amplitude));
        if (accum >= 2.0 * threshold) [[unlikely]] {
          ++multi;
          bits |= 1u << (p - b);
          accum = std::fmod(accum, threshold);
        } else {
          // x - threshold is exact for threshold <= x <= 2 * threshold.
          const bool fire = accum >= threshold;
          bits |= static_cast<unsigned>(fire) << (p - b);
          accum -= fire ? threshold : 0.0;
        }
        residual[p] = accum;
      }
      frame[b / 8] |= static_cast<std::uint8_t>(bits);
    }
  }

  // Eight pixels without noise. Returns false, leaving the state untouched,
  // when some pixel would cross twice.
  bool fast_byte(double* residual, const double* charge, std::uint8_t* out) const
  {
    const double threshold = config.threshold;
    double a[8];
    bool twice = false;
    for (int i = 0; i < 8; ++i) {
      a[i] = residual[i] + charge[i];
      twice |= a[i] >= 2.0 * threshold;
    }
    if (twice)
      return false;
    unsigned bits = 0;
    for (int i = 0; i < 8; ++i) {
      const bool fire = a[i] >= threshold;
      bits |= static_cast<unsigned>(fire) << i;
      residual[i] = a[i] - (fire ? threshold : 0.0);
    }
    *out |= static_cast<std::uint8_t>(bits);
    return true;
  }

  std::vector<double> charges(const IntensityFrame& intensity) const
  {
    std::vector<double> out(intensity.size());
    auto in = intensity.pixels();
    for (std::size_t p = 0; p < out.size(); ++p)
      out[p] = charge(in[p]);
    return out;
  }
};

} // namespace

SensorConfig SensorConfig::calibrated(std::size_t height, std::size_t width, double gain_tau,
                                      double threshold, double polling_interval_us)
{
  SensorConfig c;
  c.threshold = threshold;
  c.polling_interval_us = polling_interval_us;
  c.gain = gain_tau * 1e6 / polling_interval_us;
  c.height = height;
  c.width = width;
  c.validate();
  return c;
}

void SensorConfig::validate() const
{
  if (!(threshold > 0.0) || !(gain > 0.0) || !(polling_interval_us > 0.0))
    throw DomainError("sensor threshold, gain and polling interval must be positive");
  if (height < 1 || width < 1)
    throw DomainError("sensor geometry needs height >= 1 and width >= 1");
}

PixelState initial_state(const SensorConfig& config, InitialResidual policy, std::uint64_t seed)
{
  config.validate();
  PixelState state;
  state.residual.assign(config.height * config.width, 0.0);
  if (policy == InitialResidual::uniform_random) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, config.threshold);
    for (double& r : state.residual)
      r = dist(rng);
  }
  return state;
}

StepResult step(const PixelState& state, const IntensityFrame& intensity, const SensorConfig& config)
{
  config.validate();
  check_intensity(intensity, config);
  const std::size_t pixels = config.height * config.width;
  if (state.residual.size() != pixels)
    throw SizeError("pixel state holds " + std::to_string(state.residual.size()) +
                    " residuals, sensor has " + std::to_string(pixels) + " pixels");

  StepResult result{state, std::vector<std::uint8_t>((pixels + 7) / 8, 0)};
  const SimulateOptions options;
  std::uint64_t multi = 0;
  const Kernel kernel{config, options};
  kernel(0, pixels, kernel.charges(intensity).data(), result.state.residual.data(),
         result.frame.data(), 0, multi);
  return result;
}

Simulator::Simulator(SensorConfig config, const SimulateOptions& options)
  : config_(config), options_(options),
    state_(initial_state(config_, options.initial, options.seed))
{
  if (options_.noise_amplitude < 0.0)
    throw DomainError("noise amplitude must be non-negative");
}

void Simulator::step(const IntensityFrame& intensity, std::span<std::uint8_t> out)
{
  check_intensity(intensity, config_);
  const std::size_t pixels = config_.height * config_.width;
  if (out.size() != (pixels + 7) / 8)
    throw SizeError("output frame holds " + std::to_string(out.size()) + " bytes, expected " +
                    std::to_string((pixels + 7) / 8));
  std::fill(out.begin(), out.end(), std::uint8_t{0});
  const Kernel kernel{config_, options_};
  kernel(0, pixels, kernel.charges(intensity).data(), state_.residual.data(), out.data(),
         step_index_++, diagnostics_.multi_crossings);
}

SpikeStream simulate(std::span<const IntensityFrame> frames, std::size_t repeats_per_frame,
                     const SensorConfig& config, const SimulateOptions& options,
                     SimulationDiagnostics* diagnostics)
{
  config.validate();
  if (repeats_per_frame < 1)
    throw DomainError("repeats_per_frame must be at least 1");
  if (frames.empty())
    throw DomainError("simulate needs at least one intensity frame");
  if (options.noise_amplitude < 0.0)
    throw DomainError("noise amplitude must be non-negative");
  for (const auto& f : frames)
    check_intensity(f, config);

  const StreamGeometry g{config.height, config.width, frames.size() * repeats_per_frame};
  const std::size_t pixels = g.pixels();
  const std::size_t bpf = g.bytes_per_frame();
  std::vector<std::uint8_t> bytes(g.total_bytes(), 0);
  PixelState state = initial_state(config, options.initial, options.seed);
  const Kernel kernel{config, options};
  std::vector<std::vector<double>> charges;
  for (const auto& f : frames)
    charges.push_back(kernel.charges(f));

  // Pixels evolve independently, so each worker runs every step for its own
  // byte-aligned band of pixels.
  auto run_band = [&](std::size_t begin, std::size_t end, std::uint64_t& multi) {
    std::uint64_t k = 0;
    for (const auto& c : charges) {
      const double* in = c.data();
      for (std::size_t r = 0; r < repeats_per_frame; ++r, ++k)
        kernel(begin, end, in, state.residual.data(), bytes.data() + k * bpf, k, multi);
    }
  };

  std::size_t workers = options.threads == 0 ? worker_limit() : options.threads;
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, bpf / 64));

  std::vector<std::uint64_t> multi(workers, 0);
  if (workers == 1) {
    run_band(0, pixels, multi[0]);
  } else {
    const std::size_t bytes_per_band = (bpf + workers - 1) / workers;
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = std::min(pixels, w * bytes_per_band * 8);
      const std::size_t end = std::min(pixels, (w + 1) * bytes_per_band * 8);
      if (begin < end)
        pool.emplace_back([&, begin, end, w] { run_band(begin, end, multi[w]); });
    }
  }

  if (diagnostics) {
    diagnostics->multi_crossings = 0;
    for (auto m : multi)
      diagnostics->multi_crossings += m;
  }
  return SpikeStream(g, std::move(bytes));
}

RateMap firing_rate(const SpikeStream& stream, std::size_t window)
{
  if (window == 0)
    throw DomainError("firing-rate window must be at least 1 step");
  if (window > stream.num_steps())
    throw RangeError("firing-rate window of " + std::to_string(window) +
                     " steps exceeds stream of " + std::to_string(stream.num_steps()));
  const CountMap counts = spike_count_map(stream, stream.num_steps() - window, window);
  RateMap rate(stream.height(), stream.width(), 0.0);
  auto out = rate.pixels();
  auto in = counts.pixels();
  for (std::size_t p = 0; p < in.size(); ++p)
    out[p] = static_cast<double>(in[p]) / static_cast<double>(window);
  return rate;
}

IntensityFrame to_intensity(const GrayImage& image)
{
  IntensityFrame out(image.height(), image.width(), 0.0);
  auto dst = out.pixels();
  auto src = image.pixels();
  for (std::size_t p = 0; p < src.size(); ++p)
    dst[p] = src[p];
  return out;
}

} // namespace spikekit
