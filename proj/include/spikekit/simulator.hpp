#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "spikekit/image.hpp"
#include "spikekit/spike_stream.hpp"

namespace spikekit {

/// Integrate-and-fire sensor parameters.
struct SensorConfig
{
  double threshold = 255.0;          // accumulator units per spike
  double gain = 40000.0;             // accumulator units per (intensity * second)
  double polling_interval_us = 25.0; // read-out period
  std::size_t height = 1;
  std::size_t width = 1;

  /// Config with gain chosen so that gain * interval equals `gain_tau`.
  static SensorConfig calibrated(std::size_t height, std::size_t width, double gain_tau = 1.0,
                                 double threshold = 255.0, double polling_interval_us = 25.0);

  /// Charge added in one polling step by a pixel of the given intensity.
  /// Evaluated as (gain * interval_us) * intensity / 1e6 so that integer
  /// calibrations stay exact in floating point.
  double charge_per_step(double intensity) const
  {
    return gain * polling_interval_us * intensity / 1e6;
  }

  // Throws DomainError unless threshold, gain and interval are positive.
  void validate() const;
};

/// Residual charge per pixel, kept in [0, threshold) between steps.
struct PixelState
{
  std::vector<double> residual;
};

enum class InitialResidual { zeros, uniform_random };

struct SimulateOptions
{
  InitialResidual initial = InitialResidual::zeros;
  std::uint64_t seed = 0;
  // Amplitude of the zero-mean uniform additive noise applied to the
  // accumulator each step. 0 disables the hook.
  double noise_amplitude = 0.0;
  // 0 means "use default_worker_count()".
  std::size_t threads = 1;
};

struct SimulationDiagnostics
{
  // Pixel-steps whose charge crossed the threshold twice or more and were
  // collapsed into a single spike.
  std::uint64_t multi_crossings = 0;
};

PixelState initial_state(const SensorConfig& config, InitialResidual policy, std::uint64_t seed = 0);

struct StepResult
{
  PixelState state;
  std::vector<std::uint8_t> frame; // packed, ceil(H*W/8) bytes
};

/// One polling step with the intensity held constant over the interval.
/// Throws DomainError on negative intensity and SizeError on shape mismatch.
StepResult step(const PixelState& state, const IntensityFrame& intensity, const SensorConfig& config);

/// Stateful simulator; equivalent to folding step() over the inputs.
class Simulator
{
public:
  explicit Simulator(SensorConfig config, const SimulateOptions& options = {});

  /// Advances one polling step and writes the packed frame into `out`.
  void step(const IntensityFrame& intensity, std::span<std::uint8_t> out);

  const PixelState& state() const { return state_; }
  const SensorConfig& config() const { return config_; }
  const SimulationDiagnostics& diagnostics() const { return diagnostics_; }

private:
  SensorConfig config_;
  SimulateOptions options_;
  PixelState state_;
  SimulationDiagnostics diagnostics_;
  std::uint64_t step_index_ = 0;
};

/// Holds every frame for `repeats_per_frame` steps and emits
/// frames.size() * repeats_per_frame polling steps.
SpikeStream simulate(std::span<const IntensityFrame> frames, std::size_t repeats_per_frame,
                     const SensorConfig& config, const SimulateOptions& options = {},
                     SimulationDiagnostics* diagnostics = nullptr);

/// Spike count over the trailing `window` steps divided by `window`.
RateMap firing_rate(const SpikeStream& stream, std::size_t window);

IntensityFrame to_intensity(const GrayImage& image);

} // namespace spikekit
