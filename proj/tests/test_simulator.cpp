#include <doctest.h>

#include <cmath>
#include <random>

#include "spikekit/errors.hpp"
#include "spikekit/simulator.hpp"

using namespace spikekit;

namespace {

IntensityFrame constant(std::size_t h, std::size_t w, double value)
{
  return IntensityFrame(h, w, value);
}

// Integer oracle for canonical calibration (gain*tau = 1, integer threshold):
// the cumulative charge after k steps is k*L, and a spike is emitted whenever
// floor(cum / theta) increases.
std::vector<int> oracle_spikes(long level, long theta, long steps, long start_residual = 0)
{
  std::vector<int> out;
  long cum = start_residual;
  for (long k = 0; k < steps; ++k) {
    const long before = cum / theta;
    cum += level;
    out.push_back(cum / theta > before ? 1 : 0);
  }
  return out;
}

} // namespace

TEST_CASE("calibration keeps gain*tau exact")
{
  const SensorConfig c = SensorConfig::calibrated(1, 1);
  CHECK(c.gain == doctest::Approx(40000.0));
  for (int level = 0; level <= 255; ++level)
    REQUIRE(c.charge_per_step(level) == static_cast<double>(level));
  CHECK(SensorConfig::calibrated(1, 1, 1.0, 255.0, 20.0).charge_per_step(128) == 128.0);
}

TEST_CASE("step: dark pixel never fires")
{
  const SensorConfig c = SensorConfig::calibrated(1, 1);
  const StepResult r = step(initial_state(c, InitialResidual::zeros), constant(1, 1, 0), c);
  CHECK((r.frame[0] & 1) == 0);
  CHECK(r.state.residual[0] == 0.0);
}

TEST_CASE("step: constant 128 fires on steps 2, 4, 6, ...")
{
  const SensorConfig c = SensorConfig::calibrated(1, 1);
  PixelState s = initial_state(c, InitialResidual::zeros);
  const auto oracle = oracle_spikes(128, 255, 40);
  long cum = 0;
  for (std::size_t k = 0; k < 40; ++k) {
    StepResult r = step(s, constant(1, 1, 128), c);
    cum += 128;
    CHECK((r.frame[0] & 1) == oracle[k]);
    CHECK((r.frame[0] & 1) == ((k + 1) % 2 == 0 ? 1 : 0));
    CHECK(r.state.residual[0] == static_cast<double>(cum % 255));
    s = std::move(r.state);
  }
}

TEST_CASE("step: 510 steps of 128 give exactly 256 spikes")
{
  const SensorConfig c = SensorConfig::calibrated(1, 1);
  PixelState s = initial_state(c, InitialResidual::zeros);
  int spikes = 0;
  for (int k = 0; k < 510; ++k) {
    StepResult r = step(s, constant(1, 1, 128), c);
    spikes += r.frame[0] & 1;
    s = std::move(r.state);
  }
  CHECK(spikes == 510 * 128 / 255);
  CHECK(spikes == 256);
}

TEST_CASE("step: errors")
{
  const SensorConfig c = SensorConfig::calibrated(2, 2);
  const PixelState s = initial_state(c, InitialResidual::zeros);
  CHECK_THROWS_AS(step(s, constant(2, 2, -1.0), c), DomainError);
  CHECK_THROWS_AS(step(s, constant(2, 3, 1.0), c), SizeError);
  SensorConfig bad = c;
  bad.threshold = 0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("step: saturation emits one spike and keeps the full modulo residual")
{
  SensorConfig c = SensorConfig::calibrated(1, 1, 3.0); // 3*200 = 600 per step
  const StepResult r = step(initial_state(c, InitialResidual::zeros), constant(1, 1, 200), c);
  CHECK((r.frame[0] & 1) == 1);
  CHECK(r.state.residual[0] == doctest::Approx(std::fmod(600.0, 255.0)));

  SimulationDiagnostics diag;
  const IntensityFrame f = constant(1, 1, 200);
  simulate(std::span(&f, 1), 5, c, {}, &diag);
  CHECK(diag.multi_crossings == 5);
}

TEST_CASE("simulate")
{
  const SensorConfig c = SensorConfig::calibrated(3, 5);

  SUBCASE("all-zero frame")
  {
    const IntensityFrame f = constant(3, 5, 0);
    const SpikeStream s = simulate(std::span(&f, 1), 17, c);
    CHECK(s.num_steps() == 17);
    CHECK(s.total_spikes() == 0);
  }
  SUBCASE("full-scale 255 fires every step")
  {
    const IntensityFrame f = constant(3, 5, 255);
    const SpikeStream s = simulate(std::span(&f, 1), 10, c);
    const CountMap m = spike_count_map(s, 0, 10);
    for (auto v : m.pixels())
      CHECK(v == 10);
  }
  SUBCASE("two-frame hold [64, 192] with carried residual")
  {
    const std::vector<IntensityFrame> frames{constant(3, 5, 64), constant(3, 5, 192)};
    const SpikeStream s = simulate(frames, 255, c);
    REQUIRE(s.num_steps() == 510);
    const CountMap first = spike_count_map(s, 0, 255);
    const CountMap second = spike_count_map(s, 255, 255);
    // Oracle: cumulative charge 64*255 after the first window, then +192*255.
    const long c1 = 64L * 255 / 255;
    const long c2 = (64L * 255 + 192L * 255) / 255 - c1;
    for (std::size_t p = 0; p < first.size(); ++p) {
      CHECK(first.pixels()[p] == c1);
      CHECK(second.pixels()[p] == c2);
      CHECK(std::abs(static_cast<long>(first.pixels()[p]) - 64) <= 1);
      CHECK(std::abs(static_cast<long>(second.pixels()[p]) - 192) <= 1);
    }
  }
  SUBCASE("argument errors")
  {
    const IntensityFrame f = constant(3, 5, 1);
    CHECK_THROWS(simulate(std::span(&f, 1), 0, c));
    CHECK_THROWS(simulate(std::span<const IntensityFrame>{}, 3, c));
  }
}

TEST_CASE("property: exact count law matches the step oracle")
{
  std::mt19937 rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    const long level = static_cast<long>(rng() % 256);
    const long theta = 1 + static_cast<long>(rng() % 300);
    const long steps = 1 + static_cast<long>(rng() % 700);
    if (level > theta)
      continue; // at most one spike per step, so the law needs L <= theta
    const SensorConfig c = SensorConfig::calibrated(1, 2, 1.0, static_cast<double>(theta));
    const IntensityFrame f = constant(1, 2, static_cast<double>(level));
    const SpikeStream s = simulate(std::span(&f, 1), static_cast<std::size_t>(steps), c);
    const auto oracle = oracle_spikes(level, theta, steps);
    long oracle_total = 0;
    for (long k = 0; k < steps; ++k) {
      REQUIRE(s.get(0, 0, static_cast<std::size_t>(k)) == oracle[static_cast<std::size_t>(k)]);
      oracle_total += oracle[static_cast<std::size_t>(k)];
    }
    CHECK(spike_count_map(s, 0, s.num_steps())(0, 1) == steps * level / theta);
    CHECK(oracle_total == steps * level / theta);
  }
}

TEST_CASE("property: monotone in intensity over every prefix")
{
  std::mt19937 rng(8);
  const SensorConfig c = SensorConfig::calibrated(2, 4);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<IntensityFrame> lo, hi;
    for (int f = 0; f < 6; ++f) {
      IntensityFrame a(2, 4), b(2, 4);
      for (std::size_t p = 0; p < 8; ++p) {
        a.pixels()[p] = static_cast<double>(rng() % 256);
        b.pixels()[p] = std::min(255.0, a.pixels()[p] + static_cast<double>(rng() % 40));
      }
      lo.push_back(a);
      hi.push_back(b);
    }
    const SpikeStream sl = simulate(lo, 37, c);
    const SpikeStream sh = simulate(hi, 37, c);
    for (std::size_t t = 1; t <= sl.num_steps(); ++t) {
      const CountMap ml = spike_count_map(sl, 0, t);
      const CountMap mh = spike_count_map(sh, 0, t);
      for (std::size_t p = 0; p < 8; ++p)
        REQUIRE(mh.pixels()[p] >= ml.pixels()[p]);
    }
  }
}

TEST_CASE("property: residual stays in [0, theta)")
{
  std::mt19937 rng(2);
  SensorConfig c = SensorConfig::calibrated(3, 3, 1.7, 97.0);
  SimulateOptions opts;
  opts.noise_amplitude = 5.0;
  opts.seed = 4;
  Simulator sim(c, opts);
  std::vector<std::uint8_t> frame(2);
  for (int k = 0; k < 500; ++k) {
    IntensityFrame f(3, 3);
    for (auto& v : f.pixels())
      v = static_cast<double>(rng() % 256);
    sim.step(f, frame);
    for (double r : sim.state().residual)
      REQUIRE((r >= 0.0 && r < c.threshold));
  }
}

TEST_CASE("property: determinism and thread-count independence")
{
  std::mt19937 rng(6);
  const SensorConfig c = SensorConfig::calibrated(33, 47);
  std::vector<IntensityFrame> frames;
  for (int f = 0; f < 3; ++f) {
    IntensityFrame img(33, 47);
    for (auto& v : img.pixels())
      v = static_cast<double>(rng() % 256);
    frames.push_back(img);
  }
  for (bool noisy : {false, true}) {
    SimulateOptions a;
    a.initial = InitialResidual::uniform_random;
    a.seed = 77;
    a.noise_amplitude = noisy ? 3.0 : 0.0;
    SimulateOptions b = a;
    b.threads = 4;
    const SpikeStream s1 = simulate(frames, 20, c, a);
    CHECK(simulate(frames, 20, c, a) == s1);
    CHECK(simulate(frames, 20, c, b) == s1);
  }
  SimulateOptions other;
  other.initial = InitialResidual::uniform_random;
  other.seed = 78;
  SimulateOptions base = other;
  base.seed = 77;
  CHECK_FALSE(simulate(frames, 20, c, other) == simulate(frames, 20, c, base));
}

TEST_CASE("property: doubling gain with halved intensity is identical")
{
  std::mt19937 rng(12);
  SensorConfig c = SensorConfig::calibrated(4, 6, 0.75);
  SensorConfig c2 = c;
  c2.gain *= 2.0;
  std::vector<IntensityFrame> frames, halved;
  for (int f = 0; f < 4; ++f) {
    IntensityFrame img(4, 6);
    for (auto& v : img.pixels())
      v = static_cast<double>(rng() % 256);
    IntensityFrame half = img;
    for (auto& v : half.pixels())
      v /= 2.0;
    frames.push_back(img);
    halved.push_back(half);
  }
  CHECK(simulate(frames, 50, c) == simulate(halved, 50, c2));
}

TEST_CASE("firing_rate")
{
  const SensorConfig c = SensorConfig::calibrated(2, 3);

  SUBCASE("all-ones stream")
  {
    const StreamGeometry g{2, 3, 9};
    const RateMap r = firing_rate(SpikeStream(g, std::vector<std::uint8_t>(g.total_bytes(), 0xFF)), 5);
    for (double v : r.pixels())
      CHECK(v == 1.0);
  }
  SUBCASE("constant intensity within 1/window of L/255")
  {
    for (int level : {1, 37, 128, 200, 255}) {
      const IntensityFrame f = constant(2, 3, level);
      const SpikeStream s = simulate(std::span(&f, 1), 600, c);
      for (std::size_t window : {50u, 255u, 600u}) {
        const RateMap r = firing_rate(s, window);
        for (double v : r.pixels())
          CHECK(std::abs(v - level / 255.0) <= 1.0 / static_cast<double>(window) + 1e-12);
      }
    }
  }
  SUBCASE("errors")
  {
    const StreamGeometry g{2, 3, 4};
    const SpikeStream s(g, std::vector<std::uint8_t>(g.total_bytes(), 0));
    CHECK_THROWS_AS(firing_rate(s, 0), DomainError);
    CHECK_THROWS_AS(firing_rate(s, 5), RangeError);
  }
}
