#include <doctest.h>

#include <cmath>
#include <random>

#include "spikekit/errors.hpp"
#include "spikekit/reconstruction.hpp"
#include "spikekit/simulator.hpp"
#include "spikekit/synthetic.hpp"

using namespace spikekit;

namespace {

SpikeStream zeros(std::size_t h, std::size_t w, std::size_t t)
{
  const StreamGeometry g{h, w, t};
  return SpikeStream(g, std::vector<std::uint8_t>(g.total_bytes(), 0));
}

// Pixel p fires at steps phase[p], phase[p] + period[p], ...
SpikeStream periodic(std::size_t h, std::size_t w, std::size_t t, const std::vector<std::size_t>& period,
                     const std::vector<std::size_t>& phase)
{
  DenseSpikes d{t, h, w, std::vector<std::uint8_t>(t * h * w, 0)};
  for (std::size_t p = 0; p < h * w; ++p)
    if (period[p] > 0)
      for (std::size_t k = phase[p]; k < t; k += period[p])
        d(k, p / w, p % w) = 1;
  return from_dense(d);
}

SpikeStream constant_scene(std::size_t h, std::size_t w, double level, std::size_t steps)
{
  const SensorConfig c = SensorConfig::calibrated(h, w);
  const IntensityFrame f(h, w, level);
  return simulate(std::span(&f, 1), steps, c);
}

} // namespace

TEST_CASE("to_gray rounds half away from zero and clamps")
{
  CHECK(to_gray(127.5) == 128);
  CHECK(to_gray(127.49) == 127);
  CHECK(to_gray(0.5) == 1);
  CHECK(to_gray(-3.0) == 0);
  CHECK(to_gray(255.4) == 255);
  CHECK(to_gray(1000.0) == 255);
}

TEST_CASE("tfp")
{
  SUBCASE("all-zero stream")
  {
    const ReconImage img = tfp(zeros(4, 5, 10), 0, 10);
    for (auto v : img.pixels.pixels())
      CHECK(v == 0);
  }
  SUBCASE("identity calibration: count c maps to c")
  {
    std::mt19937 rng(1);
    const std::size_t h = 4, w = 4;
    std::vector<std::size_t> period(h * w), phase(h * w, 0);
    for (auto& p : period)
      p = 1 + rng() % 40;
    const SpikeStream s = periodic(h, w, 300, period, phase);
    const CountMap counts = spike_count_map(s, 10, 255);
    const ReconImage img = tfp(s, 10, 255, 255);
    for (std::size_t p = 0; p < h * w; ++p)
      CHECK(img.pixels.pixels()[p] == counts.pixels()[p]);
    CHECK(img.window_start == 10);
    CHECK(img.window_len == 255);
  }
  SUBCASE("constant-128 scene stays in {127, 128, 129}")
  {
    const SpikeStream s = constant_scene(6, 7, 128, 700);
    for (std::size_t start : {0u, 100u, 445u}) {
      const ReconImage img = tfp(s, start, 255);
      for (auto v : img.pixels.pixels())
        CHECK((v >= 127 && v <= 129));
    }
  }
  SUBCASE("default full scale is the window")
  {
    const StreamGeometry g{2, 2, 8};
    const SpikeStream ones(g, std::vector<std::uint8_t>(g.total_bytes(), 0xFF));
    CHECK(tfp(ones, 0, 8).pixels == GrayImage(2, 2, 255));
    CHECK(tfp(ones, 0, 8, 16).pixels == GrayImage(2, 2, 128)); // 127.5 rounds up
  }
  SUBCASE("invalid windows")
  {
    const SpikeStream s = zeros(2, 2, 10);
    CHECK_THROWS_AS(tfp(s, 0, 0), RangeError);
    CHECK_THROWS_AS(tfp(s, 5, 6), RangeError);
    CHECK_THROWS_AS(tfp(s, 0, 5, 0), RangeError);
  }
}

TEST_CASE("tfi")
{
  SUBCASE("firing every step gives 255")
  {
    const StreamGeometry g{3, 3, 20};
    const SpikeStream ones(g, std::vector<std::uint8_t>(g.total_bytes(), 0xFF));
    CHECK(tfi(ones, 10, 5).pixels == GrayImage(3, 3, 255));
  }
  SUBCASE("interval 2 gives round(127.5) = 128")
  {
    const SpikeStream s = periodic(1, 2, 20, {2, 2}, {0, 1});
    const ReconImage img = tfi(s, 9, 10);
    CHECK(img.pixels(0, 0) == 128);
    CHECK(img.pixels(0, 1) == 128);
  }
  SUBCASE("silent pixel gives 0")
  {
    const SpikeStream s = periodic(1, 2, 20, {0, 3}, {0, 0});
    const ReconImage img = tfi(s, 10, 20);
    CHECK(img.pixels(0, 0) == 0);
    CHECK(img.pixels(0, 1) == 85);
  }
  SUBCASE("bracketing pair must lie within max_search on each side")
  {
    // Spikes at 2 and 12 only.
    DenseSpikes d{20, 1, 1, std::vector<std::uint8_t>(20, 0)};
    d(2, 0, 0) = 1;
    d(12, 0, 0) = 1;
    const SpikeStream s = from_dense(d);
    CHECK(tfi(s, 5, 10).pixels(0, 0) == to_gray(25.5));
    CHECK(tfi(s, 5, 4).pixels(0, 0) == 0);  // previous spike 3 steps back is found, next is 7 ahead
    CHECK(tfi(s, 2, 10).pixels(0, 0) == to_gray(25.5)); // the anchor itself counts as "at or before"
    CHECK(tfi(s, 12, 10).pixels(0, 0) == 0); // no spike after 12
  }
  SUBCASE("full-scale recalibration")
  {
    const SpikeStream s = periodic(1, 1, 30, {4}, {0});
    CHECK(tfi(s, 10, 10, 100.0).pixels(0, 0) == 25);
  }
  SUBCASE("errors")
  {
    const SpikeStream s = zeros(2, 2, 5);
    CHECK_THROWS_AS(tfi(s, 5, 2), RangeError);
    CHECK_THROWS_AS(tfi(s, 1, 0), RangeError);
  }
}

TEST_CASE("tfi matches an interval-search oracle on random streams")
{
  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t h = 1 + rng() % 5, w = 1 + rng() % 5, t = 5 + rng() % 60;
    const SpikeStream s = random_stream({h, w, t}, rng(), 0.15);
    const DenseSpikes d = to_dense(s);
    const std::size_t anchor = rng() % t;
    const std::size_t search = 1 + rng() % t;
    const ReconImage img = tfi(s, anchor, search);
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        long prev = -1, next = -1;
        for (long k = static_cast<long>(anchor); k >= 0 && static_cast<long>(anchor) - k < static_cast<long>(search); --k)
          if (d(static_cast<std::size_t>(k), i, j)) {
            prev = k;
            break;
          }
        for (std::size_t k = anchor + 1; k < t && k - anchor <= search; ++k)
          if (d(k, i, j)) {
            next = static_cast<long>(k);
            break;
          }
        const int expected =
          prev >= 0 && next >= 0 ? static_cast<int>(std::floor(255.0 / static_cast<double>(next - prev) + 0.5)) : 0;
        REQUIRE(img.pixels(i, j) == expected);
      }
  }
}

TEST_CASE("brighten")
{
  GrayImage ramp(16, 16);
  for (std::size_t p = 0; p < 256; ++p)
    ramp.pixels()[p] = static_cast<std::uint8_t>(p);
  const ReconImage img{ramp, ReconMethod::tfp, 0, 1, 0};

  CHECK(brighten(img, 1.0).pixels == ramp);
  for (double gamma : {0.3, 0.5, 1.0, 2.0, 2.2, 5.0}) {
    const ReconImage b = brighten(img, gamma);
    CHECK(b.pixels.pixels()[0] == 0);
    CHECK(b.pixels.pixels()[255] == 255);
    for (std::size_t p = 1; p < 256; ++p)
      REQUIRE(b.pixels.pixels()[p] >= b.pixels.pixels()[p - 1]);
  }
  const double direct = 255.0 * std::sqrt(64.0 / 255.0);
  CHECK(brighten(img, 2.0).pixels.pixels()[64] == 128);
  CHECK(static_cast<int>(std::floor(direct + 0.5)) == 128);
  CHECK_THROWS_AS(brighten(img, 0.0), DomainError);
  CHECK_THROWS_AS(brighten(img, -1.0), DomainError);
}

TEST_CASE("sliding_tfp")
{
  const SpikeStream s = random_stream({5, 6, 100}, 8, 0.3);
  SUBCASE("stride = num_steps gives one image")
  {
    CHECK(sliding_tfp(s, 50, 100).size() == 1);
  }
  SUBCASE("T=100, window=50, stride=25")
  {
    const auto seq = sliding_tfp(s, 50, 25);
    REQUIRE(seq.size() == 3);
    const std::size_t starts[] = {0, 25, 50};
    for (std::size_t n = 0; n < 3; ++n) {
      CHECK(seq[n].window_start == starts[n]);
      CHECK(seq[n].pixels == tfp(s, starts[n], 50).pixels);
    }
  }
  SUBCASE("errors")
  {
    CHECK_THROWS_AS(sliding_tfp(s, 101, 1), RangeError);
    CHECK_THROWS_AS(sliding_tfp(s, 10, 0), RangeError);
  }
}

TEST_CASE("property: tfp is monotone in the spike count")
{
  for (std::size_t window : {1u, 7u, 255u, 400u})
    for (std::size_t scale : {window, std::size_t{255}, std::size_t{3}}) {
      // One pixel per possible count.
      const std::size_t n = window + 1;
      DenseSpikes d{window, 1, n, std::vector<std::uint8_t>(window * n, 0)};
      for (std::size_t c = 0; c <= window; ++c)
        for (std::size_t k = 0; k < c; ++k)
          d(k, 0, c) = 1;
      const ReconImage img = tfp(from_dense(d), 0, window, scale);
      for (std::size_t c = 1; c <= window; ++c)
        REQUIRE(img.pixels(0, c) >= img.pixels(0, c - 1));
    }
}

TEST_CASE("property: tfp and tfi agree on constant-rate constructed streams")
{
  // Pixels firing every dt steps; the bound |tfp - tfi| <= ceil(255/dt^2) + 1.
  const std::size_t window = 255;
  std::mt19937 rng(5);
  for (std::size_t dt = 1; dt <= window; ++dt) {
    const std::size_t phase = rng() % dt;
    const SpikeStream s = periodic(1, 1, 3 * window, {dt}, {phase});
    const std::size_t anchor = window + rng() % window;
    const int a = tfp(s, anchor - window / 2, window).pixels(0, 0);
    const int b = tfi(s, anchor, window).pixels(0, 0);
    const int bound = static_cast<int>((255 + dt * dt - 1) / (dt * dt)) + 1;
    REQUIRE(std::abs(a - b) <= bound);
  }
}

TEST_CASE("tfi on simulated constant scenes measures one of the two admissible intervals")
{
  // For constant level L the inter-spike interval is floor(255/L) or ceil(255/L).
  for (int level = 1; level <= 255; ++level) {
    const SpikeStream s = constant_scene(1, 1, level, 1200);
    const double ideal = 255.0 / level;
    const std::uint8_t lo = to_gray(255.0 / std::ceil(ideal));
    const std::uint8_t hi = to_gray(255.0 / std::floor(ideal));
    for (std::size_t anchor : {600u, 700u, 899u}) {
      const std::uint8_t v = tfi(s, anchor, 600).pixels(0, 0);
      REQUIRE((v == lo || v == hi));
    }
  }
}

TEST_CASE("property: TFP window additivity within one gray level")
{
  std::mt19937 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t w = 1 + rng() % 120;
    const SpikeStream s = random_stream({4, 4, 2 * w + 10}, rng(), 0.4);
    const std::size_t start = rng() % 10;
    const ReconImage whole = tfp(s, start, 2 * w, 2 * w);
    const ReconImage ha = tfp(s, start, w, w);
    const ReconImage hb = tfp(s, start + w, w, w);
    for (std::size_t p = 0; p < 16; ++p) {
      const double mean = (ha.pixels.pixels()[p] + hb.pixels.pixels()[p]) / 2.0;
      const int rounded = static_cast<int>(std::floor(mean + 0.5));
      REQUIRE(std::abs(static_cast<int>(whole.pixels.pixels()[p]) - rounded) <= 1);
    }
  }
}

TEST_CASE("median_despike removes isolated spikes and keeps sustained ones")
{
  DenseSpikes d{6, 1, 3, std::vector<std::uint8_t>(18, 0)};
  d(2, 0, 0) = 1; // isolated
  for (std::size_t k = 1; k < 5; ++k)
    d(k, 0, 1) = 1; // sustained
  d(0, 0, 2) = 1;  // first frame is kept
  const DenseSpikes out = to_dense(median_despike(from_dense(d)));
  CHECK(out(2, 0, 0) == 0);
  for (std::size_t k = 1; k < 5; ++k)
    CHECK(out(k, 0, 1) == 1);
  CHECK(out(0, 0, 2) == 1);

  const SpikeStream r = random_stream({5, 5, 30}, 2);
  const DenseSpikes in = to_dense(r);
  const DenseSpikes med = to_dense(median_despike(r));
  for (std::size_t k = 1; k + 1 < 30; ++k)
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j)
        REQUIRE(med(k, i, j) == (in(k - 1, i, j) + in(k, i, j) + in(k + 1, i, j) >= 2 ? 1 : 0));
}
