#include "spikekit/reconstruction.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace spikekit {

std::string_view to_string(ReconMethod method)
{
  return method == ReconMethod::tfp ? "tfp" : "tfi";
}

std::uint8_t to_gray(double value)
{
  const double r = std::round(value); // ties away from zero
  if (!(r > 0.0))
    return 0;
  if (r >= 255.0)
    return 255;
  return static_cast<std::uint8_t>(r);
}

ReconImage tfp(const SpikeStream& stream, std::size_t start, std::size_t window,
               std::optional<std::size_t> full_scale)
{
  if (window < 1)
    throw RangeError("tfp window must be at least 1 step");
  const std::size_t scale = full_scale.value_or(window);
  if (scale < 1)
    throw RangeError("tfp full_scale must be at least 1");

  const CountMap counts = spike_count_map(stream, start, window);
  ReconImage out{GrayImage(stream.height(), stream.width(), 0), ReconMethod::tfp, start, window,
                 start};
  auto dst = out.pixels.pixels();
  auto src = counts.pixels();
  for (std::size_t p = 0; p < src.size(); ++p)
    dst[p] = to_gray(255.0 * static_cast<double>(src[p]) / static_cast<double>(scale));
  return out;
}

ReconImage tfi(const SpikeStream& stream, std::size_t anchor, std::size_t max_search,
               double full_scale)
{
  const std::size_t steps = stream.num_steps();
  if (anchor >= steps)
    throw RangeError("tfi anchor " + std::to_string(anchor) + " outside stream of " +
                     std::to_string(steps) + " steps");
  if (max_search < 1)
    throw RangeError("tfi max_search must be at least 1 step");
  if (!(full_scale > 0.0))
    throw DomainError("tfi full_scale must be positive");

  const std::size_t back_limit = anchor + 1 >= max_search ? anchor + 1 - max_search : 0;
  const std::size_t fwd_limit = std::min(steps - 1, anchor + max_search);
  const std::size_t h = stream.height();
  const std::size_t w = stream.width();

  ReconImage out{GrayImage(h, w, 0), ReconMethod::tfi, back_limit, fwd_limit - back_limit + 1,
                 anchor};
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      std::optional<std::size_t> before;
      for (std::size_t k = anchor + 1; k-- > back_limit;) {
        if (stream.get(i, j, k)) {
          before = k;
          break;
        }
      }
      if (!before)
        continue;
      for (std::size_t k = anchor + 1; k <= fwd_limit; ++k) {
        if (stream.get(i, j, k)) {
          out.pixels(i, j) = to_gray(full_scale / static_cast<double>(k - *before));
          break;
        }
      }
    }
  }
  return out;
}

ReconImage brighten(const ReconImage& image, double gamma)
{
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw DomainError("gamma must be a positive finite number");
  ReconImage out = image;
  if (gamma == 1.0)
    return out;

  std::array<std::uint8_t, 256> lut{};
  for (std::size_t v = 0; v < lut.size(); ++v)
    lut[v] = to_gray(255.0 * std::pow(static_cast<double>(v) / 255.0, 1.0 / gamma));
  for (auto& p : out.pixels.pixels())
    p = lut[p];
  return out;
}

std::vector<ReconImage> sliding_tfp(const SpikeStream& stream, std::size_t window,
                                    std::size_t stride, std::optional<std::size_t> full_scale)
{
  if (stride < 1)
    throw RangeError("sliding_tfp stride must be at least 1");
  if (window < 1 || window > stream.num_steps())
    throw RangeError("sliding_tfp window of " + std::to_string(window) +
                     " steps does not fit stream of " + std::to_string(stream.num_steps()));
  std::vector<ReconImage> out;
  for (std::size_t start = 0; start + window <= stream.num_steps(); start += stride)
    out.push_back(tfp(stream, start, window, full_scale));
  return out;
}

SpikeStream median_despike(const SpikeStream& stream)
{
  const std::size_t steps = stream.num_steps();
  const std::size_t bpf = stream.bytes_per_frame();
  const auto src = stream.data();
  std::vector<std::uint8_t> out(src.begin(), src.end());
  for (std::size_t k = 1; k + 1 < steps; ++k) {
    const std::uint8_t* a = src.data() + (k - 1) * bpf;
    const std::uint8_t* b = src.data() + k * bpf;
    const std::uint8_t* c = src.data() + (k + 1) * bpf;
    std::uint8_t* d = out.data() + k * bpf;
    for (std::size_t x = 0; x < bpf; ++x)
      d[x] = static_cast<std::uint8_t>((a[x] & b[x]) | (a[x] & c[x]) | (b[x] & c[x]));
  }
  return SpikeStream(stream.geometry(), std::move(out));
}

} // namespace spikekit
