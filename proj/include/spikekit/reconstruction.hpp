#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "spikekit/image.hpp"
#include "spikekit/spike_stream.hpp"

namespace spikekit {

enum class ReconMethod { tfp, tfi };

std::string_view to_string(ReconMethod method);

/// 8-bit reconstruction plus the window it was computed from.
struct ReconImage
{
  GrayImage pixels;
  ReconMethod method = ReconMethod::tfp;
  std::size_t window_start = 0;
  std::size_t window_len = 0;
  std::size_t anchor = 0; // TFI reference step; equals window_start for TFP
};

/// round() with ties away from zero, clamped to [0, 255].
std::uint8_t to_gray(double value);

/// Firing-rate image over [start, start + window): gray = 255 * count / full_scale.
/// `full_scale` defaults to `window`. Throws RangeError on an invalid window.
ReconImage tfp(const SpikeStream& stream, std::size_t start, std::size_t window,
               std::optional<std::size_t> full_scale = std::nullopt);

/*
 * Inter-spike-interval image around `anchor`.
 *
 * For each pixel the interval is taken between the last spike at or before
 * the anchor (looking back at most max_search steps, anchor included) and the
 * first spike after it (at most max_search steps ahead). The gray value is
 * full_scale / interval; pixels without such a pair render as 0.
 */
ReconImage tfi(const SpikeStream& stream, std::size_t anchor, std::size_t max_search,
               double full_scale = 255.0);

/// Gamma lift for display: 255 * (p / 255)^(1 / gamma). Throws DomainError for gamma <= 0.
ReconImage brighten(const ReconImage& image, double gamma);

/// tfp at starts 0, stride, 2*stride, ... while the window fits.
std::vector<ReconImage> sliding_tfp(const SpikeStream& stream, std::size_t window,
                                    std::size_t stride,
                                    std::optional<std::size_t> full_scale = std::nullopt);

/// 3-step temporal median (majority) per pixel. First and last frames are kept.
SpikeStream median_despike(const SpikeStream& stream);

} // namespace spikekit
