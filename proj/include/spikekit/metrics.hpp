#pragma once

#include <cstdint>
#include <string>

#include "spikekit/image.hpp"

namespace spikekit {

struct QualityReport
{
  double mse = 0.0;
  double psnr_db = 0.0; // +inf when mse == 0
  double ssim = 1.0;
};

/// Mean squared error in squared gray levels. Throws SizeError on shape
/// mismatch or empty images.
double mse(const GrayImage& ref, const GrayImage& test);

/// Peak 255. Returns +infinity for identical images.
double psnr(const GrayImage& ref, const GrayImage& test);

/// Mean SSIM over non-overlapping window x window blocks with uniform weights.
/// Throws SizeError when either side is smaller than the window.
double ssim(const GrayImage& ref, const GrayImage& test, std::size_t window = 8, double k1 = 0.01,
            double k2 = 0.03);

QualityReport compare(const GrayImage& ref, const GrayImage& test);

struct ThroughputReport
{
  double frames_per_second = 0.0;
  double drop_ratio = 0.0;
};

/// produced / wall_time and dropped / produced (0 when nothing was produced).
ThroughputReport throughput_report(std::uint64_t produced, std::uint64_t dropped, double wall_seconds);

} // namespace spikekit
