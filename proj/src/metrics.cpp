#include "spikekit/metrics.hpp"

#include <cmath>
#include <limits>

namespace spikekit {

namespace {

void check_pair(const GrayImage& ref, const GrayImage& test)
{
  if (!ref.same_shape(test))
    throw SizeError("image shapes differ: " + std::to_string(ref.height()) + "x" +
                    std::to_string(ref.width()) + " vs " + std::to_string(test.height()) + "x" +
                    std::to_string(test.width()));
  if (ref.empty())
    throw SizeError("cannot compare empty images");
}

} // namespace

double mse(const GrayImage& ref, const GrayImage& test)
{
  check_pair(ref, test);
  const auto a = ref.pixels();
  const auto b = test.pixels();
  std::uint64_t sum = 0;
  for (std::size_t p = 0; p < a.size(); ++p) {
    const int d = static_cast<int>(a[p]) - static_cast<int>(b[p]);
    sum += static_cast<std::uint64_t>(d * d);
  }
  return static_cast<double>(sum) / static_cast<double>(a.size());
}

double psnr(const GrayImage& ref, const GrayImage& test)
{
  const double e = mse(ref, test);
  if (e == 0.0)
    return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / e);
}

double ssim(const GrayImage& ref, const GrayImage& test, std::size_t window, double k1, double k2)
{
  check_pair(ref, test);
  if (window < 1 || ref.height() < window || ref.width() < window)
    throw SizeError("ssim needs images of at least " + std::to_string(window) + "x" +
                    std::to_string(window) + ", got " + std::to_string(ref.height()) + "x" +
                    std::to_string(ref.width()));

  const double c1 = (k1 * 255.0) * (k1 * 255.0);
  const double c2 = (k2 * 255.0) * (k2 * 255.0);
  const double n = static_cast<double>(window * window);
  double total = 0.0;
  std::size_t blocks = 0;

  for (std::size_t bi = 0; bi + window <= ref.height(); bi += window) {
    for (std::size_t bj = 0; bj + window <= ref.width(); bj += window) {
      double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
      for (std::size_t i = bi; i < bi + window; ++i) {
        for (std::size_t j = bj; j < bj + window; ++j) {
          const double x = ref(i, j);
          const double y = test(i, j);
          sx += x;
          sy += y;
          sxx += x * x;
          syy += y * y;
          sxy += x * y;
        }
      }
      const double mx = sx / n;
      const double my = sy / n;
      const double vx = sxx / n - mx * mx;
      const double vy = syy / n - my * my;
      const double cxy = sxy / n - mx * my;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++blocks;
    }
  }
  return total / static_cast<double>(blocks);
}

QualityReport compare(const GrayImage& ref, const GrayImage& test)
{
  QualityReport r;
  r.mse = mse(ref, test);
  r.psnr_db = r.mse == 0.0 ? std::numeric_limits<double>::infinity()
                           : 10.0 * std::log10(255.0 * 255.0 / r.mse);
  r.ssim = ref.height() >= 8 && ref.width() >= 8 ? ssim(ref, test)
                                                 : std::numeric_limits<double>::quiet_NaN();
  return r;
}

ThroughputReport throughput_report(std::uint64_t produced, std::uint64_t dropped, double wall_seconds)
{
  if (!(wall_seconds > 0.0))
    throw DomainError("wall time must be positive");
  ThroughputReport r;
  r.frames_per_second = static_cast<double>(produced) / wall_seconds;
  r.drop_ratio = produced == 0 ? 0.0 : static_cast<double>(dropped) / static_cast<double>(produced);
  return r;
}

} // namespace spikekit
