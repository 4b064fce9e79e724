#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spikekit/errors.hpp"

namespace spikekit {

/// Row-major 2-D array. Used for intensity frames, count maps and 8-bit images.
template <typename T>
class Image
{
public:
  Image() = default;

  Image(std::size_t height, std::size_t width, T fill = T{})
    : height_(height), width_(width), pixels_(height * width, fill)
  {}

  Image(std::size_t height, std::size_t width, std::vector<T> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels))
  {
    if (pixels_.size() != height_ * width_)
      throw SizeError("image buffer holds " + std::to_string(pixels_.size()) +
                      " values, expected " + std::to_string(height_ * width_));
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }

  T& operator()(std::size_t i, std::size_t j) { return pixels_[i * width_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return pixels_[i * width_ + j]; }

  std::span<T> pixels() { return pixels_; }
  std::span<const T> pixels() const { return pixels_; }

  bool same_shape(const Image& other) const
  {
    return height_ == other.height_ && width_ == other.width_;
  }

  template <typename U>
  bool same_shape(const Image<U>& other) const
  {
    return height_ == other.height() && width_ == other.width();
  }

  friend bool operator==(const Image& a, const Image& b)
  {
    return a.height_ == b.height_ && a.width_ == b.width_ && a.pixels_ == b.pixels_;
  }

private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<T> pixels_;
};

using GrayImage = Image<std::uint8_t>;
using IntensityFrame = Image<double>;
using CountMap = Image<std::uint32_t>;
using RateMap = Image<double>;

} // namespace spikekit
