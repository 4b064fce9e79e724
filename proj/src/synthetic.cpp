#include "spikekit/synthetic.hpp"

#include <random>

namespace spikekit {

SpikeStream random_stream(const StreamGeometry& geometry, std::uint64_t seed, double density)
{
  geometry.validate();
  if (!(density >= 0.0 && density <= 1.0))
    throw DomainError("spike density must lie in [0, 1]");
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> bytes(geometry.total_bytes(), 0);
  if (density == 0.5) {
    for (auto& b : bytes)
      b = static_cast<std::uint8_t>(rng());
  } else {
    std::bernoulli_distribution bit(density);
    for (auto& b : bytes)
      for (int k = 0; k < 8; ++k)
        b |= static_cast<std::uint8_t>(bit(rng) ? 1u << k : 0u);
  }
  return SpikeStream(geometry, std::move(bytes)); // clears padding
}

} // namespace spikekit
