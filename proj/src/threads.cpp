#include "spikekit/threads.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>
#include <thread>

namespace spikekit {

std::size_t worker_limit()
{
  if (const char* env = std::getenv("SPIKEKIT_THREADS")) {
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), value);
    if (ec == std::errc{} && value > 0)
      return value;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

} // namespace spikekit
