#include "ebs/rng.hpp"

#include <limits>
#include <stdexcept>

namespace ebs {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

int RngStream::next_below(int n) {
  if (n < 1) throw std::invalid_argument("RngStream::next_below: n must be >= 1");
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  // Rejection sampling over the top of the range keeps the draw unbiased.
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      (std::numeric_limits<std::uint64_t>::max() % un + 1) % un;
  std::uint64_t r = next_u64();
  while (r > limit) r = next_u64();
  return static_cast<int>(r % un);
}

RngStream RngStream::derive(std::uint64_t seed,
                            std::initializer_list<std::uint64_t> salts) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t s : salts) h = splitmix64(h ^ splitmix64(s));
  return RngStream(h);
}

}  // namespace ebs
