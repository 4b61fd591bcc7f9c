#include "sidlab/rng.hpp"

namespace sidlab {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = seed;
  std::uint64_t out = splitmix64(h);
  for (std::uint64_t k : keys) {
    h = out ^ (k + 0x632be59bd9b4e019ULL);
    out = splitmix64(h);
  }
  return out;
}

Xoshiro256pp::Xoshiro256pp(std::uint64_t seed) {
  std::uint64_t st = seed;
  for (auto& w : s_) w = splitmix64(st);
}

}  // namespace sidlab
