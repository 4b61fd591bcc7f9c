#pragma once

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace sidlab {

// purpose tags for stream derivation
enum class Purpose : std::uint64_t {
  init = 1,
  noise = 2,
  probe = 3,
  sampler = 4,
  shadow = 5,
  suite = 6,
};

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t derive_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

// xoshiro256++; seeded through splitmix64
class Xoshiro256pp {
 public:
  using result_type = std::uint64_t;
  explicit Xoshiro256pp(std::uint64_t seed = 0);
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

class Rng {
 public:
  explicit Rng(std::uint64_t stream = 0) : eng_(stream) {}
  double normal() { return normal_(eng_); }
  double uniform() { return boost::random::uniform_01<double>()(eng_); }
  double exponential() { return -std::log1p(-uniform()); }
  std::uint64_t bits() { return eng_(); }
  Xoshiro256pp& engine() { return eng_; }

 private:
  Xoshiro256pp eng_;
  boost::random::normal_distribution<double> normal_;
};

}  // namespace sidlab
