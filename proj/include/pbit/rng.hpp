#pragma once

// Xoshiro256** with SplitMix64 seeding, jump functions for independent
// per-p-bit streams, and named seed derivation for reproducible runs.

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

namespace pbit {

inline std::uint64_t splitmix64(std::uint64_t& x) noexcept {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Xoshiro256StarStar {
 public:
  using result_type = std::uint64_t;
  using state_type = std::array<std::uint64_t, 4>;

  Xoshiro256StarStar() : Xoshiro256StarStar(0) {}

  explicit Xoshiro256StarStar(std::uint64_t seed) noexcept {
    std::uint64_t x = seed;
    for (auto& w : s_) w = splitmix64(x);
  }

  explicit Xoshiro256StarStar(const state_type& state) noexcept : s_(state) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Equivalent to 2^128 calls.
  void jump() noexcept { apply(kJump); }

  // Equivalent to 2^192 calls.
  void long_jump() noexcept { apply(kLongJump); }

  const state_type& state() const noexcept { return s_; }

  friend bool operator==(const Xoshiro256StarStar&, const Xoshiro256StarStar&) = default;

 private:
  static constexpr state_type kJump = {0x180ec6d33cfd0abaULL, 0xd5a61266f0c9392cULL,
                                       0xa9582618e03fc9aaULL, 0x39abdc4529b1661cULL};
  static constexpr state_type kLongJump = {0x76e15d3efefdcbbfULL, 0xc5004e441c522fb3ULL,
                                           0x77710069854ee241ULL, 0x39109bb02acbe635ULL};

  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  void apply(const state_type& poly) noexcept {
    state_type acc{};
    for (std::uint64_t word : poly) {
      for (int b = 0; b < 64; ++b) {
        if (word & (std::uint64_t{1} << b)) {
          for (int i = 0; i < 4; ++i) acc[i] ^= s_[i];
        }
        (*this)();
      }
    }
    s_ = acc;
  }

  state_type s_{};
};

using Rng = Xoshiro256StarStar;

// 53-bit uniform on [0, 1).
inline double uniform01(Rng& rng) noexcept {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Upper 32 bits; the hardware path compares these against a 32-bit table.
inline std::uint32_t uniform_u32(Rng& rng) noexcept {
  return static_cast<std::uint32_t>(rng() >> 32);
}

// Unbiased integer in [0, bound) (Lemire's multiply-and-reject).
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) noexcept {
  if (bound <= 1) return 0;
  __uint128_t m = static_cast<__uint128_t>(rng()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<__uint128_t>(rng()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

// Fisher-Yates with our own integer sampler so results do not depend on the
// standard library's shuffle.
template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

// Named sub-streams of one master seed.
enum class StreamTag : std::uint64_t {
  generation = 1,
  schedule = 2,
  replicas = 3,
  swaps = 4,
  bootstrap = 5,
  selection = 6,
  init_state = 7,
  campaign = 8,
};

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a) noexcept {
  std::uint64_t x = seed ^ (a * 0xd1342543de82ef95ULL);
  splitmix64(x);
  return splitmix64(x);
}

inline std::uint64_t derive_seed(std::uint64_t seed, StreamTag tag) noexcept {
  return derive_seed(seed, static_cast<std::uint64_t>(tag));
}

template <class... Rest>
std::uint64_t derive_seed(std::uint64_t seed, StreamTag tag, Rest... rest) noexcept {
  std::uint64_t s = derive_seed(seed, tag);
  ((s = derive_seed(s, static_cast<std::uint64_t>(rest))), ...);
  return s;
}

// `count` non-overlapping streams: stream i is the seeded generator advanced by
// i long jumps.
inline std::vector<Rng> make_streams(std::uint64_t seed, std::size_t count) {
  std::vector<Rng> streams;
  streams.reserve(count);
  Rng g(seed);
  for (std::size_t i = 0; i < count; ++i) {
    streams.push_back(g);
    g.long_jump();
  }
  return streams;
}

}  // namespace pbit
