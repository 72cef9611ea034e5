#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace rdsim::rng {

// SplitMix64 finalizer, used for key folding.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// 128-bit stream identity. Every random quantity in the project is a pure
// function of (Key, counter), so any substream can be regenerated in
// isolation and in any order.
struct Key {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;
  friend constexpr bool operator==(const Key&, const Key&) = default;
};

// Fold a tag into a key, producing an unrelated stream.
constexpr Key derive(Key k, std::uint64_t tag) {
  const std::uint64_t t = mix64(tag);
  return Key{mix64(k.hi ^ t), mix64(k.lo + (t | 1))};
}

// Philox4x32-10: 128 random bits per (key, counter) pair.
inline std::array<std::uint64_t, 2> block(const Key& key, std::uint64_t counter) {
  std::array<std::uint32_t, 4> c{
      static_cast<std::uint32_t>(counter),
      static_cast<std::uint32_t>(counter >> 32),
      static_cast<std::uint32_t>(key.lo),
      static_cast<std::uint32_t>(key.lo >> 32)};
  std::uint32_t k0 = static_cast<std::uint32_t>(key.hi);
  std::uint32_t k1 = static_cast<std::uint32_t>(key.hi >> 32);
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = 0xD2511F53ull * c[0];
    const std::uint64_t p1 = 0xCD9E8D57ull * c[2];
    c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k0,
         static_cast<std::uint32_t>(p1),
         static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k1,
         static_cast<std::uint32_t>(p0)};
    k0 += 0x9E3779B9u;
    k1 += 0xBB67AE85u;
  }
  return {(static_cast<std::uint64_t>(c[1]) << 32) | c[0],
          (static_cast<std::uint64_t>(c[3]) << 32) | c[2]};
}

// Uniform on the open interval (0,1).
inline double u01(std::uint64_t word) {
  return (static_cast<double>(word >> 11) + 0.5) * 0x1.0p-53;
}

// Exp(1) variate; strictly positive because u01 never returns 0 or 1.
inline double exp1(std::uint64_t word) { return -std::log(u01(word)); }

// One standard normal from two words (Box-Muller, cosine branch).
inline double normal(std::uint64_t w0, std::uint64_t w1) {
  const double r = std::sqrt(-2.0 * std::log(u01(w0)));
  return r * std::cos(6.283185307179586 * u01(w1));
}

// Sequential view over a keyed stream.
class Sequence {
 public:
  explicit Sequence(Key k) : key_(k) {}

  std::uint64_t next() {
    if (lane_ == 0) cache_ = block(key_, counter_++);
    const std::uint64_t w = cache_[static_cast<std::size_t>(lane_)];
    lane_ ^= 1;
    return w;
  }

  double uniform() { return u01(next()); }
  double exponential() { return exp1(next()); }
  double gaussian() {
    const std::uint64_t a = next();
    const std::uint64_t b = next();
    return rng::normal(a, b);
  }

 private:
  Key key_;
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 2> cache_{};
  int lane_ = 0;
};

}  // namespace rdsim::rng
