#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace xavt {

// Counter-based deterministic generator. Every consumer derives its own
// stream from (seed, label), so adding a draw in one place never shifts
// the values seen elsewhere. Output is identical across platforms: floats
// are built from fixed-width integer bits, never from long double math.
class Rng {
 public:
  Rng(uint64_t seed, std::string_view stream) : state_(derive(seed, stream)) {}

  uint64_t next_u64() {
    // splitmix64
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1) with 24-bit resolution; exactly representable in float.
  float uniform() { return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f; }

  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

  // Uniform in [0,1) with 53-bit resolution.
  double uniform_f64() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  uint64_t next_below(uint64_t n) { return n ? next_u64() % n : 0; }

  // Box-Muller; consumes two draws per call.
  float normal() {
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0,1]
    double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    double r = std::sqrt(-2.0 * std::log(u1));
    return static_cast<float>(r * std::cos(6.283185307179586 * u2));
  }

  static uint64_t hash_label(std::string_view label) {
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : label) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return h;
  }

 private:
  static uint64_t derive(uint64_t seed, std::string_view stream) {
    uint64_t s = seed ^ hash_label(stream);
    // one mixing round so nearby seeds give unrelated streams
    s = (s ^ (s >> 30)) * 0xbf58476d1ce4e5b9ULL;
    s = (s ^ (s >> 27)) * 0x94d049bb133111ebULL;
    return s ^ (s >> 31);
  }

  uint64_t state_;
};

}  // namespace xavt
