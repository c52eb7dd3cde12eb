#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace fase {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_label(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Independent stream per (seed, entity, purpose); results never depend on the
// order in which entities are simulated.
inline std::mt19937_64 entity_rng(std::uint64_t seed, std::uint64_t entity,
                                  std::string_view purpose = {}) {
  std::uint64_t s = splitmix64(seed);
  s = splitmix64(s ^ splitmix64(entity + 0x632be59bd9b4e019ULL));
  s = splitmix64(s ^ hash_label(purpose));
  return std::mt19937_64{s};
}

// std::normal_distribution is implementation-defined; a fixed Box-Muller keeps
// streams identical across standard libraries.
class NormalSampler {
public:
  double operator()(std::mt19937_64& gen) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01(gen);
    } while (u1 <= 0.0);
    const double u2 = uniform01(gen);
    const double r = std::sqrt(-2.0 * std::log(u1));
    constexpr double two_pi = 6.283185307179586476925;
    spare_ = r * std::sin(two_pi * u2);
    has_spare_ = true;
    return r * std::cos(two_pi * u2);
  }

  static double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
  }

private:
  double spare_ = 0.0;
  bool has_spare_ = false;
};

} // namespace fase
