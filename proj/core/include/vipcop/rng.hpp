#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string_view>
#include <vector>

namespace vipcop {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Positional sub-stream key: the same (root, label, counters...) always maps to
// the same key, independent of the order in which streams are created.
template <typename... Counters>
constexpr std::uint64_t derive_key(std::uint64_t root, std::string_view label,
                                   Counters... counters) {
  std::uint64_t key = splitmix64(root ^ splitmix64(hash_label(label)));
  ((key = splitmix64(key ^ splitmix64(static_cast<std::uint64_t>(counters) +
                                      0x632be59bd9b4e019ULL))),
   ...);
  return key;
}

class Stream {
 public:
  explicit Stream(std::uint64_t key) : engine_(key) {}

  template <typename... Counters>
  static Stream derive(std::uint64_t root, std::string_view label,
                       Counters... counters) {
    return Stream(derive_key(root, label, counters...));
  }

  // Uniform on [0, 1).
  double uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
  }

  // Uniform on the open interval (0, 1).
  double uniform_open() {
    double u = 0.0;
    while (u == 0.0) u = uniform();
    return u;
  }

  double normal(double mean = 0.0, double sd = 1.0) {
    return mean + sd * std::normal_distribution<double>(0.0, 1.0)(engine_);
  }

  // Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  template <typename It>
  void shuffle(It first, It last) {
    std::shuffle(first, last, engine_);
  }

  // k distinct indices from [0, n), in ascending order.
  std::vector<std::size_t> choose(std::size_t n, std::size_t k) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < k && i < n; ++i) {
      std::size_t j = i + index(n - i);
      std::swap(all[i], all[j]);
    }
    all.resize(std::min(k, n));
    std::sort(all.begin(), all.end());
    return all;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace vipcop
