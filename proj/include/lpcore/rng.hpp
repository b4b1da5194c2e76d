#pragma once

#include <cstdint>
#include <string_view>

namespace lpcore {

// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t Mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t HashLabel(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Child seed for a named component of a run: master -> (label, index).
constexpr std::uint64_t DeriveSeed(std::uint64_t master, std::string_view label,
                                   std::uint64_t index = 0) {
  return Mix64(Mix64(master ^ HashLabel(label)) + Mix64(index));
}

// Counter-based uniform in [0, 1): a pure function of (key, counter).
constexpr double CounterUniform(std::uint64_t key, std::uint64_t counter) {
  const std::uint64_t bits = Mix64(Mix64(key) ^ Mix64(counter + 0x632be59bd9b4e019ULL));
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Sequential generator over the counter stream; Gaussian draws via Box-Muller
// so results do not depend on the standard library implementation.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  double Uniform() { return CounterUniform(key_, counter_++); }
  double Gaussian();
  std::uint64_t Next64() { return Mix64(Mix64(key_) ^ Mix64(counter_++)); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace lpcore
