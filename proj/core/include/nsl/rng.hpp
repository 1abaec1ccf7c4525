#pragma once

#include <cmath>
#include <cstdint>

namespace nsl {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

inline constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

}  // namespace detail

// Counter-based generator: draw i of stream k is mix(k + (i+1)*golden), so any
// draw is addressable without generating its predecessors. Streams derived via
// derive() are independent of the order in which the parent is consumed, which
// keeps parallel and serial generation bit-identical.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(detail::mix64(seed + detail::kGolden)) {}

  // Independent child stream for a tagged sub-task (one per pattern, per
  // sample, per view, ...).
  Rng derive(std::uint64_t tag) const {
    Rng child(0);
    child.key_ = detail::mix64(key_ ^ detail::mix64(tag * detail::kGolden + 0x632be59bd9b4e019ull));
    child.counter_ = 0;
    return child;
  }

  std::uint64_t next_u64() { return at(counter_++); }

  // Random access without disturbing the sequential counter.
  std::uint64_t at(std::uint64_t index) const {
    return detail::mix64(key_ + (index + 1) * detail::kGolden);
  }

  // Uniform in [0, 1).
  double next_double() { return to_unit(next_u64()); }
  double double_at(std::uint64_t index) const { return to_unit(at(index)); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  // Standard normal via Box-Muller; consumes two draws.
  double next_normal() {
    const double u1 = std::max(next_double(), 1e-300);
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  // Normal draw addressed by index; consumes counters 2*index and 2*index+1.
  double normal_at(std::uint64_t index) const {
    const double u1 = std::max(double_at(2 * index), 1e-300);
    const double u2 = double_at(2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

 private:
  static double to_unit(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace nsl
