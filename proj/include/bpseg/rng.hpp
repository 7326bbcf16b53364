#ifndef BPSEG_RNG_HPP
#define BPSEG_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace bpseg {

/** Seeded random source with hand-rolled distributions.
 *
 * std::mt19937_64 output is fully specified by the standard, and the
 * distributions below avoid std::uniform_*_distribution, whose output is
 * implementation-defined. Together this makes every seeded operation
 * bit-reproducible across compilers.
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /** Uniform double in [0, 1). */
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /** Uniform integer in [0, n). Lemire multiply-shift; n must be > 0. */
  std::uint64_t uniform_int(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /** Standard normal via Box-Muller (pairs cached). */
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    // Fisher-Yates with our own index draws.
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /** Derive an independent stream seed (splitmix64 mix of base and stream id). */
  static std::uint64_t derive(std::uint64_t base, std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace bpseg

#endif
