#pragma once

#include <cstdint>
#include <vector>

namespace trg {

/// Counter-based generator: draw n of stream s under key k is a pure function of (k, s, n),
/// so any epoch or sequence can be replayed without replaying everything before it.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key = 0, std::uint64_t stream = 0) : key_(key), stream_(stream) {}

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();

  /// Independent child stream.
  CounterRng fork(std::uint64_t stream) const;

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

}  // namespace trg
