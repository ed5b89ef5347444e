#pragma once

#include <cstdint>
#include <vector>

namespace vrec {

// Counter-based generator: draw k of stream (seed, stream) is a pure
// function of (seed, stream, k), so sequences are identical on every
// platform and independent streams can be handed to separate workers.
// Distributions are implemented here rather than through <random>, whose
// distribution algorithms are implementation-defined.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);
  double normal(double mean = 0.0, double stddev = 1.0);
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derived generator for a sub-task; does not advance this one.
  Rng fork(std::uint64_t sub_stream) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace vrec
