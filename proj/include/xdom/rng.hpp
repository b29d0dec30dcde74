#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace xdom {

// Deterministic random source. All sampling is implemented on top of the
// raw mt19937_64 output with fixed arithmetic (53-bit uniforms, Box-Muller
// normals with a cached spare) instead of std::*_distribution, whose output
// sequences are implementation-defined. Two builds with the same seed --
// on any platform -- therefore draw identical values, and the full state
// (engine + spare) round-trips through serialize()/deserialize() so a
// restored run continues the exact sample stream.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0, uint64_t stream = 0);

  // Uniform on [0, 1) with 53 random bits.
  double uniform01();
  // Uniform integer on [0, n), n > 0.
  int64_t uniform_int(int64_t n);
  // Standard normal via Box-Muller; one spare value is cached.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Fisher-Yates shuffle driven by uniform_int.
  template <class Vec>
  void shuffle(Vec& v) {
    for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i) {
      const int64_t j = uniform_int(i + 1);
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
    }
  }

  std::string serialize() const;
  static Rng deserialize(const std::string& text);

  bool operator==(const Rng& o) const {
    return engine_ == o.engine_ && has_spare_ == o.has_spare_ &&
           (!has_spare_ || spare_ == o.spare_);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace xdom
