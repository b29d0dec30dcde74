#include "xdom/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>

#include "xdom/error.hpp"

namespace xdom {

namespace {
// Distinct sub-streams (dataset shuffling, prior draws, init, ...) are
// derived from one user seed by golden-ratio mixing of the stream id.
uint64_t mix_stream(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace

Rng::Rng(uint64_t seed, uint64_t stream) : engine_(mix_stream(seed, stream)) {}

double Rng::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

int64_t Rng::uniform_int(int64_t n) {
  if (n <= 0) throw DomainError("uniform_int requires n > 0");
  return static_cast<int64_t>(engine_() % static_cast<uint64_t>(n));
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // 1 - uniform01() lies in (0, 1], keeping the log argument positive.
  const double u1 = 1.0 - uniform01();
  const double u2 = uniform01();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::string Rng::serialize() const {
  std::ostringstream os;
  os << engine_ << ' ' << (has_spare_ ? 1 : 0) << ' ' << std::bit_cast<uint64_t>(spare_);
  return os.str();
}

Rng Rng::deserialize(const std::string& text) {
  Rng r;
  std::istringstream is(text);
  int has = 0;
  uint64_t bits = 0;
  if (!(is >> r.engine_ >> has >> bits)) {
    throw IngestionError("malformed random-generator state string");
  }
  r.has_spare_ = has != 0;
  r.spare_ = std::bit_cast<double>(bits);
  return r;
}

}  // namespace xdom
