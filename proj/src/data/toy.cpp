#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "xdom/data/dataset.hpp"
#include "xdom/error.hpp"

namespace xdom::data {

namespace {

// 5x7 digit bitmaps (one string per row, '#' = ink).
constexpr std::array<std::array<const char*, 7>, 10> kGlyphs = {{
    {"01110", "10001", "10011", "10101", "11001", "10001", "01110"},  // 0
    {"00100", "01100", "00100", "00100", "00100", "00100", "01110"},  // 1
    {"01110", "10001", "00001", "00010", "00100", "01000", "11111"},  // 2
    {"11111", "00010", "00100", "00010", "00001", "10001", "01110"},  // 3
    {"00010", "00110", "01010", "10010", "11111", "00010", "00010"},  // 4
    {"11111", "10000", "11110", "00001", "00001", "10001", "01110"},  // 5
    {"00110", "01000", "10000", "11110", "10001", "10001", "01110"},  // 6
    {"11111", "00001", "00010", "00100", "01000", "01000", "01000"},  // 7
    {"01110", "10001", "10001", "01110", "10001", "10001", "01110"},  // 8
    {"01110", "10001", "10001", "01111", "00001", "00010", "01100"},  // 9
}};

constexpr int64_t kGlyphW = 5, kGlyphH = 7;
constexpr int64_t kScale = 4;  // rendered ink box is 20x28 on the 32x32 canvas

double glyph_at(int64_t digit, int64_t y, int64_t x) {
  if (y < 0 || y >= kGlyphH || x < 0 || x >= kGlyphW) return 0.0;
  return kGlyphs[static_cast<size_t>(digit)][static_cast<size_t>(y)][x] == '1' ? 1.0 : 0.0;
}

// Bilinear upsample of the bitmap, half-pixel aligned like the corpus
// resizer, sampled at canvas position (y, x) relative to the ink box origin.
double ink_at(int64_t digit, double y, double x) {
  const double sy = (y + 0.5) / kScale - 0.5;
  const double sx = (x + 0.5) / kScale - 0.5;
  const double cy = std::min<double>(kGlyphH - 1.0, std::max(0.0, sy));
  const double cx = std::min<double>(kGlyphW - 1.0, std::max(0.0, sx));
  const int64_t y0 = static_cast<int64_t>(std::floor(cy));
  const int64_t x0 = static_cast<int64_t>(std::floor(cx));
  const int64_t y1 = std::min<int64_t>(y0 + 1, kGlyphH - 1);
  const int64_t x1 = std::min<int64_t>(x0 + 1, kGlyphW - 1);
  const double fy = cy - static_cast<double>(y0);
  const double fx = cx - static_cast<double>(x0);
  const double top = (1 - fx) * glyph_at(digit, y0, x0) + fx * glyph_at(digit, y0, x1);
  const double bot = (1 - fx) * glyph_at(digit, y1, x0) + fx * glyph_at(digit, y1, x1);
  return (1 - fy) * top + fy * bot;
}

// Renders one jittered digit into a (3,32,32) tensor in [-1,1]. Domain B
// images are additionally translated a little and value-inverted.
Tensor<float> render(int64_t digit, Rng& rng, bool domain_b) {
  int64_t x0 = 6 + rng.uniform_int(7) - 3;  // [3, 9]
  int64_t y0 = 2 + rng.uniform_int(5) - 2;  // [0, 4]
  if (domain_b) {
    // Extra small translation, clamped so the 20x28 ink box stays on canvas.
    x0 = std::min<int64_t>(11, std::max<int64_t>(1, x0 + rng.uniform_int(5) - 2));
    y0 = std::min<int64_t>(4, std::max<int64_t>(0, y0 + rng.uniform_int(5) - 2));
  }
  const double fg = 0.75 + 0.25 * rng.uniform01();

  Tensor<float> out({kImageChannels, kImageHW, kImageHW});
  for (int64_t y = 0; y < kImageHW; ++y) {
    for (int64_t x = 0; x < kImageHW; ++x) {
      double v = fg * ink_at(digit, static_cast<double>(y - y0),
                             static_cast<double>(x - x0));
      v += 0.04 * rng.uniform01() - 0.02;
      v = std::min(1.0, std::max(0.0, v));
      if (domain_b) v = 1.0 - v;
      const float mapped = static_cast<float>(2.0 * v - 1.0);
      for (int64_t c = 0; c < kImageChannels; ++c) {
        out[(c * kImageHW + y) * kImageHW + x] = mapped;
      }
    }
  }
  return out;
}

DomainDataset make_domain(int64_t n_per_class, Rng rng, DomainId id, bool domain_b) {
  DomainDataset ds(Split::train, id);
  ds.reserve(n_per_class * kClasses);
  for (int64_t digit = 0; digit < kClasses; ++digit) {
    for (int64_t k = 0; k < n_per_class; ++k) {
      ds.add(render(digit, rng, domain_b), digit);
    }
  }
  return ds;
}

}  // namespace

std::pair<DomainDataset, DomainDataset> make_toy_domains(int64_t n_per_class,
                                                         uint64_t seed) {
  if (n_per_class < 10) {
    throw DomainError(msg("toy domains need n_per_class >= 10, got ", n_per_class));
  }
  DomainDataset a = make_domain(n_per_class, Rng(seed, 201), DomainId::source, false);
  DomainDataset b = make_domain(n_per_class, Rng(seed, 202), DomainId::target, true);
  return {std::move(a), std::move(b)};
}

}  // namespace xdom::data
