#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace xdom::data {

// Binary PPM (P6, maxval 255). Pixels are planar (3, h, w) bytes on the
// library side; the file format interleaves them per pixel.
void write_ppm(const std::filesystem::path& path, const uint8_t* planar,
               int64_t h, int64_t w);

struct PpmImage {
  int64_t h = 0;
  int64_t w = 0;
  std::vector<uint8_t> planar;  // 3 * h * w
};

PpmImage read_ppm(const std::filesystem::path& path);

}  // namespace xdom::data
