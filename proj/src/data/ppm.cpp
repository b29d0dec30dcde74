#include "xdom/data/ppm.hpp"

#include <cstdio>
#include <string>
#include <vector>

#include "xdom/error.hpp"

namespace xdom::data {

void write_ppm(const std::filesystem::path& path, const uint8_t* planar,
               int64_t h, int64_t w) {
  FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw IngestionError(msg("cannot write ", path.string()));
  std::fprintf(f, "P6\n%lld %lld\n255\n", static_cast<long long>(w),
               static_cast<long long>(h));
  std::vector<uint8_t> row(static_cast<size_t>(w) * 3);
  const int64_t plane = h * w;
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      for (int64_t c = 0; c < 3; ++c) {
        row[static_cast<size_t>(x * 3 + c)] = planar[c * plane + y * w + x];
      }
    }
    std::fwrite(row.data(), 1, row.size(), f);
  }
  std::fclose(f);
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(FILE* f) {
  std::string tok;
  int ch;
  while ((ch = std::fgetc(f)) != EOF) {
    if (ch == '#') {
      while ((ch = std::fgetc(f)) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

}  // namespace

PpmImage read_ppm(const std::filesystem::path& path) {
  FILE* f = std::fopen(path.string().c_str(), "rb");
  if (!f) throw IngestionError(msg("cannot open ", path.string()));
  PpmImage img;
  try {
    if (next_token(f) != "P6") throw IngestionError(msg(path.string(), ": not a P6 file"));
    const std::string ws = next_token(f), hs = next_token(f), ms = next_token(f);
    if (ws.empty() || hs.empty() || ms.empty()) {
      throw IngestionError(msg(path.string(), ": truncated header"));
    }
    img.w = std::stoll(ws);
    img.h = std::stoll(hs);
    if (std::stoll(ms) != 255) {
      throw IngestionError(msg(path.string(), ": unsupported maxval"));
    }
    if (img.w < 1 || img.h < 1) {
      throw IngestionError(msg(path.string(), ": bad dimensions"));
    }
    const size_t count = static_cast<size_t>(img.w) * static_cast<size_t>(img.h) * 3;
    std::vector<uint8_t> inter(count);
    if (std::fread(inter.data(), 1, count, f) != count) {
      throw IngestionError(msg(path.string(), ": truncated pixel data"));
    }
    img.planar.resize(count);
    const int64_t plane = img.h * img.w;
    for (int64_t y = 0; y < img.h; ++y) {
      for (int64_t x = 0; x < img.w; ++x) {
        for (int64_t c = 0; c < 3; ++c) {
          img.planar[static_cast<size_t>(c * plane + y * img.w + x)] =
              inter[static_cast<size_t>((y * img.w + x) * 3 + c)];
        }
      }
    }
  } catch (...) {
    std::fclose(f);
    throw;
  }
  std::fclose(f);
  return img;
}

}  // namespace xdom::data
