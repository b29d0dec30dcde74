#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "xdom/data/dataset.hpp"
#include "xdom/error.hpp"

namespace xdom::data {

namespace fs = std::filesystem;

namespace {

std::vector<uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(msg("cannot open ", path.string()));
  in.seekg(0, std::ios::end);
  const std::streamoff len = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<uint8_t> bytes(static_cast<size_t>(len));
  if (len > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), len)) {
    throw IngestionError(msg("cannot read ", path.string()));
  }
  return bytes;
}

// Picks <dir>/<name> or <dir>/<name>.gz, whichever exists.
fs::path resolve(const fs::path& dir, const std::string& name) {
  const fs::path plain = dir / name;
  if (fs::exists(plain)) return plain;
  const fs::path gz = dir / (name + ".gz");
  if (fs::exists(gz)) return gz;
  throw IngestionError(msg("missing corpus file ", plain.string(), " (also tried .gz)"));
}

// If a checksums.txt ("<crc32-hex> <filename>" per line) lists this file,
// verify the on-disk bytes; mismatches warn and proceed.
void verify_checksum(const fs::path& file, const std::vector<uint8_t>& raw) {
  const fs::path list = file.parent_path() / "checksums.txt";
  std::ifstream in(list);
  if (!in) return;
  const std::string want = file.filename().string();
  std::string hex, name;
  while (in >> hex >> name) {
    if (name != want) continue;
    const unsigned long listed = std::strtoul(hex.c_str(), nullptr, 16);
    const unsigned long have =
        crc32(0L, raw.data(), static_cast<uInt>(raw.size()));
    if (listed != have) {
      std::fprintf(stderr,
                   "warning: checksum mismatch for %s: file crc32 %08lx, listed "
                   "%08lx; proceeding\n",
                   file.string().c_str(), have, listed);
    }
    return;
  }
}

std::vector<uint8_t> gunzip(const std::vector<uint8_t>& bytes, const std::string& name) {
  z_stream zs;
  std::memset(&zs, 0, sizeof(zs));
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) {
    throw IngestionError(msg(name, ": cannot initialize gzip decoder"));
  }
  std::vector<uint8_t> out;
  std::vector<uint8_t> chunk(1 << 20);
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw IngestionError(msg(name, ": corrupt gzip stream"));
    }
    out.insert(out.end(), chunk.data(),
               chunk.data() + (chunk.size() - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw IngestionError(msg(name, ": truncated gzip stream"));
    }
  }
  inflateEnd(&zs);
  return out;
}

// Reads a file and transparently un-gzips it when it carries the gzip magic.
std::vector<uint8_t> read_maybe_gz(const fs::path& path) {
  std::vector<uint8_t> raw = read_file(path);
  verify_checksum(path, raw);
  if (raw.size() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b) {
    return gunzip(raw, path.string());
  }
  return raw;
}

void warn_if_count_differs(Corpus c, Split s, int64_t n) {
  const auto [train_n, test_n] = published_counts(c);
  const int64_t want = s == Split::train ? train_n : test_n;
  if (n != want) {
    std::fprintf(stderr,
                 "warning: %s %s split has %lld images; published count is %lld\n",
                 corpus_name(c), split_name(s), static_cast<long long>(n),
                 static_cast<long long>(want));
  }
}

// ---------------------------------------------------------------------------
// MNIST (IDX format)
// ---------------------------------------------------------------------------

uint32_t be32(const uint8_t* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

DomainDataset load_mnist(const fs::path& dir, Split split) {
  const std::string stem = split == Split::train ? "train" : "t10k";
  const fs::path ip = resolve(dir, stem + "-images-idx3-ubyte");
  const fs::path lp = resolve(dir, stem + "-labels-idx1-ubyte");
  const std::vector<uint8_t> img = read_maybe_gz(ip);
  const std::vector<uint8_t> lab = read_maybe_gz(lp);

  if (img.size() < 16 || be32(img.data()) != 2051) {
    throw IngestionError(msg(ip.string(), ": not an IDX image file"));
  }
  if (lab.size() < 8 || be32(lab.data()) != 2049) {
    throw IngestionError(msg(lp.string(), ": not an IDX label file"));
  }
  const int64_t n = be32(img.data() + 4);
  const int64_t rows = be32(img.data() + 8);
  const int64_t cols = be32(img.data() + 12);
  if (rows < 1 || cols < 1 || rows > 4096 || cols > 4096) {
    throw IngestionError(msg(ip.string(), ": implausible image size ", rows, "x", cols));
  }
  if (static_cast<int64_t>(be32(lab.data() + 4)) != n) {
    throw IngestionError(msg(lp.string(), ": label count does not match image count"));
  }
  if (img.size() != 16 + static_cast<size_t>(n * rows * cols)) {
    throw IngestionError(msg(ip.string(), ": truncated image payload"));
  }
  if (lab.size() != 8 + static_cast<size_t>(n)) {
    throw IngestionError(msg(lp.string(), ": truncated label payload"));
  }

  DomainDataset ds(split, DomainId::source);
  ds.reserve(n);
  RawImage raw;
  raw.channels = 1;
  raw.height = rows;
  raw.width = cols;
  raw.data.resize(static_cast<size_t>(rows * cols));
  for (int64_t i = 0; i < n; ++i) {
    const uint8_t* px = img.data() + 16 + i * rows * cols;
    for (int64_t k = 0; k < rows * cols; ++k) {
      raw.data[static_cast<size_t>(k)] = static_cast<float>(px[k]) / 255.0f;
    }
    const int64_t y = lab[8 + static_cast<size_t>(i)];
    if (y > 9) throw IngestionError(msg(lp.string(), ": label ", y, " outside [0,9]"));
    const LabeledImage li = preprocess(raw, y);
    ds.add(li.pixels, li.label);
  }
  warn_if_count_differs(Corpus::mnist, split, n);
  return ds;
}

// ---------------------------------------------------------------------------
// USPS ("zip" text format: label then 256 grayscale values in [-1,1])
// ---------------------------------------------------------------------------

DomainDataset load_usps(const fs::path& dir, Split split) {
  const std::string name = split == Split::train ? "zip.train" : "zip.test";
  const fs::path path = resolve(dir, name);
  const std::vector<uint8_t> bytes = read_maybe_gz(path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));

  DomainDataset ds(split, DomainId::source);
  RawImage raw;
  raw.channels = 1;
  raw.height = 16;
  raw.width = 16;
  raw.data.resize(256);
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::istringstream ls(line);
    double yv = 0.0;
    if (!(ls >> yv)) {
      throw IngestionError(msg(path.string(), ":", line_no, ": unparsable label"));
    }
    const int64_t y = static_cast<int64_t>(yv);
    if (y < 0 || y > 9 || static_cast<double>(y) != yv) {
      throw IngestionError(msg(path.string(), ":", line_no, ": label ", yv,
                               " outside [0,9]"));
    }
    for (int64_t k = 0; k < 256; ++k) {
      double v = 0.0;
      if (!(ls >> v)) {
        throw IngestionError(msg(path.string(), ":", line_no, ": expected 256 pixels"));
      }
      // Published range is [-1,1]; clamp stray rounding in the text encoding.
      v = std::min(1.0, std::max(-1.0, v));
      raw.data[static_cast<size_t>(k)] = static_cast<float>((v + 1.0) / 2.0);
    }
    const LabeledImage li = preprocess(raw, y);
    ds.add(li.pixels, li.label);
  }
  if (ds.size() == 0) throw IngestionError(msg(path.string(), ": no samples decoded"));
  warn_if_count_differs(Corpus::usps, split, ds.size());
  return ds;
}

// ---------------------------------------------------------------------------
// SVHN (MATLAB level-5 .mat container)
// ---------------------------------------------------------------------------

struct MatVar {
  std::string name;
  int array_class = 0;            // mx* class of the variable
  std::vector<int64_t> dims;      // column-major dimension list
  int data_type = 0;              // mi* type of the real part
  std::vector<uint8_t> payload;   // raw real-part bytes
};

constexpr int kMiInt8 = 1, kMiUInt8 = 2, kMiInt16 = 3, kMiUInt16 = 4;
constexpr int kMiInt32 = 5, kMiUInt32 = 6, kMiSingle = 7, kMiDouble = 9;
constexpr int kMiInt64 = 12, kMiUInt64 = 13, kMiMatrix = 14, kMiCompressed = 15;

struct MatElement {
  int type = 0;
  const uint8_t* data = nullptr;
  size_t bytes = 0;
  size_t advance = 0;  // bytes consumed including tag and padding
};

uint32_t le32(const uint8_t* p) {
  uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

MatElement next_element(const uint8_t* p, size_t avail, const std::string& fname) {
  if (avail < 8) throw IngestionError(msg(fname, ": truncated mat element tag"));
  MatElement e;
  const uint32_t tag = le32(p);
  if ((tag >> 16) != 0) {
    // Small element: byte count lives in the tag's upper half.
    e.type = static_cast<int>(tag & 0xFFFF);
    e.bytes = tag >> 16;
    if (e.bytes > 4) throw IngestionError(msg(fname, ": bad small mat element"));
    e.data = p + 4;
    e.advance = 8;
    return e;
  }
  e.type = static_cast<int>(tag);
  e.bytes = le32(p + 4);
  e.data = p + 8;
  const size_t padded = (e.bytes + 7) & ~size_t{7};
  if (avail < 8 + padded && avail < 8 + e.bytes) {
    throw IngestionError(msg(fname, ": truncated mat element payload"));
  }
  e.advance = 8 + std::min(padded, avail - 8);
  return e;
}

size_t mi_size(int type, const std::string& fname) {
  switch (type) {
    case kMiInt8:
    case kMiUInt8: return 1;
    case kMiInt16:
    case kMiUInt16: return 2;
    case kMiInt32:
    case kMiUInt32:
    case kMiSingle: return 4;
    case kMiDouble:
    case kMiInt64:
    case kMiUInt64: return 8;
    default:
      throw IngestionError(msg(fname, ": unsupported mat data type ", type));
  }
}

double mi_value(int type, const uint8_t* p, size_t i) {
  switch (type) {
    case kMiInt8: return static_cast<int8_t>(p[i]);
    case kMiUInt8: return p[i];
    case kMiInt16: { int16_t v; std::memcpy(&v, p + 2 * i, 2); return v; }
    case kMiUInt16: { uint16_t v; std::memcpy(&v, p + 2 * i, 2); return v; }
    case kMiInt32: { int32_t v; std::memcpy(&v, p + 4 * i, 4); return v; }
    case kMiUInt32: { uint32_t v; std::memcpy(&v, p + 4 * i, 4); return v; }
    case kMiSingle: { float v; std::memcpy(&v, p + 4 * i, 4); return v; }
    case kMiDouble: { double v; std::memcpy(&v, p + 8 * i, 8); return v; }
    case kMiInt64: { int64_t v; std::memcpy(&v, p + 8 * i, 8); return static_cast<double>(v); }
    case kMiUInt64: { uint64_t v; std::memcpy(&v, p + 8 * i, 8); return static_cast<double>(v); }
  }
  return 0.0;
}

MatVar parse_matrix(const uint8_t* p, size_t bytes, const std::string& fname) {
  MatVar var;
  size_t pos = 0;
  // Array flags.
  MatElement flags = next_element(p + pos, bytes - pos, fname);
  if (flags.type != kMiUInt32 || flags.bytes < 8) {
    throw IngestionError(msg(fname, ": malformed mat array flags"));
  }
  var.array_class = static_cast<int>(le32(flags.data) & 0xFF);
  pos += flags.advance;
  // Dimensions.
  MatElement dims = next_element(p + pos, bytes - pos, fname);
  if (dims.type != kMiInt32) {
    throw IngestionError(msg(fname, ": malformed mat dimensions"));
  }
  for (size_t i = 0; i < dims.bytes / 4; ++i) {
    var.dims.push_back(static_cast<int32_t>(le32(dims.data + 4 * i)));
  }
  pos += dims.advance;
  // Name.
  MatElement name = next_element(p + pos, bytes - pos, fname);
  if (name.type != kMiInt8) {
    throw IngestionError(msg(fname, ": malformed mat array name"));
  }
  var.name.assign(reinterpret_cast<const char*>(name.data), name.bytes);
  pos += name.advance;
  // Real part.
  if (pos >= bytes) throw IngestionError(msg(fname, ": mat variable has no data"));
  MatElement real = next_element(p + pos, bytes - pos, fname);
  var.data_type = real.type;
  mi_size(real.type, fname);  // validates the type
  var.payload.assign(real.data, real.data + real.bytes);
  return var;
}

std::vector<MatVar> parse_mat5(const std::vector<uint8_t>& file, const std::string& fname) {
  if (file.size() < 128) throw IngestionError(msg(fname, ": not a mat file"));
  if (!(file[126] == 'I' && file[127] == 'M')) {
    throw IngestionError(msg(fname, ": unsupported mat endianness or version"));
  }
  std::vector<MatVar> vars;
  size_t pos = 128;
  while (pos + 8 <= file.size()) {
    MatElement e = next_element(file.data() + pos, file.size() - pos, fname);
    if (e.type == kMiCompressed) {
      // Zlib-wrapped element: inflate, then parse the single element inside.
      z_stream zs;
      std::memset(&zs, 0, sizeof(zs));
      if (inflateInit(&zs) != Z_OK) {
        throw IngestionError(msg(fname, ": cannot initialize mat decoder"));
      }
      std::vector<uint8_t> out;
      std::vector<uint8_t> chunk(1 << 20);
      zs.next_in = const_cast<Bytef*>(e.data);
      zs.avail_in = static_cast<uInt>(e.bytes);
      int rc = Z_OK;
      while (rc != Z_STREAM_END) {
        zs.next_out = chunk.data();
        zs.avail_out = static_cast<uInt>(chunk.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
          inflateEnd(&zs);
          throw IngestionError(msg(fname, ": corrupt compressed mat element"));
        }
        out.insert(out.end(), chunk.data(),
                   chunk.data() + (chunk.size() - zs.avail_out));
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
          inflateEnd(&zs);
          throw IngestionError(msg(fname, ": truncated compressed mat element"));
        }
      }
      inflateEnd(&zs);
      MatElement inner = next_element(out.data(), out.size(), fname);
      if (inner.type == kMiMatrix) {
        vars.push_back(parse_matrix(inner.data, inner.bytes, fname));
      }
    } else if (e.type == kMiMatrix) {
      vars.push_back(parse_matrix(e.data, e.bytes, fname));
    }
    pos += e.advance;
  }
  return vars;
}

DomainDataset load_svhn(const fs::path& dir, Split split) {
  const std::string name =
      split == Split::train ? "extra_32x32.mat" : "test_32x32.mat";
  const fs::path path = resolve(dir, name);
  std::vector<uint8_t> file = read_file(path);
  verify_checksum(path, file);
  std::vector<MatVar> vars = parse_mat5(file, path.string());
  file.clear();
  file.shrink_to_fit();

  const MatVar* X = nullptr;
  const MatVar* y = nullptr;
  for (const MatVar& v : vars) {
    if (v.name == "X") X = &v;
    if (v.name == "y") y = &v;
  }
  if (!X || !y) {
    throw IngestionError(msg(path.string(), ": missing variable X or y"));
  }
  if (X->dims.size() != 4 || X->dims[0] != 32 || X->dims[1] != 32 || X->dims[2] != 3) {
    throw IngestionError(msg(path.string(), ": X is not 32x32x3xN"));
  }
  const int64_t n = X->dims[3];
  const size_t xstride = mi_size(X->data_type, path.string());
  if (X->payload.size() != static_cast<size_t>(n) * 3072 * xstride) {
    throw IngestionError(msg(path.string(), ": X payload size mismatch"));
  }
  int64_t ny = 1;
  for (int64_t d : y->dims) ny *= d;
  if (ny != n) {
    throw IngestionError(msg(path.string(), ": y count does not match X"));
  }

  DomainDataset ds(split, DomainId::source);
  ds.reserve(n);
  RawImage raw;
  raw.channels = 3;
  raw.height = 32;
  raw.width = 32;
  raw.data.resize(3 * 32 * 32);
  for (int64_t i = 0; i < n; ++i) {
    // Column-major (row, col, channel, index) -> planar (channel, row, col).
    for (int64_t ch = 0; ch < 3; ++ch) {
      for (int64_t r = 0; r < 32; ++r) {
        for (int64_t c = 0; c < 32; ++c) {
          const size_t src = static_cast<size_t>(r + 32 * c + 1024 * ch + 3072 * i);
          const double v = mi_value(X->data_type, X->payload.data(), src);
          raw.data[static_cast<size_t>((ch * 32 + r) * 32 + c)] =
              static_cast<float>(v / 255.0);
        }
      }
    }
    const double yv = mi_value(y->data_type, y->payload.data(), static_cast<size_t>(i));
    int64_t label = static_cast<int64_t>(yv);
    if (static_cast<double>(label) != yv || label < 1 || label > 10) {
      throw IngestionError(msg(path.string(), ": label ", yv, " outside [1,10]"));
    }
    if (label == 10) label = 0;  // the corpus encodes digit 0 as class 10
    const LabeledImage li = preprocess(raw, label);
    ds.add(li.pixels, li.label);
  }
  warn_if_count_differs(Corpus::svhn, split, n);
  return ds;
}

}  // namespace

std::pair<int64_t, int64_t> published_counts(Corpus c) {
  switch (c) {
    case Corpus::mnist: return {60000, 10000};
    case Corpus::usps: return {7291, 2007};
    case Corpus::svhn: return {531131, 26032};
  }
  return {0, 0};
}

DomainDataset load_corpus(Corpus name, const fs::path& root, Split split) {
  if (!fs::exists(root)) {
    throw IngestionError(msg("data root ", root.string(), " does not exist"));
  }
  const fs::path dir = root / corpus_name(name);
  if (!fs::exists(dir)) {
    throw IngestionError(msg("corpus directory ", dir.string(), " does not exist"));
  }
  switch (name) {
    case Corpus::mnist: return load_mnist(dir, split);
    case Corpus::usps: return load_usps(dir, split);
    case Corpus::svhn: return load_svhn(dir, split);
  }
  throw IngestionError("unknown corpus");
}

}  // namespace xdom::data
