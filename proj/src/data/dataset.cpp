#include "xdom/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "xdom/data/ppm.hpp"
#include "xdom/error.hpp"

namespace xdom::data {

const char* split_name(Split s) { return s == Split::train ? "train" : "test"; }

const char* corpus_name(Corpus c) {
  switch (c) {
    case Corpus::mnist: return "mnist";
    case Corpus::usps: return "usps";
    case Corpus::svhn: return "svhn";
  }
  return "?";
}

uint8_t quantize_unit(float v) {
  const double scaled = (static_cast<double>(v) + 1.0) / 2.0 * 255.0;
  // nearbyint under the default FE_TONEAREST mode rounds halves to even.
  const double r = std::nearbyint(scaled);
  return static_cast<uint8_t>(std::min(255.0, std::max(0.0, r)));
}

void DomainDataset::reserve(int64_t n) {
  bytes_.reserve(static_cast<size_t>(n) * kImageBytes);
  labels_.reserve(static_cast<size_t>(n));
}

void DomainDataset::add(const Tensor<float>& pixels, std::optional<int64_t> label) {
  if (pixels.shape() != std::vector<int64_t>{kImageChannels, kImageHW, kImageHW}) {
    throw ShapeError(msg("dataset image must be (3,32,32), got ",
                         shape_string(pixels.shape())));
  }
  for (int64_t i = 0; i < pixels.numel(); ++i) {
    const float v = pixels[i];
    if (!(v >= -1.0f && v <= 1.0f)) {
      throw DomainError(msg("pixel value ", v, " outside [-1,1]"));
    }
  }
  if (n_ > 0 && labeled() != label.has_value()) {
    throw DomainError("dataset mixes labeled and unlabeled images");
  }
  const size_t base = bytes_.size();
  bytes_.resize(base + kImageBytes);
  for (int64_t i = 0; i < kImageBytes; ++i) {
    bytes_[base + static_cast<size_t>(i)] = quantize_unit(pixels[i]);
  }
  if (label.has_value()) labels_.push_back(*label);
  ++n_;
}

void DomainDataset::add_raw(const uint8_t* bytes, std::optional<int64_t> label) {
  if (n_ > 0 && labeled() != label.has_value()) {
    throw DomainError("dataset mixes labeled and unlabeled images");
  }
  bytes_.insert(bytes_.end(), bytes, bytes + kImageBytes);
  if (label.has_value()) labels_.push_back(*label);
  ++n_;
}

int64_t DomainDataset::label(int64_t i) const {
  if (!labeled()) throw DomainError("dataset carries no labels");
  if (i < 0 || i >= n_) throw DomainError(msg("label index ", i, " out of range"));
  return labels_[static_cast<size_t>(i)];
}

LabeledImage DomainDataset::image(int64_t i) const {
  if (i < 0 || i >= n_) throw DomainError(msg("image index ", i, " out of range"));
  LabeledImage out;
  out.pixels = Tensor<float>({kImageChannels, kImageHW, kImageHW});
  const uint8_t* src = raw(i);
  for (int64_t k = 0; k < kImageBytes; ++k) out.pixels[k] = dequantize_unit(src[k]);
  if (labeled()) out.label = labels_[static_cast<size_t>(i)];
  return out;
}

void DomainDataset::fill_batch(const std::vector<int64_t>& idx, Tensor<float>& out) const {
  const int64_t b = static_cast<int64_t>(idx.size());
  if (out.shape() != std::vector<int64_t>{b, kImageChannels, kImageHW, kImageHW}) {
    throw ShapeError(msg("batch tensor must be (", b, ",3,32,32), got ",
                         shape_string(out.shape())));
  }
  for (int64_t k = 0; k < b; ++k) {
    const int64_t i = idx[static_cast<size_t>(k)];
    if (i < 0 || i >= n_) throw DomainError(msg("batch index ", i, " out of range"));
    const uint8_t* src = raw(i);
    float* dst = out.data() + k * kImageBytes;
    for (int64_t j = 0; j < kImageBytes; ++j) dst[j] = dequantize_unit(src[j]);
  }
}

std::vector<int64_t> DomainDataset::class_histogram() const {
  if (!labeled()) return {};
  std::vector<int64_t> h(static_cast<size_t>(kClasses), 0);
  for (int64_t y : labels_) {
    if (y >= 0 && y < kClasses) ++h[static_cast<size_t>(y)];
  }
  return h;
}

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

namespace {

// Bilinear sample of one channel at fractional source coordinates, clamped
// to the valid grid (half-pixel alignment: src = (dst + .5) * scale - .5).
float sample_bilinear(const RawImage& img, int64_t c, double sy, double sx) {
  const auto clampi = [](int64_t v, int64_t hi) {
    return std::max<int64_t>(0, std::min(v, hi));
  };
  const int64_t y0 = clampi(static_cast<int64_t>(std::floor(sy)), img.height - 1);
  const int64_t x0 = clampi(static_cast<int64_t>(std::floor(sx)), img.width - 1);
  const int64_t y1 = clampi(y0 + 1, img.height - 1);
  const int64_t x1 = clampi(x0 + 1, img.width - 1);
  const double fy = std::min(1.0, std::max(0.0, sy - static_cast<double>(y0)));
  const double fx = std::min(1.0, std::max(0.0, sx - static_cast<double>(x0)));
  const double top = (1.0 - fx) * img.at(c, y0, x0) + fx * img.at(c, y0, x1);
  const double bot = (1.0 - fx) * img.at(c, y1, x0) + fx * img.at(c, y1, x1);
  return static_cast<float>((1.0 - fy) * top + fy * bot);
}

}  // namespace

LabeledImage preprocess(const RawImage& raw, std::optional<int64_t> label) {
  if (raw.channels != 1 && raw.channels != 3) {
    throw ShapeError(msg("raw image must have 1 or 3 channels, got ", raw.channels));
  }
  if (raw.height < 1 || raw.width < 1 ||
      raw.data.size() != static_cast<size_t>(raw.channels * raw.height * raw.width)) {
    throw ShapeError("raw image buffer does not match its dimensions");
  }
  LabeledImage out;
  out.pixels = Tensor<float>({kImageChannels, kImageHW, kImageHW});
  const double scale_y = static_cast<double>(raw.height) / kImageHW;
  const double scale_x = static_cast<double>(raw.width) / kImageHW;
  for (int64_t c = 0; c < kImageChannels; ++c) {
    const int64_t src_c = raw.channels == 1 ? 0 : c;
    for (int64_t y = 0; y < kImageHW; ++y) {
      const double sy = (static_cast<double>(y) + 0.5) * scale_y - 0.5;
      for (int64_t x = 0; x < kImageHW; ++x) {
        const double sx = (static_cast<double>(x) + 0.5) * scale_x - 0.5;
        const float unit = sample_bilinear(raw, src_c, sy, sx);
        const float v = std::min(1.0f, std::max(-1.0f, unit * 2.0f - 1.0f));
        out.pixels[(c * kImageHW + y) * kImageHW + x] = v;
      }
    }
  }
  out.label = label;
  return out;
}

DomainDataset augment_inversion(const DomainDataset& ds) {
  if (ds.split() != Split::train) {
    throw DomainError("inversion augmentation applies to the train split only");
  }
  DomainDataset out(ds.split(), ds.domain_id());
  out.reserve(2 * ds.size());
  for (int64_t i = 0; i < ds.size(); ++i) {
    std::optional<int64_t> y;
    if (ds.labeled()) y = ds.label(i);
    out.add_raw(ds.raw(i), y);
  }
  uint8_t inv[kImageBytes];
  for (int64_t i = 0; i < ds.size(); ++i) {
    const uint8_t* src = ds.raw(i);
    for (int64_t k = 0; k < kImageBytes; ++k) {
      inv[k] = static_cast<uint8_t>(255 - src[k]);
    }
    std::optional<int64_t> y;
    if (ds.labeled()) y = ds.label(i);
    out.add_raw(inv, y);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

void export_images(const DomainDataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IngestionError(msg("cannot create directory ", dir.string()));
  std::string labels_text;
  for (int64_t i = 0; i < ds.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%05lld.ppm", static_cast<long long>(i));
    write_ppm(dir / name, ds.raw(i), kImageHW, kImageHW);
    const long long y = ds.labeled() ? static_cast<long long>(ds.label(i)) : -1;
    labels_text += msg(i, " ", y, "\n");
  }
  const std::filesystem::path lp = dir / "labels.txt";
  FILE* f = std::fopen(lp.string().c_str(), "wb");
  if (!f) throw IngestionError(msg("cannot write ", lp.string()));
  std::fwrite(labels_text.data(), 1, labels_text.size(), f);
  std::fclose(f);
}

// ---------------------------------------------------------------------------
// Paired batches
// ---------------------------------------------------------------------------

PairedBatchIterator::PairedBatchIterator(const DomainDataset* src,
                                         const DomainDataset* tgt, int64_t batch,
                                         uint64_t seed)
    : src_(src), tgt_(tgt), batch_(batch), rng_s_(seed, 101), rng_t_(seed, 102) {
  if (src_->size() == 0 || tgt_->size() == 0) {
    throw DomainError("paired batches require non-empty datasets");
  }
  if (batch_ < 1 || batch_ > src_->size() || batch_ > tgt_->size()) {
    throw DomainError(msg("batch size ", batch_, " exceeds a dataset (source ",
                          src_->size(), ", target ", tgt_->size(), ")"));
  }
  perm_s_.resize(static_cast<size_t>(src_->size()));
  perm_t_.resize(static_cast<size_t>(tgt_->size()));
  for (size_t i = 0; i < perm_s_.size(); ++i) perm_s_[i] = static_cast<int64_t>(i);
  for (size_t i = 0; i < perm_t_.size(); ++i) perm_t_[i] = static_cast<int64_t>(i);
  rng_s_.shuffle(perm_s_);
  rng_t_.shuffle(perm_t_);
}

void PairedBatchIterator::take(const DomainDataset& ds, Rng& rng,
                               std::vector<int64_t>& perm, int64_t& cur,
                               std::vector<int64_t>& out) {
  out.clear();
  out.reserve(static_cast<size_t>(batch_));
  while (static_cast<int64_t>(out.size()) < batch_) {
    if (cur == static_cast<int64_t>(perm.size())) {
      rng.shuffle(perm);
      cur = 0;
    }
    const int64_t want = batch_ - static_cast<int64_t>(out.size());
    const int64_t avail = static_cast<int64_t>(perm.size()) - cur;
    const int64_t k = std::min(want, avail);
    out.insert(out.end(), perm.begin() + cur, perm.begin() + cur + k);
    cur += k;
  }
  (void)ds;
}

PairedBatch PairedBatchIterator::next() {
  std::vector<int64_t> is, it;
  take(*src_, rng_s_, perm_s_, cur_s_, is);
  take(*tgt_, rng_t_, perm_t_, cur_t_, it);
  PairedBatch b;
  b.source = Tensor<float>({batch_, kImageChannels, kImageHW, kImageHW});
  b.target = Tensor<float>({batch_, kImageChannels, kImageHW, kImageHW});
  src_->fill_batch(is, b.source);
  tgt_->fill_batch(it, b.target);
  if (src_->labeled()) {
    b.source_labels.reserve(static_cast<size_t>(batch_));
    for (int64_t i : is) b.source_labels.push_back(src_->label(i));
  }
  return b;
}

std::string PairedBatchIterator::state() const {
  std::ostringstream os;
  os << "pbi1\n" << rng_s_.serialize() << "\n" << rng_t_.serialize() << "\n";
  os << cur_s_ << " " << cur_t_ << "\n";
  os << perm_s_.size();
  for (int64_t v : perm_s_) os << " " << v;
  os << "\n" << perm_t_.size();
  for (int64_t v : perm_t_) os << " " << v;
  os << "\n";
  return os.str();
}

void PairedBatchIterator::restore(const std::string& blob) {
  std::istringstream is(blob);
  std::string tag, rs, rt;
  if (!std::getline(is, tag) || tag != "pbi1" || !std::getline(is, rs) ||
      !std::getline(is, rt)) {
    throw IngestionError("malformed batch iterator state");
  }
  Rng a = Rng::deserialize(rs);
  Rng b = Rng::deserialize(rt);
  int64_t cs = 0, ct = 0;
  size_t ns = 0, nt = 0;
  if (!(is >> cs >> ct >> ns)) throw IngestionError("malformed batch iterator state");
  std::vector<int64_t> ps(ns), pt;
  for (size_t i = 0; i < ns; ++i) {
    if (!(is >> ps[i])) throw IngestionError("malformed batch iterator state");
  }
  if (!(is >> nt)) throw IngestionError("malformed batch iterator state");
  pt.resize(nt);
  for (size_t i = 0; i < nt; ++i) {
    if (!(is >> pt[i])) throw IngestionError("malformed batch iterator state");
  }
  if (ns != perm_s_.size() || nt != perm_t_.size()) {
    throw IngestionError(msg("batch iterator state sizes (", ns, ",", nt,
                             ") do not match datasets (", perm_s_.size(), ",",
                             perm_t_.size(), ")"));
  }
  rng_s_ = a;
  rng_t_ = b;
  cur_s_ = cs;
  cur_t_ = ct;
  perm_s_ = std::move(ps);
  perm_t_ = std::move(pt);
}

}  // namespace xdom::data
