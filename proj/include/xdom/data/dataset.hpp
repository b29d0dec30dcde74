#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xdom/rng.hpp"
#include "xdom/tensor.hpp"

namespace xdom::data {

enum class Split { train, test };
enum class DomainId { source, target };
enum class Corpus { mnist, usps, svhn };

const char* split_name(Split s);
const char* corpus_name(Corpus c);

constexpr int64_t kImageHW = 32;
constexpr int64_t kImageChannels = 3;
constexpr int64_t kImageBytes = kImageChannels * kImageHW * kImageHW;
constexpr int64_t kClasses = 10;

// 8-bit display/storage mapping shared by the dataset container and image
// grid rendering: byte = round-half-even((v+1)/2*255) for v in [-1,1], and
// back via v = byte/127.5 - 1.
uint8_t quantize_unit(float v);
inline float dequantize_unit(uint8_t b) {
  return static_cast<float>(2 * static_cast<int>(b) - 255) / 255.0f;
}

// One decoded image: planar (3, 32, 32) pixels in [-1, 1]. The label is
// absent for images whose ground truth is unknown (never the case for the
// shipped corpora, all of which publish labels for both splits).
struct LabeledImage {
  Tensor<float> pixels;
  std::optional<int64_t> label;
};

// A raw decoded corpus image before preprocessing: planar (c, h, w) values
// normalized to [0, 1].
struct RawImage {
  int64_t channels = 0;
  int64_t height = 0;
  int64_t width = 0;
  std::vector<float> data;  // channels * height * width

  float at(int64_t c, int64_t y, int64_t x) const {
    return data[static_cast<size_t>((c * height + y) * width + x)];
  }
};

// Immutable in-memory corpus for one domain and split. Pixels are stored
// quantized to 8 bits (see quantize_unit); batches and single-image reads
// expand back to floats in [-1, 1]. Images are appended once during
// construction and never mutated afterwards.
class DomainDataset {
 public:
  DomainDataset(Split split, DomainId domain) : split_(split), domain_(domain) {}

  void reserve(int64_t n);
  // Validates shape (3, 32, 32) and range [-1, 1]; quantizes to bytes.
  void add(const Tensor<float>& pixels, std::optional<int64_t> label);
  // Fast path used by loaders that already hold display-mapped bytes.
  void add_raw(const uint8_t* bytes, std::optional<int64_t> label);

  int64_t size() const { return n_; }
  Split split() const { return split_; }
  DomainId domain_id() const { return domain_; }
  void set_domain(DomainId d) { domain_ = d; }
  bool labeled() const { return !labels_.empty(); }

  int64_t label(int64_t i) const;
  LabeledImage image(int64_t i) const;
  const uint8_t* raw(int64_t i) const {
    return bytes_.data() + static_cast<size_t>(i) * kImageBytes;
  }

  // Writes the selected images into out, shaped (|idx|, 3, 32, 32).
  void fill_batch(const std::vector<int64_t>& idx, Tensor<float>& out) const;

  // Count per class 0..9 (empty when unlabeled).
  std::vector<int64_t> class_histogram() const;

 private:
  Split split_;
  DomainId domain_;
  int64_t n_ = 0;
  std::vector<uint8_t> bytes_;
  std::vector<int64_t> labels_;
};

// Decodes one corpus split from its standard published files under
// <root>/<corpus>/. Missing or structurally corrupt files raise an ingestion
// error naming the file. If a checksums.txt file (lines "<crc32-hex>
// <filename>") sits next to the data files, mismatching entries produce a
// warning on stderr and loading proceeds.
DomainDataset load_corpus(Corpus name, const std::filesystem::path& root, Split split);

// Published image counts (train, test) used for a deviation warning after a
// successful load.
std::pair<int64_t, int64_t> published_counts(Corpus c);

// Replicates grayscale to 3 channels, bilinearly resizes to 32x32 and maps
// the pixel range to [-1, 1]. Deterministic; coordinate channels are NOT
// added here (they are appended at encoder input only).
LabeledImage preprocess(const RawImage& raw, std::optional<int64_t> label);

// Doubles a training set with pixel-inverted copies (RGB negated in [-1,1]
// space, labels preserved). Test splits are never augmented: domain error.
DomainDataset augment_inversion(const DomainDataset& ds);

// Deterministic synthetic two-domain fixture: domain A renders 10 glyph
// classes with position/intensity jitter; domain B renders held-out samples
// of the same glyphs, color-inverted and slightly translated. Both domains
// carry labels and have exactly n_per_class images per class (n_per_class
// >= 10; domain error otherwise).
std::pair<DomainDataset, DomainDataset> make_toy_domains(int64_t n_per_class, uint64_t seed);

// Writes a dataset as <dir>/<index padded to 5>.ppm plus <dir>/labels.txt
// with one "index label" pair per line (label -1 when absent).
void export_images(const DomainDataset& ds, const std::filesystem::path& dir);

struct PairedBatch {
  Tensor<float> source;  // (n, 3, 32, 32)
  std::vector<int64_t> source_labels;
  Tensor<float> target;  // (n, 3, 32, 32)
};

// Infinite stream of positionally paired batches. Each domain is shuffled
// without replacement; when a domain's permutation is exhausted it is
// reshuffled independently of the other domain (batches may straddle an
// epoch boundary, so every index appears exactly once per epoch). State
// (both permutations, cursors, both rng engines) round-trips through
// state()/restore() for exact training resume.
class PairedBatchIterator {
 public:
  PairedBatchIterator(const DomainDataset* src, const DomainDataset* tgt,
                      int64_t batch, uint64_t seed);

  PairedBatch next();

  std::string state() const;
  void restore(const std::string& blob);

 private:
  void take(const DomainDataset& ds, Rng& rng, std::vector<int64_t>& perm,
            int64_t& cur, std::vector<int64_t>& out);

  const DomainDataset* src_;
  const DomainDataset* tgt_;
  int64_t batch_;
  Rng rng_s_, rng_t_;
  std::vector<int64_t> perm_s_, perm_t_;
  int64_t cur_s_ = 0, cur_t_ = 0;
};

}  // namespace xdom::data
