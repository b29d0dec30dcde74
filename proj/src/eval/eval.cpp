#include "xdom/eval/eval.hpp"

#include <algorithm>
#include <numeric>

#include "xdom/data/ppm.hpp"
#include "xdom/error.hpp"

namespace xdom::eval {

namespace {

std::vector<int64_t> argmax_rows(const Tensor<float>& probs) {
  std::vector<int64_t> out(static_cast<size_t>(probs.dim(0)));
  const int64_t K = probs.dim(1);
  for (int64_t i = 0; i < probs.dim(0); ++i) {
    int64_t best = 0;
    for (int64_t k = 1; k < K; ++k) {
      if (probs.at(i, k) > probs.at(i, best)) best = k;
    }
    out[static_cast<size_t>(i)] = best;
  }
  return out;
}

}  // namespace

BatchClassifier disc_classifier(const nn::NetworkBundle<float>& b, bool source_disc) {
  const nn::Discriminator<float>* d = source_disc ? &b.d1 : &b.d2;
  return [d](const Tensor<float>& x) {
    return argmax_rows(d->forward(x, nullptr, nn::Mode::eval).cls);
  };
}

double accuracy(const data::DomainDataset& ds, const BatchClassifier& cls, int64_t batch) {
  if (!ds.labeled()) throw DomainError("accuracy needs a labeled dataset");
  if (batch < 1) throw DomainError("evaluation batch size must be positive");
  const int64_t n = ds.size();
  if (n < 1) throw DomainError("accuracy over an empty dataset");
  int64_t correct = 0;
  std::vector<int64_t> idx;
  for (int64_t at = 0; at < n; at += batch) {
    const int64_t m = std::min(batch, n - at);
    idx.resize(static_cast<size_t>(m));
    std::iota(idx.begin(), idx.end(), at);
    Tensor<float> x({m, data::kImageChannels, data::kImageHW, data::kImageHW});
    ds.fill_batch(idx, x);
    const std::vector<int64_t> pred = cls(x);
    if (static_cast<int64_t>(pred.size()) != m) {
      throw ShapeError(msg("classifier returned ", pred.size(), " predictions for ", m,
                           " images"));
    }
    for (int64_t i = 0; i < m; ++i) {
      if (pred[static_cast<size_t>(i)] == ds.label(at + i)) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

EvalResult evaluate_pair(const std::string& pair, int64_t step,
                         const data::DomainDataset& src_test,
                         const data::DomainDataset& tgt_test,
                         const BatchClassifier& source_cls, const BatchClassifier& target_cls,
                         int64_t batch) {
  EvalResult r;
  r.pair = pair;
  r.step = step;
  r.target_accuracy = accuracy(tgt_test, target_cls, batch);
  r.source_accuracy = accuracy(src_test, source_cls, batch);
  r.n_evaluated = tgt_test.size();
  return r;
}

void write_image_grid(const std::filesystem::path& path, const Tensor<float>& images) {
  if (images.rank() != 4 || images.dim(1) != 3) {
    throw ShapeError(msg("image grid expects a (n,3,H,W) batch, got ",
                         shape_string(images.shape())));
  }
  constexpr int64_t kRows = 8, kCols = 8;
  const int64_t n = std::min<int64_t>(images.dim(0), kRows * kCols);
  const int64_t H = images.dim(2), W = images.dim(3);
  const int64_t GH = kRows * H, GW = kCols * W;
  std::vector<uint8_t> planar(static_cast<size_t>(3 * GH * GW), 0);
  for (int64_t t = 0; t < n; ++t) {
    const int64_t r0 = (t / kCols) * H, c0 = (t % kCols) * W;
    for (int64_t c = 0; c < 3; ++c) {
      for (int64_t y = 0; y < H; ++y) {
        for (int64_t x = 0; x < W; ++x) {
          planar[static_cast<size_t>((c * GH + r0 + y) * GW + c0 + x)] =
              data::quantize_unit(images.at(t, c, y, x));
        }
      }
    }
  }
  data::write_ppm(path, planar.data(), GH, GW);
}

void render_panels(const nn::NetworkBundle<float>& b, const data::DomainDataset& src_test,
                   const data::DomainDataset& tgt_test, const std::filesystem::path& dir,
                   int64_t step) {
  std::filesystem::create_directories(dir);
  const std::string prefix = "step_" + std::to_string(step) + "_";

  auto side = [&](const data::DomainDataset& ds, const nn::Sequential<float>& enc,
                  const nn::Sequential<float>& gen_same, const nn::Sequential<float>& gen_cross,
                  const char* domain) {
    const int64_t n = std::min<int64_t>(64, ds.size());
    std::vector<int64_t> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    Tensor<float> x({n, data::kImageChannels, data::kImageHW, data::kImageHW});
    ds.fill_batch(idx, x);
    Tensor<float> z = nn::encode<float>(enc, nn::append_coords(x), nullptr, nn::Mode::eval);
    Tensor<float> rec = gen_same.forward(z, nullptr, nn::Mode::eval);
    Tensor<float> trans = gen_cross.forward(z, nullptr, nn::Mode::eval);
    write_image_grid(dir / (prefix + domain + "_real.ppm"), x);
    write_image_grid(dir / (prefix + domain + "_recon.ppm"), rec);
    write_image_grid(dir / (prefix + domain + "_trans.ppm"), trans);
  };

  side(src_test, b.e1, b.g1, b.g2, "source");
  side(tgt_test, b.e2, b.g2, b.g1, "target");
}

}  // namespace xdom::eval
