#include "xdom/nn/plans.hpp"

#include <cmath>

#include "xdom/error.hpp"

namespace xdom::nn {

int64_t scaled_width(int64_t w, double scale) {
  if (!(scale > 0.0)) throw ConfigError(msg("width scale ", scale, " must be positive"));
  return std::max<int64_t>(1, std::llround(static_cast<double>(w) * scale));
}

namespace {

struct PlanBuilder {
  std::vector<LayerSpec> rows;
  double slope_marker = 0.0;  // slope itself lives in the build options

  void conv(const std::string& row, bool shared, int64_t width, int64_t k, int64_t s,
            int64_t pt, int64_t pb, int64_t pl, int64_t pr) {
    LayerSpec l{LayerKind::conv, row, shared};
    l.width = width;
    l.kernel = k;
    l.stride = s;
    l.pad_t = pt;
    l.pad_b = pb;
    l.pad_l = pl;
    l.pad_r = pr;
    rows.push_back(l);
  }
  void deconv(const std::string& row, bool shared, int64_t width, int64_t k, int64_t s,
              int64_t p) {
    LayerSpec l{LayerKind::deconv, row, shared};
    l.width = width;
    l.kernel = k;
    l.stride = s;
    l.pad_t = l.pad_b = l.pad_l = l.pad_r = p;
    rows.push_back(l);
  }
  void fc(const std::string& row, bool shared, int64_t width) {
    LayerSpec l{LayerKind::fully_connected, row, shared};
    l.width = width;
    rows.push_back(l);
  }
  void bn(const std::string& row, bool shared, int64_t width) {
    LayerSpec l{LayerKind::batch_norm, row, shared};
    l.width = width;
    rows.push_back(l);
  }
  void act(const std::string& row, bool shared, Act a) {
    LayerSpec l{LayerKind::activation, row, shared};
    l.activation = a;
    rows.push_back(l);
  }
  void pool(const std::string& row, bool shared) {
    rows.push_back(LayerSpec{LayerKind::max_pool, row, shared});
  }
  void reshape(const std::string& row, bool shared, int64_t c, int64_t h, int64_t w) {
    LayerSpec l{LayerKind::reshape, row, shared};
    l.width = c;
    l.out_h = h;
    l.out_w = w;
    rows.push_back(l);
  }
};

}  // namespace

PlanSet paper_plans(int64_t dz, double width_scale) {
  if (dz < 1) throw ConfigError(msg("latent width ", dz, " must be >= 1"));
  const auto w = [&](int64_t base) { return scaled_width(base, width_scale); };

  PlanSet p;
  p.dz = dz;
  p.image_hw = 32;

  {
    PlanBuilder b;
    b.conv("l1", false, w(64), 5, 2, 2, 2, 2, 2);
    b.bn("l1", false, w(64));
    b.act("l1", false, Act::leaky_relu);
    b.conv("l2", true, w(128), 5, 2, 2, 2, 2, 2);
    b.bn("l2", true, w(128));
    b.act("l2", true, Act::leaky_relu);
    b.conv("l3", true, w(256), 8, 1, 3, 4, 3, 4);
    b.bn("l3", true, w(256));
    b.act("l3", true, Act::leaky_relu);
    b.conv("l4", true, w(512), 8, 1, 0, 0, 0, 0);
    b.bn("l4", true, w(512));
    b.act("l4", true, Act::leaky_relu);
    b.conv("l5", true, w(1024), 1, 1, 0, 0, 0, 0);
    b.fc("l6", true, dz);
    p.encoder = std::move(b.rows);
  }

  {
    // The fc width must stay exactly 4x the reshape channel count.
    const int64_t c0 = w(256);
    PlanBuilder b;
    b.fc("l1", true, 4 * c0);
    b.act("l1", true, Act::relu);
    b.reshape("l1", true, c0, 2, 2);
    b.deconv("l2", true, w(512), 4, 2, 1);
    b.bn("l2", true, w(512));
    b.act("l2", true, Act::leaky_relu);
    b.deconv("l3", true, w(256), 4, 2, 1);
    b.bn("l3", true, w(256));
    b.act("l3", true, Act::leaky_relu);
    b.deconv("l4", true, w(128), 4, 2, 1);
    b.bn("l4", true, w(128));
    b.act("l4", true, Act::leaky_relu);
    b.deconv("l5", false, w(64), 4, 2, 1);
    b.bn("l5", false, w(64));
    b.act("l5", false, Act::leaky_relu);
    b.deconv("l6", false, 3, 1, 1, 0);
    b.act("l6", false, Act::tanh);
    p.generator = std::move(b.rows);
  }

  {
    PlanBuilder b;
    b.conv("l1", false, w(96), 5, 1, 2, 2, 2, 2);
    b.act("l1", false, Act::relu);
    b.pool("l1", false);
    b.conv("l2", true, w(192), 5, 1, 2, 2, 2, 2);
    b.act("l2", true, Act::relu);
    b.pool("l2", true);
    b.conv("l3", true, w(384), 5, 1, 2, 2, 2, 2);
    b.act("l3", true, Act::relu);
    b.pool("l3", true);
    b.conv("l4", true, w(768), 5, 1, 2, 2, 2, 2);
    b.act("l4", true, Act::relu);
    b.pool("l4", true);
    p.disc_trunk = std::move(b.rows);
  }

  {
    PlanBuilder b;
    for (int i = 1; i <= 4; ++i) {
      b.fc("l" + std::to_string(i), false, w(512));
      b.act("l" + std::to_string(i), false, Act::relu);
    }
    p.latent_body = std::move(b.rows);
  }

  return p;
}

// Miniature family for double-precision gradient verification: 8x8 inputs,
// every width one sixteenth of the full-size table, same shared/private row
// pattern. Spatial geometry is re-derived for the smaller canvas (two
// stride-2 stages instead of four; the "same"-padded and valid rows keep
// their roles).
PlanSet mini_plans(int64_t dz) {
  if (dz < 1) throw ConfigError(msg("latent width ", dz, " must be >= 1"));
  PlanSet p;
  p.dz = dz;
  p.image_hw = 8;

  {
    PlanBuilder b;
    b.conv("l1", false, 4, 3, 2, 1, 1, 1, 1);  // 8 -> 4
    b.bn("l1", false, 4);
    b.act("l1", false, Act::leaky_relu);
    b.conv("l2", true, 8, 3, 2, 1, 1, 1, 1);  // 4 -> 2
    b.bn("l2", true, 8);
    b.act("l2", true, Act::leaky_relu);
    b.conv("l3", true, 16, 3, 1, 1, 1, 1, 1);  // 2 -> 2 (same)
    b.bn("l3", true, 16);
    b.act("l3", true, Act::leaky_relu);
    b.conv("l4", true, 32, 2, 1, 0, 0, 0, 0);  // 2 -> 1 (valid)
    b.bn("l4", true, 32);
    b.act("l4", true, Act::leaky_relu);
    b.conv("l5", true, 64, 1, 1, 0, 0, 0, 0);
    b.fc("l6", true, dz);
    p.encoder = std::move(b.rows);
  }

  {
    const int64_t c0 = 16;
    PlanBuilder b;
    b.fc("l1", true, 4 * c0);
    b.act("l1", true, Act::relu);
    b.reshape("l1", true, c0, 2, 2);
    b.deconv("l2", true, 32, 4, 2, 1);  // 2 -> 4
    b.bn("l2", true, 32);
    b.act("l2", true, Act::leaky_relu);
    b.deconv("l3", true, 16, 4, 2, 1);  // 4 -> 8
    b.bn("l3", true, 16);
    b.act("l3", true, Act::leaky_relu);
    b.deconv("l4", false, 8, 3, 1, 1);  // 8 -> 8
    b.bn("l4", false, 8);
    b.act("l4", false, Act::leaky_relu);
    b.deconv("l5", false, 3, 1, 1, 0);
    b.act("l5", false, Act::tanh);
    p.generator = std::move(b.rows);
  }

  {
    PlanBuilder b;
    b.conv("l1", false, 6, 3, 1, 1, 1, 1, 1);
    b.act("l1", false, Act::relu);
    b.pool("l1", false);  // 8 -> 4
    b.conv("l2", true, 12, 3, 1, 1, 1, 1, 1);
    b.act("l2", true, Act::relu);
    b.pool("l2", true);  // 4 -> 2
    b.conv("l3", true, 24, 3, 1, 1, 1, 1, 1);
    b.act("l3", true, Act::relu);
    b.conv("l4", true, 48, 3, 1, 1, 1, 1, 1);
    b.act("l4", true, Act::relu);
    p.disc_trunk = std::move(b.rows);
  }

  {
    PlanBuilder b;
    for (int i = 1; i <= 4; ++i) {
      b.fc("l" + std::to_string(i), false, 32);
      b.act("l" + std::to_string(i), false, Act::relu);
    }
    p.latent_body = std::move(b.rows);
  }

  return p;
}

}  // namespace xdom::nn
