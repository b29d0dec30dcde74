#include <cmath>
#include <sstream>

#include "xdom/metrics/metrics.hpp"
#include "xdom/rng.hpp"

// Closed-form and property checks over the measurement library, runnable
// from the command line. Each check appends one "[ok]"/"[FAIL]" line.

namespace xdom::metrics {

namespace {

struct Reporter {
  std::ostringstream out;
  bool all_ok = true;

  void check(const std::string& name, bool ok, const std::string& detail = "") {
    out << (ok ? "[ok]   " : "[FAIL] ") << name;
    if (!ok && !detail.empty()) out << " (" << detail << ")";
    out << '\n';
    all_ok &= ok;
  }
};

DiscreteDistribution dist1d(std::vector<double> xs, std::vector<double> ms) {
  std::vector<Vector> pts;
  pts.reserve(xs.size());
  for (double v : xs) pts.push_back({v});
  return make_distribution(std::move(pts), std::move(ms));
}

}  // namespace

bool run_selftest(std::string& report) {
  Reporter r;
  Rng rng(1234);

  // --- closed-form distances -------------------------------------------------
  r.check("euclidean((0,0),(3,4)) == 5",
          euclidean_distance({0, 0}, {3, 4}) == 5.0);
  r.check("manhattan((1,2),(4,-2)) == 7",
          manhattan_distance({1, 2}, {4, -2}) == 7.0);
  r.check("minkowski(p=2) equals euclidean",
          std::abs(minkowski_distance({1, -3, 2}, {4, 1, 0}, 2.0) -
                   euclidean_distance({1, -3, 2}, {4, 1, 0})) < 1e-14);
  r.check("minkowski(p=3) of unit-square diagonal == 2^(1/3)",
          std::abs(minkowski_distance({0, 0}, {1, 1}, 3.0) - std::cbrt(2.0)) < 1e-14);
  {
    bool ok = true;
    for (int t = 0; t < 100 && ok; ++t) {
      Vector a(4), b(4);
      for (auto& v : a) v = rng.normal();
      for (auto& v : b) v = rng.normal();
      ok = std::abs(minkowski_distance(a, b, 1.0) - manhattan_distance(a, b)) < 1e-13;
    }
    r.check("minkowski(p=1) equals manhattan on random vectors", ok);
  }

  // --- KL divergence -----------------------------------------------------------
  {
    const auto p = dist1d({0.0, 1.0}, {0.5, 0.5});
    const auto q = dist1d({0.0, 1.0}, {0.25, 0.75});
    const double want = std::log(2.0) - 0.5 * std::log(3.0);
    r.check("KL((1/2,1/2)||(1/4,3/4)) == ln2 - ln3/2",
            std::abs(kl_divergence(p, q) - want) < 1e-15);
    r.check("KL(p||p) == 0", kl_divergence(p, p) == 0.0);
  }
  {
    bool ok = true;
    for (int t = 0; t < 1000 && ok; ++t) {
      std::vector<double> pm(5), qm(5);
      double ps = 0, qs = 0;
      for (int i = 0; i < 5; ++i) {
        pm[static_cast<size_t>(i)] = rng.uniform01() + 1e-3;
        qm[static_cast<size_t>(i)] = rng.uniform01() + 1e-3;
        ps += pm[static_cast<size_t>(i)];
        qs += qm[static_cast<size_t>(i)];
      }
      double fix_p = 0, fix_q = 0;
      for (int i = 0; i < 5; ++i) {
        pm[static_cast<size_t>(i)] /= ps;
        qm[static_cast<size_t>(i)] /= qs;
        fix_p += pm[static_cast<size_t>(i)];
        fix_q += qm[static_cast<size_t>(i)];
      }
      pm[4] += 1.0 - fix_p;  // absorb rounding so masses sum to 1 exactly
      qm[4] += 1.0 - fix_q;
      const auto p = dist1d({0, 1, 2, 3, 4}, pm);
      const auto q = dist1d({0, 1, 2, 3, 4}, qm);
      ok = kl_divergence(p, q) >= -1e-12;
    }
    r.check("KL non-negative on random distribution pairs", ok);
  }

  // --- kernels ------------------------------------------------------------------
  {
    KernelSpec imq{KernelFamily::inverse_multiquadric, 3.0};
    r.check("IMQ kernel at x == y equals 1", kernel_eval(imq, {1.0, 2.0}, {1.0, 2.0}) == 1.0);
    // ||x-y||^2 == scale  =>  k = scale / (2*scale) = 1/2
    r.check("IMQ kernel at squared distance == scale equals 1/2",
            std::abs(kernel_eval(imq, {0.0}, {std::sqrt(3.0)}) - 0.5) < 1e-15);
    KernelSpec rbf{KernelFamily::gaussian, 2.0};
    r.check("gaussian kernel at x == y equals 1", kernel_eval(rbf, {5.0}, {5.0}) == 1.0);
    r.check("gaussian kernel decreases with distance",
            kernel_eval(rbf, {0.0}, {1.0}) > kernel_eval(rbf, {0.0}, {2.0}));
  }

  // --- MMD -------------------------------------------------------------------------
  {
    KernelSpec k{KernelFamily::inverse_multiquadric, 4.0};
    SampleSet X = make_sample_set(3, 2, {0, 0, 1, 0, 0, 1});
    r.check("biased MMD of a set against itself == 0", mmd_biased(X, X, k) == 0.0);
    bool nonneg = true;
    for (int t = 0; t < 50 && nonneg; ++t) {
      std::vector<double> xs(8), ys(12);
      for (auto& v : xs) v = rng.normal();
      for (auto& v : ys) v = rng.normal() + 0.5;
      nonneg = mmd_biased(make_sample_set(4, 2, xs), make_sample_set(6, 2, ys), k) >= 0.0;
    }
    r.check("biased MMD non-negative on random sets", nonneg);

    // Under P == Q the unbiased estimator has mean zero.
    double sum = 0, sumsq = 0;
    const int reps = 50, n = 100;
    for (int t = 0; t < reps; ++t) {
      std::vector<double> xs(static_cast<size_t>(n) * 2), ys(static_cast<size_t>(n) * 2);
      for (auto& v : xs) v = rng.normal();
      for (auto& v : ys) v = rng.normal();
      const double u = mmd_unbiased(make_sample_set(n, 2, xs), make_sample_set(n, 2, ys), k);
      sum += u;
      sumsq += u * u;
    }
    const double mean = sum / reps;
    const double se = std::sqrt((sumsq / reps - mean * mean) / reps);
    r.check("unbiased MMD has mean ~0 under matched distributions",
            std::abs(mean) <= 4.0 * se + 1e-12, msg("mean=", mean, " se=", se));
  }

  // --- EMD ---------------------------------------------------------------------
  {
    const auto d0 = dist1d({0.0}, {1.0});
    const auto d1 = dist1d({1.0}, {1.0});
    r.check("EMD(delta_0, delta_1) == 1", std::abs(emd(d0, d1).cost - 1.0) < 1e-12);

    const auto split = dist1d({0.0, 2.0}, {0.5, 0.5});
    const auto mid = dist1d({1.0}, {1.0});
    r.check("EMD of symmetric split to midpoint == 1",
            std::abs(emd(split, mid).cost - 1.0) < 1e-12);
    r.check("EMD is symmetric", std::abs(emd(split, mid).cost - emd(mid, split).cost) < 1e-12);
    r.check("EMD(p, p) == 0", std::abs(emd(split, split).cost) < 1e-12);

    const auto plan = emd(split, mid);
    double row0 = 0;
    for (int64_t j = 0; j < plan.m; ++j) row0 += plan.at(0, j);
    r.check("transport plan reproduces marginals", std::abs(row0 - 0.5) < 1e-9);
  }

  report = r.out.str();
  return r.all_ok;
}

}  // namespace xdom::metrics
