#include <algorithm>
#include <cmath>

#include "xdom/metrics/metrics.hpp"

namespace xdom::metrics {

namespace {
double sqdist(const double* x, const double* y, int64_t d) {
  double s = 0.0;
  for (int64_t i = 0; i < d; ++i) {
    const double diff = x[i] - y[i];
    s += diff * diff;
  }
  return s;
}

void check_kernel(const KernelSpec& k) {
  if (!(k.scale > 0.0) || !std::isfinite(k.scale)) {
    throw DomainError(msg("kernel scale ", k.scale, " must be a positive finite real"));
  }
}

void check_sets(const SampleSet& X, const SampleSet& Y) {
  if (X.d != Y.d) {
    throw DimensionError(msg("sample sets have dims ", X.d, " vs ", Y.d));
  }
  if (X.n < 1 || Y.n < 1) throw DimensionError("sample sets must be non-empty");
}
}  // namespace

double kernel_eval(const KernelSpec& k, const double* x, const double* y, int64_t d) {
  check_kernel(k);
  const double r2 = sqdist(x, y, d);
  switch (k.family) {
    case KernelFamily::inverse_multiquadric:
      return k.scale / (k.scale + r2);
    case KernelFamily::gaussian:
      return std::exp(-r2 / (2.0 * k.scale));
  }
  throw DomainError("unknown kernel family");
}

double kernel_eval(const KernelSpec& k, const Vector& x, const Vector& y) {
  if (x.size() != y.size()) {
    throw DimensionError(msg("kernel arguments have dims ", x.size(), " vs ", y.size()));
  }
  return kernel_eval(k, x.data(), y.data(), static_cast<int64_t>(x.size()));
}

double mmd_biased(const SampleSet& X, const SampleSet& Y, const KernelSpec& k) {
  check_kernel(k);
  check_sets(X, Y);
  const double n = static_cast<double>(X.n), m = static_cast<double>(Y.n);
  double kxx = 0.0, kyy = 0.0, kxy = 0.0;
  for (int64_t i = 0; i < X.n; ++i)
    for (int64_t j = 0; j < X.n; ++j) kxx += kernel_eval(k, X.row(i), X.row(j), X.d);
  for (int64_t i = 0; i < Y.n; ++i)
    for (int64_t j = 0; j < Y.n; ++j) kyy += kernel_eval(k, Y.row(i), Y.row(j), Y.d);
  for (int64_t i = 0; i < X.n; ++i)
    for (int64_t j = 0; j < Y.n; ++j) kxy += kernel_eval(k, X.row(i), Y.row(j), X.d);
  const double v = kxx / (n * n) + kyy / (m * m) - 2.0 * kxy / (n * m);
  // Squared RKHS norm: mathematically >= 0, so negative dust is rounding.
  return std::max(v, 0.0);
}

double mmd_unbiased(const SampleSet& X, const SampleSet& Y, const KernelSpec& k) {
  check_kernel(k);
  check_sets(X, Y);
  if (X.n < 2 || Y.n < 2) {
    throw DimensionError("unbiased MMD needs at least 2 samples per set");
  }
  const double n = static_cast<double>(X.n), m = static_cast<double>(Y.n);
  double kxx = 0.0, kyy = 0.0, kxy = 0.0;
  for (int64_t i = 0; i < X.n; ++i)
    for (int64_t j = 0; j < X.n; ++j)
      if (i != j) kxx += kernel_eval(k, X.row(i), X.row(j), X.d);
  for (int64_t i = 0; i < Y.n; ++i)
    for (int64_t j = 0; j < Y.n; ++j)
      if (i != j) kyy += kernel_eval(k, Y.row(i), Y.row(j), Y.d);
  for (int64_t i = 0; i < X.n; ++i)
    for (int64_t j = 0; j < Y.n; ++j) kxy += kernel_eval(k, X.row(i), Y.row(j), X.d);
  return kxx / (n * (n - 1.0)) + kyy / (m * (m - 1.0)) - 2.0 * kxy / (n * m);
}

}  // namespace xdom::metrics
