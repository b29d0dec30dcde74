#include <algorithm>
#include <cmath>

#include "xdom/metrics/metrics.hpp"

namespace xdom::metrics {

namespace {
void check_pair(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw DimensionError(
        msg("vector length mismatch: ", a.size(), " vs ", b.size()));
  }
  for (double v : a)
    if (!std::isfinite(v)) throw DomainError("non-finite entry in first vector");
  for (double v : b)
    if (!std::isfinite(v)) throw DomainError("non-finite entry in second vector");
}
}  // namespace

SampleSet make_sample_set(int64_t n, int64_t d, std::vector<double> values) {
  if (n < 0 || d <= 0) throw DimensionError(msg("bad sample-set dims n=", n, " d=", d));
  if (static_cast<int64_t>(values.size()) != n * d) {
    throw DimensionError(
        msg("sample-set data has ", values.size(), " entries, want ", n * d));
  }
  for (double v : values)
    if (!std::isfinite(v)) throw DomainError("non-finite entry in sample set");
  return SampleSet{n, d, std::move(values)};
}

DiscreteDistribution make_distribution(std::vector<Vector> points, std::vector<double> mass) {
  if (points.size() != mass.size()) {
    throw DimensionError(msg("distribution has ", points.size(), " points but ",
                             mass.size(), " masses"));
  }
  if (points.empty()) throw DomainError("distribution needs at least one atom");
  const size_t d = points[0].size();
  double total = 0.0;
  for (size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != d) throw DimensionError("atoms have mixed dimensions");
    for (double v : points[i])
      if (!std::isfinite(v)) throw DomainError("non-finite atom location");
    if (!(mass[i] >= 0.0)) throw DomainError(msg("negative or NaN mass at atom ", i));
    total += mass[i];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw DomainError(msg("atom masses sum to ", total, ", want 1 within 1e-12"));
  }
  for (size_t i = 0; i < points.size(); ++i) {
    for (size_t j = i + 1; j < points.size(); ++j) {
      if (points[i] == points[j]) {
        throw DomainError(msg("duplicate atom location at indices ", i, " and ", j));
      }
    }
  }
  return DiscreteDistribution{std::move(points), std::move(mass)};
}

double minkowski_distance(const Vector& a, const Vector& b, double p) {
  check_pair(a, b);
  if (!(p >= 1.0)) throw DomainError(msg("minkowski order p=", p, " must be >= 1"));
  double maxdiff = 0.0;
  for (size_t i = 0; i < a.size(); ++i) maxdiff = std::max(maxdiff, std::abs(a[i] - b[i]));
  if (maxdiff == 0.0) return 0.0;
  // Factor out the largest |difference| so x^p cannot overflow for large p.
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) sum += std::pow(std::abs(a[i] - b[i]) / maxdiff, p);
  return maxdiff * std::pow(sum, 1.0 / p);
}

double manhattan_distance(const Vector& a, const Vector& b) {
  check_pair(a, b);
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return sum;
}

double euclidean_distance(const Vector& a, const Vector& b) {
  check_pair(a, b);
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

double kl_divergence(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  if (p.size() != q.size()) {
    throw DimensionError(msg("KL needs matching atom counts, got ", p.size(), " vs ", q.size()));
  }
  for (int64_t i = 0; i < p.size(); ++i) {
    if (p.points[static_cast<size_t>(i)] != q.points[static_cast<size_t>(i)]) {
      throw DomainError(msg("KL atom location mismatch at index ", i));
    }
  }
  double sum = 0.0;
  for (int64_t i = 0; i < p.size(); ++i) {
    const double pi = p.mass[static_cast<size_t>(i)];
    const double qi = q.mass[static_cast<size_t>(i)];
    if (pi == 0.0) continue;  // 0 * ln(0/q) = 0 by convention
    if (qi == 0.0) {
      throw DomainError(msg("KL undefined: p has mass ", pi, " where q has none (atom ", i, ")"));
    }
    sum += pi * std::log(pi / qi);
  }
  return sum;
}

}  // namespace xdom::metrics
