#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xdom/error.hpp"

namespace xdom::metrics {

// All measurement code works in double precision; these utilities are used
// for latent-space penalties, diagnostics, and the self-test CLI.

using Vector = std::vector<double>;

// Row-major sample matrix: n points of dimension d.
struct SampleSet {
  int64_t n = 0;
  int64_t d = 0;
  std::vector<double> x;  // n*d entries

  const double* row(int64_t i) const { return x.data() + i * d; }
  double* row(int64_t i) { return x.data() + i * d; }
};

SampleSet make_sample_set(int64_t n, int64_t d, std::vector<double> values);

// Finite weighted point set: pairwise-distinct locations, masses >= 0
// summing to 1 within 1e-12 (validated on construction).
struct DiscreteDistribution {
  std::vector<Vector> points;
  std::vector<double> mass;

  int64_t size() const { return static_cast<int64_t>(points.size()); }
  int64_t dim() const { return points.empty() ? 0 : static_cast<int64_t>(points[0].size()); }
};

DiscreteDistribution make_distribution(std::vector<Vector> points, std::vector<double> mass);

// ---- vector distances ------------------------------------------------------

// (sum_i |a_i - b_i|^p)^(1/p), p >= 1. Evaluated in max-factored form so
// large p does not overflow.
double minkowski_distance(const Vector& a, const Vector& b, double p);
double manhattan_distance(const Vector& a, const Vector& b);
double euclidean_distance(const Vector& a, const Vector& b);

// ---- divergences -----------------------------------------------------------

// KL(p || q) = sum_i p_i ln(p_i / q_i), natural log, with 0*ln(0/q) = 0.
// Requires identical atom locations in identical order; q_i = 0 < p_i is a
// domain error (absolute continuity violated).
double kl_divergence(const DiscreteDistribution& p, const DiscreteDistribution& q);

// ---- kernels and MMD ---------------------------------------------------------

enum class KernelFamily { inverse_multiquadric, gaussian };

// inverse_multiquadric: k(x,y) = scale / (scale + ||x-y||^2)
// gaussian:             k(x,y) = exp(-||x-y||^2 / (2*scale))
// scale must be > 0. Both kernels are bounded by 1 and equal 1 at x = y.
struct KernelSpec {
  KernelFamily family = KernelFamily::inverse_multiquadric;
  double scale = 1.0;
};

double kernel_eval(const KernelSpec& k, const double* x, const double* y, int64_t d);
double kernel_eval(const KernelSpec& k, const Vector& x, const Vector& y);

// V-statistic (biased) squared MMD; clamped at zero (the exact value is a
// squared RKHS norm, so any negative result is floating-point noise).
double mmd_biased(const SampleSet& X, const SampleSet& Y, const KernelSpec& k);

// U-statistic (unbiased) squared MMD; may legitimately be negative.
// Requires at least two samples per set.
double mmd_unbiased(const SampleSet& X, const SampleSet& Y, const KernelSpec& k);

// ---- earth mover's distance ---------------------------------------------------

struct TransportPlan {
  double cost = 0.0;
  int64_t n = 0, m = 0;
  std::vector<double> flow;  // n*m, row-major: mass moved from p_i to q_j

  double at(int64_t i, int64_t j) const { return flow[i * m + j]; }
};

// Exact earth mover's distance between discrete distributions under the
// Euclidean ground metric, via successive shortest augmenting paths on the
// bipartite transportation graph. Intended for small instances; more than
// 64 atoms per side is rejected.
TransportPlan emd(const DiscreteDistribution& p, const DiscreteDistribution& q);

// ---- self-test -------------------------------------------------------------------

// Closed-form and property checks runnable from the CLI. Prints one line
// per check to `out`; returns true when everything passed.
bool run_selftest(std::string& report);

}  // namespace xdom::metrics
