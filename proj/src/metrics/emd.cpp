#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "xdom/metrics/metrics.hpp"

// Exact transportation solver: successive shortest augmenting paths with
// node potentials on the bipartite graph (sources = atoms of p, sinks =
// atoms of q). Every augmentation saturates at least one remaining supply
// or demand, so at most n+m-1 augmentations occur; potentials keep reduced
// costs non-negative, which makes each Dijkstra pass valid and the final
// flow optimal.

namespace xdom::metrics {

namespace {
constexpr double kMassEps = 1e-15;
}

TransportPlan emd(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  if (p.dim() != q.dim()) {
    throw DimensionError(msg("distributions live in dims ", p.dim(), " vs ", q.dim()));
  }
  if (p.size() > 64 || q.size() > 64) {
    throw DomainError(msg("exact transport solver accepts at most 64 atoms per side, got ",
                          p.size(), " and ", q.size()));
  }
  const int64_t n = p.size(), m = q.size();
  const int64_t V = n + m;

  // Ground metric: Euclidean distance between atom locations.
  std::vector<double> cost(static_cast<size_t>(n * m));
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < m; ++j)
      cost[static_cast<size_t>(i * m + j)] =
          euclidean_distance(p.points[static_cast<size_t>(i)], q.points[static_cast<size_t>(j)]);

  std::vector<double> rem_a = p.mass, rem_b = q.mass;
  std::vector<double> flow(static_cast<size_t>(n * m), 0.0);
  std::vector<double> pot(static_cast<size_t>(V), 0.0);

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(static_cast<size_t>(V));
  std::vector<int64_t> parent(static_cast<size_t>(V));
  std::vector<char> done(static_cast<size_t>(V));

  // Upper bound on augmentations; exceeding it means numerical breakdown.
  const int64_t max_rounds = 4 * V + 8;
  for (int64_t round = 0;; ++round) {
    double remaining = 0.0;
    for (double v : rem_a) remaining += v;
    if (remaining <= kMassEps) break;
    if (round >= max_rounds) {
      throw NumericError("transport solver failed to converge (degenerate masses?)");
    }

    // Multi-source Dijkstra over reduced costs from all unsatisfied sources.
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(parent.begin(), parent.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    for (int64_t i = 0; i < n; ++i)
      if (rem_a[static_cast<size_t>(i)] > kMassEps) dist[static_cast<size_t>(i)] = 0.0;

    for (int64_t it = 0; it < V; ++it) {
      int64_t u = -1;
      double best = inf;
      for (int64_t v = 0; v < V; ++v)
        if (!done[static_cast<size_t>(v)] && dist[static_cast<size_t>(v)] < best) {
          best = dist[static_cast<size_t>(v)];
          u = v;
        }
      if (u < 0) break;
      done[static_cast<size_t>(u)] = 1;
      // Reduced costs are mathematically >= 0; clamp away rounding noise,
      // and never relax a settled node (keeps the parent pointers a forest,
      // so path reconstruction always terminates).
      if (u < n) {  // source -> every sink (forward arcs, uncapacitated)
        for (int64_t j = 0; j < m; ++j) {
          const int64_t v = n + j;
          if (done[static_cast<size_t>(v)]) continue;
          const double rc =
              std::max(0.0, cost[static_cast<size_t>(u * m + j)] + pot[static_cast<size_t>(u)] -
                                pot[static_cast<size_t>(v)]);
          if (dist[static_cast<size_t>(u)] + rc < dist[static_cast<size_t>(v)]) {
            dist[static_cast<size_t>(v)] = dist[static_cast<size_t>(u)] + rc;
            parent[static_cast<size_t>(v)] = u;
          }
        }
      } else {  // sink -> sources with positive flow (backward arcs)
        const int64_t j = u - n;
        for (int64_t i = 0; i < n; ++i) {
          if (done[static_cast<size_t>(i)]) continue;
          if (flow[static_cast<size_t>(i * m + j)] <= kMassEps) continue;
          const double rc =
              std::max(0.0, -cost[static_cast<size_t>(i * m + j)] + pot[static_cast<size_t>(u)] -
                                pot[static_cast<size_t>(i)]);
          if (dist[static_cast<size_t>(u)] + rc < dist[static_cast<size_t>(i)]) {
            dist[static_cast<size_t>(i)] = dist[static_cast<size_t>(u)] + rc;
            parent[static_cast<size_t>(i)] = u;
          }
        }
      }
    }

    // Cheapest reachable unsatisfied sink.
    int64_t sink = -1;
    double best = inf;
    for (int64_t j = 0; j < m; ++j) {
      const int64_t v = n + j;
      if (rem_b[static_cast<size_t>(j)] > kMassEps && dist[static_cast<size_t>(v)] < best) {
        best = dist[static_cast<size_t>(v)];
        sink = v;
      }
    }
    if (sink < 0) {
      throw NumericError("transport solver found no augmenting path (mass imbalance?)");
    }

    // Bottleneck along the path: remaining supply at the origin, remaining
    // demand at the sink, and flow on every backward arc.
    double delta = rem_b[static_cast<size_t>(sink - n)];
    for (int64_t v = sink; parent[static_cast<size_t>(v)] >= 0;
         v = parent[static_cast<size_t>(v)]) {
      const int64_t u = parent[static_cast<size_t>(v)];
      if (u >= n) {  // backward arc sink u -> source v
        delta = std::min(delta, flow[static_cast<size_t>(v * m + (u - n))]);
      }
    }
    {
      int64_t origin = sink;
      while (parent[static_cast<size_t>(origin)] >= 0) origin = parent[static_cast<size_t>(origin)];
      delta = std::min(delta, rem_a[static_cast<size_t>(origin)]);

      for (int64_t v = sink; parent[static_cast<size_t>(v)] >= 0;
           v = parent[static_cast<size_t>(v)]) {
        const int64_t u = parent[static_cast<size_t>(v)];
        if (u < n) {
          flow[static_cast<size_t>(u * m + (v - n))] += delta;
        } else {
          flow[static_cast<size_t>(v * m + (u - n))] -= delta;
        }
      }
      rem_a[static_cast<size_t>(origin)] -= delta;
      rem_b[static_cast<size_t>(sink - n)] -= delta;
    }

    // Potential update capped at the sink distance keeps every reduced
    // cost non-negative, including arcs out of currently-unreachable nodes.
    for (int64_t v = 0; v < V; ++v) {
      pot[static_cast<size_t>(v)] += std::min(dist[static_cast<size_t>(v)], best);
    }
  }

  TransportPlan plan;
  plan.n = n;
  plan.m = m;
  plan.flow = std::move(flow);
  plan.cost = 0.0;
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < m; ++j)
      plan.cost += plan.flow[static_cast<size_t>(i * m + j)] * cost[static_cast<size_t>(i * m + j)];
  return plan;
}

}  // namespace xdom::metrics
