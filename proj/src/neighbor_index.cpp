#include "sqgrasp/neighbor_index.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace sqgrasp {

NeighborIndex::NeighborIndex(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, points_.size());
  }
}

int NeighborIndex::build(std::size_t begin, std::size_t end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  Vec3 lo = points_[order_[begin]];
  Vec3 hi = lo;
  for (std::size_t i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  nodes_[id].lo = lo;
  nodes_[id].hi = hi;
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  if (end - begin <= kLeafSize) return id;

  int dim = 0;
  (hi - lo).maxCoeff(&dim);
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::size_t a, std::size_t b) {
                     const double pa = points_[a][dim];
                     const double pb = points_[b][dim];
                     return pa < pb || (pa == pb && a < b);
                   });
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

namespace {

double box_sq_dist(const Vec3& q, const Vec3& lo, const Vec3& hi) {
  double d[3];
  for (int k = 0; k < 3; ++k) {
    if (q[k] < lo[k]) d[k] = lo[k] - q[k];
    else if (q[k] > hi[k]) d[k] = q[k] - hi[k];
    else d[k] = 0.0;
  }
  return d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
}

}  // namespace

void NeighborIndex::search(int node_id, const Vec3& q, Hit& best) const {
  const Node& node = nodes_[node_id];
  if (node.left < 0) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const std::size_t idx = order_[i];
      const double d = squared_distance(q, points_[idx]);
      if (d < best.sq_dist || (d == best.sq_dist && idx < best.index)) best = {idx, d};
    }
    return;
  }
  const Node& l = nodes_[node.left];
  const Node& r = nodes_[node.right];
  const double dl = box_sq_dist(q, l.lo, l.hi);
  const double dr = box_sq_dist(q, r.lo, r.hi);
  // A box at exactly the current best distance may still hold a lower index.
  if (dl <= dr) {
    if (dl <= best.sq_dist) search(node.left, q, best);
    if (dr <= best.sq_dist) search(node.right, q, best);
  } else {
    if (dr <= best.sq_dist) search(node.right, q, best);
    if (dl <= best.sq_dist) search(node.left, q, best);
  }
}

NeighborIndex::Hit NeighborIndex::nearest(const Vec3& query) const {
  Hit best{std::numeric_limits<std::size_t>::max(), std::numeric_limits<double>::infinity()};
  if (!nodes_.empty()) search(0, query, best);
  return best;
}

std::size_t NeighborIndex::count_within(const Vec3& query, double radius) const {
  if (nodes_.empty()) return 0;
  const double r2 = radius * radius;
  std::size_t count = 0;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (box_sq_dist(query, node.lo, node.hi) > r2) continue;
    if (node.left < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        if (squared_distance(query, points_[order_[i]]) <= r2) ++count;
      }
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  return count;
}

std::vector<NeighborIndex::Hit> NeighborIndex::nearest_all(std::span<const Vec3> queries) const {
  std::vector<Hit> hits(queries.size());
  const auto n = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) hits[i] = nearest(queries[i]);
  return hits;
}

}  // namespace sqgrasp
