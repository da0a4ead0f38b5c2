#include "prime/kdtree.hpp"

#include <algorithm>
#include <numeric>

namespace prime {

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  std::vector<int> idx(points_.size());
  std::iota(idx.begin(), idx.end(), 0);
  nodes_.reserve(points_.size());
  root_ = build(idx, 0, static_cast<int>(idx.size()), 0);
}

int KdTree::build(std::vector<int>& idx, int lo, int hi, int depth) {
  if (lo >= hi) return -1;
  const int axis = depth % 3;
  const int mid = lo + (hi - lo) / 2;
  std::nth_element(idx.begin() + lo, idx.begin() + mid, idx.begin() + hi, [&](int a, int b) {
    const double pa = points_[static_cast<std::size_t>(a)][axis];
    const double pb = points_[static_cast<std::size_t>(b)][axis];
    return pa < pb || (pa == pb && a < b);
  });
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({idx[static_cast<std::size_t>(mid)], axis, -1, -1});
  const int left = build(idx, lo, mid, depth + 1);
  const int right = build(idx, mid + 1, hi, depth + 1);
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

int KdTree::nearest(const Vec3& query) const {
  const auto hit = knn(query, 1);
  return hit.empty() ? -1 : hit.front().second;
}

std::vector<std::pair<double, int>> KdTree::knn(const Vec3& query, int k, int exclude) const {
  std::vector<std::pair<double, int>> heap;
  if (k <= 0) return heap;
  heap.reserve(static_cast<std::size_t>(k) + 1);
  search(root_, query, k, exclude, heap);
  std::sort_heap(heap.begin(), heap.end());
  return heap;
}

void KdTree::search(int node, const Vec3& q, int k, int exclude,
                    std::vector<std::pair<double, int>>& heap) const {
  if (node < 0) return;
  const Node& nd = nodes_[static_cast<std::size_t>(node)];
  const Vec3& p = points_[static_cast<std::size_t>(nd.point)];
  if (nd.point != exclude) {
    // Max-heap on (d2, index): the top is the current worst candidate.
    const std::pair<double, int> cand{(p - q).squaredNorm(), nd.point};
    if (static_cast<int>(heap.size()) < k) {
      heap.push_back(cand);
      std::push_heap(heap.begin(), heap.end());
    } else if (cand < heap.front()) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = cand;
      std::push_heap(heap.begin(), heap.end());
    }
  }
  const double diff = q[nd.axis] - p[nd.axis];
  const int near = diff < 0 ? nd.left : nd.right;
  const int far = diff < 0 ? nd.right : nd.left;
  search(near, q, k, exclude, heap);
  // Equal-distance points on the far side may still win the index tie-break.
  if (static_cast<int>(heap.size()) < k || diff * diff <= heap.front().first) {
    search(far, q, k, exclude, heap);
  }
}

}  // namespace prime
