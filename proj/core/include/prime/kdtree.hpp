#pragma once

#include "prime/types.hpp"

#include <span>
#include <utility>
#include <vector>

namespace prime {

// Static 3-d tree over a point set. Queries are exact; distance ties are
// resolved towards the lower point index so results match a brute-force
// scan ordered by (distance, index).
class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> points);

  std::size_t size() const { return points_.size(); }

  // Index of the closest point to `query`.
  int nearest(const Vec3& query) const;

  // Up to k closest points as (squared distance, index), ascending. The point
  // with index `exclude` (if >= 0) is skipped.
  std::vector<std::pair<double, int>> knn(const Vec3& query, int k, int exclude = -1) const;

 private:
  struct Node {
    int point = -1;
    int axis = 0;
    int left = -1;
    int right = -1;
  };

  int build(std::vector<int>& idx, int lo, int hi, int depth);
  void search(int node, const Vec3& q, int k, int exclude, std::vector<std::pair<double, int>>& heap) const;

  std::vector<Vec3> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace prime
