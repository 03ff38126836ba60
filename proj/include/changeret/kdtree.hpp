#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "changeret/cloud.hpp"

namespace changeret {

struct Neighbor {
  std::size_t index = 0;
  double distance = std::numeric_limits<double>::infinity();
};

/**
 * @brief Exact k-d tree over row-major points of runtime dimension.
 *
 * Built once, then read-only; concurrent queries are safe. Nearest-neighbor
 * ties are resolved to the lowest point index, so results equal an
 * exhaustive scan under the same rule.
 */
template <typename Scalar>
class KdTree {
 public:
  KdTree() = default;
  /// `data` holds `data.size() / dim` rows of `dim` values; it is copied.
  KdTree(std::span<const Scalar> data, std::size_t dim);

  std::size_t size() const { return count_; }
  std::size_t dim() const { return dim_; }
  bool empty() const { return count_ == 0; }

  /// Nearest point. Empty tree returns index 0 and infinite distance.
  Neighbor nearest(std::span<const Scalar> query) const;

  /// Nearest point only if within `max_distance` (inclusive); otherwise
  /// distance stays infinite.
  Neighbor nearest_within(std::span<const Scalar> query, double max_distance) const;

  /// All points with distance <= radius, sorted by index.
  std::vector<std::size_t> radius_search(std::span<const Scalar> query, double radius) const;

  /// Same as radius_search, with distances, sorted by index.
  std::vector<Neighbor> radius_neighbors(std::span<const Scalar> query, double radius) const;

 private:
  struct Node {
    std::uint32_t begin = 0, end = 0;  // range in order_ for leaves
    std::int32_t left = -1, right = -1;
    std::uint32_t axis = 0;
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  double sq_dist(std::span<const Scalar> q, std::size_t row) const;
  void search_nearest(std::int32_t node, std::span<const Scalar> q, double& best_sq,
                      std::size_t& best_idx) const;
  void search_radius(std::int32_t node, std::span<const Scalar> q, double r_sq,
                     std::vector<Neighbor>& out) const;

  std::vector<Scalar> data_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::size_t dim_ = 0;
  std::size_t count_ = 0;
  std::int32_t root_ = -1;
};

extern template class KdTree<double>;
extern template class KdTree<float>;

/// 3D convenience wrapper over a point cloud.
class PointIndex {
 public:
  PointIndex() = default;
  explicit PointIndex(const Points& points);

  std::size_t size() const { return tree_.size(); }
  Neighbor nearest(const Point3& q) const { return tree_.nearest(span(q)); }
  Neighbor nearest_within(const Point3& q, double max_distance) const {
    return tree_.nearest_within(span(q), max_distance);
  }
  std::vector<std::size_t> radius_search(const Point3& q, double r) const {
    return tree_.radius_search(span(q), r);
  }
  std::vector<Neighbor> radius_neighbors(const Point3& q, double r) const {
    return tree_.radius_neighbors(span(q), r);
  }

 private:
  static std::span<const double> span(const Point3& q) { return {q.data(), 3}; }
  KdTree<double> tree_;
};

}  // namespace changeret
