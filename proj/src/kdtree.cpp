#include "changeret/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace changeret {

namespace {
constexpr std::uint32_t kLeafSize = 8;
}

template <typename Scalar>
KdTree<Scalar>::KdTree(std::span<const Scalar> data, std::size_t dim)
    : data_(data.begin(), data.end()), dim_(dim), count_(dim == 0 ? 0 : data.size() / dim) {
  order_.resize(count_);
  std::iota(order_.begin(), order_.end(), 0u);
  if (count_ > 0) {
    nodes_.reserve(2 * count_ / kLeafSize + 1);
    root_ = build(0, static_cast<std::uint32_t>(count_));
  }
}

template <typename Scalar>
std::int32_t KdTree<Scalar>::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) return id;

  // split on the axis of largest spread
  std::size_t best_axis = 0;
  double best_spread = -1.0;
  for (std::size_t a = 0; a < dim_; ++a) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::uint32_t i = begin; i < end; ++i) {
      const double v = static_cast<double>(data_[order_[i] * dim_ + a]);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      best_axis = a;
    }
  }
  if (best_spread <= 0.0) return id;  // all points identical: keep as leaf

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return data_[a * dim_ + best_axis] < data_[b * dim_ + best_axis];
                   });
  const double split = static_cast<double>(data_[order_[mid] * dim_ + best_axis]);
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  nodes_[id].axis = static_cast<std::uint32_t>(best_axis);
  nodes_[id].split = split;
  return id;
}

template <typename Scalar>
double KdTree<Scalar>::sq_dist(std::span<const Scalar> q, std::size_t row) const {
  const Scalar* p = data_.data() + row * dim_;
  double s = 0.0;
  for (std::size_t a = 0; a < dim_; ++a) {
    const double d = static_cast<double>(q[a]) - static_cast<double>(p[a]);
    s += d * d;
  }
  return s;
}

template <typename Scalar>
void KdTree<Scalar>::search_nearest(std::int32_t node_id, std::span<const Scalar> q,
                                    double& best_sq, std::size_t& best_idx) const {
  const Node& node = nodes_[node_id];
  if (node.left < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::size_t idx = order_[i];
      const double d = sq_dist(q, idx);
      if (d < best_sq || (d == best_sq && idx < best_idx)) {
        best_sq = d;
        best_idx = idx;
      }
    }
    return;
  }
  const double diff = static_cast<double>(q[node.axis]) - node.split;
  const std::int32_t near = diff < 0.0 ? node.left : node.right;
  const std::int32_t far = diff < 0.0 ? node.right : node.left;
  search_nearest(near, q, best_sq, best_idx);
  // inclusive so that equidistant points with a lower index are still found
  if (diff * diff <= best_sq) search_nearest(far, q, best_sq, best_idx);
}

template <typename Scalar>
Neighbor KdTree<Scalar>::nearest(std::span<const Scalar> query) const {
  return nearest_within(query, std::numeric_limits<double>::infinity());
}

template <typename Scalar>
Neighbor KdTree<Scalar>::nearest_within(std::span<const Scalar> query, double max_distance) const {
  Neighbor result;
  if (root_ < 0) return result;
  double best_sq = max_distance * max_distance;
  std::size_t best_idx = std::numeric_limits<std::size_t>::max();
  search_nearest(root_, query, best_sq, best_idx);
  if (best_idx != std::numeric_limits<std::size_t>::max()) {
    result.index = best_idx;
    result.distance = std::sqrt(best_sq);
  }
  return result;
}

template <typename Scalar>
void KdTree<Scalar>::search_radius(std::int32_t node_id, std::span<const Scalar> q, double r_sq,
                                   std::vector<Neighbor>& out) const {
  const Node& node = nodes_[node_id];
  if (node.left < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const double d = sq_dist(q, order_[i]);
      if (d <= r_sq) out.push_back({order_[i], d});
    }
    return;
  }
  const double diff = static_cast<double>(q[node.axis]) - node.split;
  const std::int32_t near = diff < 0.0 ? node.left : node.right;
  const std::int32_t far = diff < 0.0 ? node.right : node.left;
  search_radius(near, q, r_sq, out);
  if (diff * diff <= r_sq) search_radius(far, q, r_sq, out);
}

template <typename Scalar>
std::vector<Neighbor> KdTree<Scalar>::radius_neighbors(std::span<const Scalar> query,
                                                       double radius) const {
  std::vector<Neighbor> out;
  if (root_ < 0) return out;
  search_radius(root_, query, radius * radius, out);
  std::sort(out.begin(), out.end(),
            [](const Neighbor& a, const Neighbor& b) { return a.index < b.index; });
  for (auto& n : out) n.distance = std::sqrt(n.distance);
  return out;
}

template <typename Scalar>
std::vector<std::size_t> KdTree<Scalar>::radius_search(std::span<const Scalar> query,
                                                       double radius) const {
  const auto neighbors = radius_neighbors(query, radius);
  std::vector<std::size_t> out;
  out.reserve(neighbors.size());
  for (const auto& n : neighbors) out.push_back(n.index);
  return out;
}

template class KdTree<double>;
template class KdTree<float>;

PointIndex::PointIndex(const Points& points) {
  std::vector<double> flat;
  flat.reserve(points.size() * 3);
  for (const auto& p : points) flat.insert(flat.end(), {p.x(), p.y(), p.z()});
  tree_ = KdTree<double>(flat, 3);
}

}  // namespace changeret
