#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "changeret/change.hpp"
#include "changeret/cloud.hpp"
#include "changeret/retrieval.hpp"

namespace changeret {

/// Horizontal change box; z is unbounded.
struct Box2 {
  double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;

  bool contains(const Point3& p) const {
    return p.x() >= xmin && p.x() <= xmax && p.y() >= ymin && p.y() <= ymax;
  }
  static Box2 of(const AxisAlignedBox& box) {
    return {box.min_corner.x(), box.min_corner.y(), box.max_corner.x(), box.max_corner.y()};
  }
};

struct QueryTruth {
  std::uint32_t id = 0;
  std::uint32_t gt_ref_id = 0;
  std::vector<Box2> boxes;
};

struct GroundTruth {
  std::map<std::uint32_t, QueryTruth> queries;

  const QueryTruth& at(std::uint32_t query_id) const;
  void validate() const;
};

/// Mean over queries of rank(gt) / db_size, ranks starting at 1.
double anr(const std::vector<Ranking>& rankings, const std::vector<std::uint32_t>& gt_ids,
           std::size_t db_size);

/// Rank (1-based) of `id` in `ranking`; throws Error(kMismatch) if absent.
std::size_t rank_of(const Ranking& ranking, std::uint32_t id);

/// Fraction of reports whose top-X keypoints include one inside a
/// ground-truth box (boundary inclusive, z ignored).
double top_x_accuracy(const std::vector<ChangeReport>& reports, const GroundTruth& gt, std::size_t x);

/// Whether one report succeeds at depth `x`.
bool top_x_hit(const ChangeReport& report, const QueryTruth& truth, std::size_t x);

void write_ground_truth(const GroundTruth& gt, const std::filesystem::path& path);
GroundTruth read_ground_truth(const std::filesystem::path& path);

void write_ranking(std::uint32_t query_id, const Ranking& ranking, const std::filesystem::path& path);
std::pair<std::uint32_t, Ranking> read_ranking(const std::filesystem::path& path);

}  // namespace changeret
