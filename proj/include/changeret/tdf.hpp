#pragma once

#include <cstdint>
#include <vector>

#include "changeret/cloud.hpp"

namespace changeret {

/// Keypoint sampling and local-region voxelization settings.
struct TdfConfig {
  std::size_t n_keypoints = 500;
  double region_size = 9.0;  ///< edge of the cubic interest region, meters
  std::size_t grid_dim = 30;
  double truncation = 0.0;   ///< meters; <= 0 means 3 voxel widths
  std::uint64_t seed = 0;

  double voxel_size() const { return region_size / static_cast<double>(grid_dim); }
  double effective_truncation() const { return truncation > 0.0 ? truncation : 3.0 * voxel_size(); }
  void validate() const;
};

/**
 * @brief Truncated distance function over a cubic grid around `center`.
 *
 * values[(ix * d + iy) * d + iz] for voxel indices along the x, y, z axes of
 * the cloud's frame. Each value is max(0, 1 - dist / truncation).
 */
struct TdfVector {
  std::vector<float> values;
  Point3 center = Point3::Zero();
  std::size_t grid_dim = 0;
  double region_size = 0.0;
  double truncation = 0.0;
  bool empty_region = false;  ///< no cloud point within region + truncation

  std::size_t flat_index(std::size_t ix, std::size_t iy, std::size_t iz) const {
    return (ix * grid_dim + iy) * grid_dim + iz;
  }
  Point3 voxel_center(std::size_t ix, std::size_t iy, std::size_t iz) const;
};

/// Uniform sample without replacement of min(n_keypoints, |cloud|) points,
/// returned in cloud order. Deterministic under cfg.seed.
Points sample_keypoints(const PointCloud& cloud, const TdfConfig& cfg);

/// Same as sample_keypoints but returns the selected cloud indices.
std::vector<std::size_t> sample_keypoint_indices(std::size_t cloud_size, const TdfConfig& cfg);

TdfVector compute_tdf(const PointCloud& cloud, const Point3& center, const TdfConfig& cfg);

}  // namespace changeret
