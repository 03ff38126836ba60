#include "changeret/tdf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "changeret/error.hpp"
#include "changeret/kdtree.hpp"
#include "changeret/rng.hpp"

namespace changeret {

void TdfConfig::validate() const {
  if (grid_dim < 2) throw Error(Errc::kConfig, "tdf grid_dim must be >= 2");
  if (!(region_size > 0.0)) throw Error(Errc::kConfig, "tdf region_size must be > 0");
  if (!(effective_truncation() > 0.0)) throw Error(Errc::kConfig, "tdf truncation must be > 0");
}

Point3 TdfVector::voxel_center(std::size_t ix, std::size_t iy, std::size_t iz) const {
  const double v = region_size / static_cast<double>(grid_dim);
  const double h = region_size / 2.0;
  return center + Point3(-h + (static_cast<double>(ix) + 0.5) * v,
                         -h + (static_cast<double>(iy) + 0.5) * v,
                         -h + (static_cast<double>(iz) + 0.5) * v);
}

std::vector<std::size_t> sample_keypoint_indices(std::size_t cloud_size, const TdfConfig& cfg) {
  std::vector<std::size_t> idx(cloud_size);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const std::size_t n = std::min(cfg.n_keypoints, cloud_size);
  Rng rng(cfg.seed);
  // partial Fisher-Yates
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(cloud_size - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Points sample_keypoints(const PointCloud& cloud, const TdfConfig& cfg) {
  if (cloud.empty()) throw Error(Errc::kEmptyCloud, "cannot sample keypoints from an empty cloud");
  Points out;
  for (auto i : sample_keypoint_indices(cloud.size(), cfg)) out.push_back(cloud.points[i]);
  return out;
}

TdfVector compute_tdf(const PointCloud& cloud, const Point3& center, const TdfConfig& cfg) {
  cfg.validate();
  TdfVector tdf;
  tdf.center = center;
  tdf.grid_dim = cfg.grid_dim;
  tdf.region_size = cfg.region_size;
  tdf.truncation = cfg.effective_truncation();
  const std::size_t d = cfg.grid_dim;
  tdf.values.assign(d * d * d, 0.0f);

  // only points within region + truncation can influence any voxel
  const double reach = cfg.region_size / 2.0 + tdf.truncation;
  Points local;
  for (const auto& p : cloud.points) {
    if (((p - center).array().abs() <= reach).all()) local.push_back(p);
  }
  if (local.empty()) {
    tdf.empty_region = true;
    return tdf;
  }
  const PointIndex index(local);
  for (std::size_t ix = 0; ix < d; ++ix) {
    for (std::size_t iy = 0; iy < d; ++iy) {
      for (std::size_t iz = 0; iz < d; ++iz) {
        const Neighbor nn = index.nearest_within(tdf.voxel_center(ix, iy, iz), tdf.truncation);
        if (!std::isfinite(nn.distance)) continue;
        const double v = std::max(0.0, 1.0 - nn.distance / tdf.truncation);
        tdf.values[tdf.flat_index(ix, iy, iz)] = static_cast<float>(v);
      }
    }
  }
  return tdf;
}

}  // namespace changeret
