#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "changeret/cloud.hpp"
#include "changeret/tdf.hpp"

namespace changeret {

struct IcpParams {
  int max_iters = 50;
  double max_corr_dist = 1.0;  ///< meters
  double tol = 1e-6;           ///< meters, on the change of the truncated RMSE
};

/// Registration of consecutive scans, which overlap only in part: with a
/// wide gate the strip a new scan sees for the first time drags it backward.
inline constexpr IcpParams kScanIcp{50, 0.2, 1e-6};

struct IcpResult {
  RigidTransform transform;  ///< maps source into the target frame
  double rmse = 0.0;         ///< RMSE over inlier correspondences of the final transform
  double fitness = 0.0;      ///< inlier fraction of source points
  bool converged = false;
  int iterations = 0;
  /// Truncated RMSE sqrt(mean(min(d^2, max_corr_dist^2))) over all source
  /// points, one entry per evaluated transform starting with `init`.
  /// Non-increasing by construction.
  std::vector<double> cost_history;
};

/// Closed-form least-squares rigid fit (SVD) mapping src[i] onto dst[i].
RigidTransform fit_rigid(const Points& src, const Points& dst);

/// Point-to-point ICP. Throws Error(kDegenerate) when fewer than 3
/// correspondences are available or an input has < 3 non-collinear points.
IcpResult icp_align(const PointCloud& source, const PointCloud& target,
                    const RigidTransform& init = RigidTransform::identity(),
                    const IcpParams& params = {});

struct ScanSequence {
  std::vector<PointCloud> scans;
  std::vector<RigidTransform> odometry;  ///< pose of each scan in the sequence frame
  std::vector<double> timestamps;        ///< seconds, strictly increasing

  void validate() const;
};

struct LocalMap {
  PointCloud cloud;  ///< fused in the frame of the segment's first scan
  double travel_distance = 0.0;
  std::size_t first_scan = 0;
  std::size_t last_scan = 0;
};

struct LocalMapParams {
  double segment_length = 5.0;
  double dedup_voxel = 0.05;
  IcpParams icp = kScanIcp;
};

/**
 * Consecutive segments of scans, each closed once its odometric travel
 * (measured from the previous segment's last pose) reaches segment_length.
 * An incomplete tail is kept when its travel is at least half a segment, or
 * when it is the only segment.
 */
std::vector<std::pair<std::size_t, std::size_t>> partition_segments(const ScanSequence& seq,
                                                                    double segment_length);

std::vector<LocalMap> build_local_map(const ScanSequence& seq, const LocalMapParams& params = {});

enum class PairLabel : std::uint8_t { kNegative = 0, kPositive = 1 };

struct TrainingPair {
  TdfVector a;
  TdfVector b;
  PairLabel label = PairLabel::kNegative;
  double sample_time = 0.0;
};

struct PairMiningParams {
  double dt = 3.0;              ///< seconds between paired scans
  std::size_t n_pairs = 100;    ///< half positive, half negative
  double crop_size = 0.0;       ///< cube edge for cropping, <= 0 means tdf.region_size
  double overlap_dist = 0.1;    ///< interest point must have a partner within this distance
  double max_rmse = 0.2;        ///< ICP rmse above this skips the candidate
  std::uint64_t seed = 0;
  TdfConfig tdf;
  IcpParams icp = kScanIcp;

  double effective_crop() const { return crop_size > 0.0 ? crop_size : tdf.region_size; }
};

std::vector<TrainingPair> mine_training_pairs(const ScanSequence& seq, const PairMiningParams& params);

/// TPR1 training-pair file. Throws Error(kMismatch) if pair grids differ.
void write_pairs(const std::vector<TrainingPair>& pairs, const std::filesystem::path& path);

struct PairFile {
  std::uint32_t grid_dim = 0;
  std::vector<PairLabel> labels;
  std::vector<std::vector<float>> a, b;
};
PairFile read_pairs(const std::filesystem::path& path);

/// Sidecar JSON describing how a pair file was mined (`<path>.json`).
void write_pair_metadata(const PairMiningParams& params, const std::filesystem::path& pair_path);

}  // namespace changeret
