#pragma once

#include "changeret/cloud.hpp"
#include "changeret/registration.hpp"

namespace changeret {

/**
 * @brief Settings for the horizontal-axis search.
 *
 * The yaw is searched on an absolute lattice: a coarse sweep over [0, 90)
 * at `resolution_deg`, then a sweep at resolution_deg / refine_factor over
 * one coarse step either side of each of the `refine_candidates` lowest
 * coarse samples.
 */
struct IcsParams {
  double resolution_deg = 1.0;
  int refine_factor = 20;
  int refine_candidates = 8;
  double bin_width = 0.5;  ///< meters
  /// Sweeps whose (max - min) / max entropy falls below this are flagged low-contrast.
  double low_contrast_ratio = 0.01;

  void validate() const;
};

struct YawEstimate {
  double yaw_deg = 0.0;     ///< orientation of the cloud's x axis, in [0, 360)
  double entropy = 0.0;     ///< nats, at the optimum
  bool low_contrast = false;  ///< sweep could not discriminate orientations
};

/// Map frame → invariant frame: p' = Rz(-yaw) (p - centroid).
struct IcsAlignment {
  RigidTransform transform;
  double yaw_deg = 0.0;
  double entropy = 0.0;
  bool low_contrast = false;
};

/// Translation that moves the centroid to the origin (−mean).
Eigen::Vector3d cog_origin(const PointCloud& cloud);

/**
 * Entropy (nats) of the x and y projections of `centered` after rotating by
 * -yaw_deg about z. Projections are binned on a lattice anchored at the
 * origin with linear weight sharing between the two nearest bin centres, so
 * the objective is continuous in yaw and exactly 90-degree periodic.
 */
double yaw_entropy(const Points& centered, double yaw_deg, double bin_width);

/// Entropy-minimizing horizontal orientation of the cloud about its
/// centroid; quadrant chosen so the third central moments of x and y are
/// both non-negative. Throws Error(kDegenerate) if the cloud has no
/// horizontal extent.
YawEstimate entropy_yaw(const PointCloud& cloud, const IcsParams& params = {});

struct IcsResult {
  IcsAlignment alignment;
  PointCloud cloud;  ///< input expressed in the invariant frame
};

IcsResult to_ics(const PointCloud& cloud, const IcsParams& params = {});
IcsResult to_ics(const LocalMap& map, const IcsParams& params = {});

}  // namespace changeret
