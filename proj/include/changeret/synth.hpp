#pragma once

#include <cstdint>
#include <vector>

#include "changeret/cloud.hpp"
#include "changeret/eval.hpp"
#include "changeret/ics.hpp"
#include "changeret/registration.hpp"

namespace changeret {

/// Knobs of the synthetic street-scene generator.
struct SceneParams {
  int n_structures = 8;
  double extent = 20.0;  ///< structures lie in [-extent/2, extent/2]^2
  int points_per_structure = 1500;
  double noise_sigma = 0.0;  ///< Gaussian, per coordinate, query only
  bool insert_object = true;
  double view_yaw_range = 180.0;        ///< degrees, yaw drawn from [-range, range]
  double view_translation_range = 2.0;  ///< meters, x/y drawn from [-range, range]
  double dropout = 0.1;                 ///< fraction of query points removed at random
  int object_points = 400;
  IcsParams ics;  ///< used to express the object box in the query's invariant frame

  void validate() const;
};

struct SynthScene {
  PointCloud reference;
  PointCloud query;
  RigidTransform viewpoint;  ///< reference frame → query frame
  Points object;             ///< inserted points, query frame
  AxisAlignedBox object_box_raw;  ///< horizontal box of the object, query frame
  AxisAlignedBox object_box_ics;  ///< same, after to_ics(query)
  std::uint64_t seed = 0;
};

/**
 * Reference: axis-aligned walls, boxes and vertical cylinders sampled on
 * their surfaces. Query: the reference under a random yaw + translation,
 * with dropout and noise, plus an ellipsoid standing clear of the existing
 * structures when insert_object is set.
 */
SynthScene generate_scene(std::uint64_t seed, const SceneParams& params);

/// Only the reference part of generate_scene (no query, no ICS).
PointCloud generate_reference(std::uint64_t seed, const SceneParams& params);

/// A vehicle driving along a corridor lined with walls, pillars and posts.
struct CorridorParams {
  int n_scans = 11;
  double spacing = 1.0;         ///< meters between consecutive scan poses along x
  double scan_interval = 1.0;   ///< seconds between scans
  double range = 8.0;           ///< sensor range, meters
  double yaw_jitter_deg = 2.0;  ///< true heading drawn from [-jitter, jitter]
  double noise_sigma = 0.0;     ///< Gaussian, per coordinate, per scan
  double keep_ratio = 0.6;      ///< fraction of in-range world points each scan observes
  double point_spacing = 0.05;  ///< world sampling density, meters

  void validate() const;
};

struct CorridorSequence {
  ScanSequence sequence;              ///< scans in sensor frames, odometry = true poses
  std::vector<RigidTransform> truth;  ///< sensor → world
  Points world;                       ///< every world point, world frame
};

CorridorSequence generate_corridor(std::uint64_t seed, const CorridorParams& params = {});

}  // namespace changeret
