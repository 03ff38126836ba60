#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <filesystem>
#include <vector>

namespace changeret {

/// 3D point in meters.
using Point3 = Eigen::Vector3d;
using Points = std::vector<Point3>;

/**
 * @brief Ordered list of 3D points with optional per-point normals.
 *
 * When normals are present there is one per point. A normal is either unit
 * length or exactly zero; zero marks a point whose neighborhood was too
 * sparse for normal estimation.
 */
struct PointCloud {
  Points points;
  Points normals;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty() && normals.size() == points.size(); }

  /// Throws Error(kPrecondition) when a point is non-finite or normals are malformed.
  void validate() const;
};

/// True for the zero-normal flag set by estimate_normals on sparse points.
inline bool is_zero_normal(const Point3& n) { return n.x() == 0.0 && n.y() == 0.0 && n.z() == 0.0; }

/// Rotation followed by translation: p' = R p + t.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }
  /// Rotation about +z by `radians`, then translation.
  static RigidTransform from_yaw(double radians, const Eigen::Vector3d& t = Eigen::Vector3d::Zero());

  Point3 apply(const Point3& p) const { return rotation * p + translation; }
  RigidTransform inverse() const;
  /// (*this * other)(p) == this->apply(other.apply(p)).
  RigidTransform operator*(const RigidTransform& other) const;

  /// Orthonormality and det = +1 within `tol` per entry.
  bool is_valid(double tol = 1e-9) const;
  /// Rotation angle of R in radians, in [0, pi].
  double rotation_angle() const;
};

struct AxisAlignedBox {
  Point3 min_corner = Point3::Zero();
  Point3 max_corner = Point3::Zero();

  bool contains(const Point3& p) const {
    return (p.array() >= min_corner.array()).all() && (p.array() <= max_corner.array()).all();
  }
  /// Horizontal containment, boundary inclusive; z ignored.
  bool contains_xy(const Point3& p) const {
    return p.x() >= min_corner.x() && p.x() <= max_corner.x() && p.y() >= min_corner.y() &&
           p.y() <= max_corner.y();
  }
  static AxisAlignedBox bounding(const Points& pts);
};

enum class CloudFormat { kXyzText, kPlyAscii };

/// Picks the format from the file extension (.ply → ply-ascii, otherwise xyz-text).
CloudFormat format_from_path(const std::filesystem::path& path);

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format);
PointCloud load_cloud(const std::filesystem::path& path);
void save_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format);
void save_cloud(const PointCloud& cloud, const std::filesystem::path& path);

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t);

Point3 centroid(const Points& pts);

/// One normal per point from the smallest-eigenvalue eigenvector of the
/// covariance of all points within `radius`. Sign is chosen so z >= 0; when
/// |z| <= sign_tie_tolerance the x component decides, then y. Points with
/// fewer than 3 neighbors (itself included) get the zero normal.
PointCloud estimate_normals(const PointCloud& cloud, double radius,
                            double sign_tie_tolerance = 0.05);

/// Keeps the first point falling into each `voxel`-sized cell, preserving order.
PointCloud voxel_deduplicate(const PointCloud& cloud, double voxel);

}  // namespace changeret
