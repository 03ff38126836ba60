#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "changeret/cloud.hpp"
#include "changeret/kdtree.hpp"

namespace changeret {

inline constexpr std::size_t kFpfhBins = 11;
inline constexpr std::size_t kFpfhDim = 3 * kFpfhBins;

/// Owning descriptor vector. Values are 32-bit, matching the exchange files.
using Descriptor = std::vector<float>;

enum class DescriptorSource : std::uint8_t { kFpfh, kExternal };

/// Row-major block of equal-length descriptors with their keypoints.
struct DescriptorSet {
  std::size_t dim = 0;
  std::vector<float> values;          ///< size() * dim entries
  Points keypoints;
  std::vector<std::uint8_t> degenerate;  ///< 1 where a zero descriptor was emitted
  DescriptorSource source = DescriptorSource::kFpfh;

  std::size_t size() const { return keypoints.size(); }
  std::span<const float> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
  std::span<float> row(std::size_t i) { return {values.data() + i * dim, dim}; }
  void validate() const;
};

struct FpfhParams {
  double radius = 1.0;         ///< feature support radius, meters
  double normal_radius = 0.5;  ///< used only when the cloud has no normals
};

/// The three Darboux-frame pair features (alpha, phi, theta) between two
/// oriented points, using the source/target ordering of the standard FPFH.
/// Returns false when the pair is degenerate (coincident points).
bool pair_features(const Point3& p1, const Point3& n1, const Point3& p2, const Point3& n2,
                   std::array<double, 3>& f);

/// Computes FPFH descriptors against one cloud, caching the simplified
/// histograms of every point it touches.
class FpfhEstimator {
 public:
  /// `cloud` must carry normals; it is referenced, not copied.
  FpfhEstimator(const PointCloud& cloud, double radius);

  /// Descriptor at cloud point `index`. Fewer than 2 neighbors within the
  /// radius yields the zero descriptor and sets `degenerate`.
  Descriptor at_index(std::size_t index, bool* degenerate = nullptr);
  /// Descriptor at the cloud point nearest to `keypoint`.
  Descriptor at(const Point3& keypoint, bool* degenerate = nullptr);

  const PointIndex& index() const { return index_; }

 private:
  const std::array<double, kFpfhDim>& spfh(std::size_t i);

  const PointCloud& cloud_;
  double radius_;
  PointIndex index_;
  std::vector<std::array<double, kFpfhDim>> spfh_cache_;
  std::vector<std::uint8_t> spfh_done_;
};

Descriptor fpfh_descriptor(const PointCloud& cloud, const Point3& keypoint, double radius,
                           bool* degenerate = nullptr);

struct ExternalDescriptors {
  std::filesystem::path path;
};
using DescriptorMethod = std::variant<FpfhParams, ExternalDescriptors>;

/// One descriptor per keypoint, order preserved. FPFH estimates normals first
/// when the cloud has none.
DescriptorSet extract_descriptors(const PointCloud& cloud, const Points& keypoints,
                                  const DescriptorMethod& method);

/// DSC1 exchange file: descriptors then keypoints, both 32-bit floats.
void write_dsc1(const DescriptorSet& set, const std::filesystem::path& path);
DescriptorSet read_dsc1(const std::filesystem::path& path);

}  // namespace changeret
