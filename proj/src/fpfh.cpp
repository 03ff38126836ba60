#include "changeret/fpfh.hpp"

#include <cmath>
#include <fstream>

#include "changeret/atomic_file.hpp"
#include "changeret/binary_io.hpp"
#include "changeret/error.hpp"

namespace changeret {

void DescriptorSet::validate() const {
  if (values.size() != keypoints.size() * dim) {
    throw Error(Errc::kMismatch, "descriptor block size does not match keypoint count");
  }
  for (float v : values) {
    if (!std::isfinite(v)) throw Error(Errc::kPrecondition, "non-finite descriptor value");
  }
}

bool pair_features(const Point3& p1, const Point3& n1, const Point3& p2, const Point3& n2,
                   std::array<double, 3>& f) {
  Point3 dp = p2 - p1;
  const double dist = dp.norm();
  if (dist == 0.0) return false;
  Point3 u = n1;
  Point3 n_other = n2;
  const double angle1 = n1.dot(dp) / dist;
  const double angle2 = n2.dot(dp) / dist;
  // the point whose normal makes the smaller angle with the line is the source
  if (std::abs(angle1) < std::abs(angle2)) {
    u = n2;
    n_other = n1;
    dp = -dp;
    f[2] = -angle2;
  } else {
    f[2] = angle1;
  }
  Point3 v = dp.cross(u);
  const double v_norm = v.norm();
  if (v_norm < 1e-12 * dist) {
    // line parallel to the source normal: frame undefined, clamp to the centre of the range
    f[0] = 0.0;
    f[1] = 0.0;
    return true;
  }
  v /= v_norm;
  const Point3 w = u.cross(v);
  f[1] = v.dot(n_other);
  f[0] = std::atan2(w.dot(n_other), u.dot(n_other));
  return true;
}

namespace {

std::size_t bin_of(double value, double lo, double hi) {
  const double t = std::floor(static_cast<double>(kFpfhBins) * (value - lo) / (hi - lo));
  if (!(t > 0.0)) return 0;
  return std::min(static_cast<std::size_t>(t), kFpfhBins - 1);
}

void normalize_blocks(std::array<double, kFpfhDim>& h) {
  for (std::size_t b = 0; b < 3; ++b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < kFpfhBins; ++i) sum += h[b * kFpfhBins + i];
    if (sum <= 0.0) continue;
    for (std::size_t i = 0; i < kFpfhBins; ++i) h[b * kFpfhBins + i] /= sum;
  }
}

}  // namespace

FpfhEstimator::FpfhEstimator(const PointCloud& cloud, double radius)
    : cloud_(cloud), radius_(radius), index_(cloud.points) {
  if (!cloud.has_normals()) throw Error(Errc::kPrecondition, "FPFH requires a cloud with normals");
  if (!(radius > 0.0)) throw Error(Errc::kPrecondition, "FPFH radius must be positive");
  spfh_cache_.resize(cloud.size());
  spfh_done_.assign(cloud.size(), 0);
}

const std::array<double, kFpfhDim>& FpfhEstimator::spfh(std::size_t i) {
  auto& h = spfh_cache_[i];
  if (spfh_done_[i]) return h;
  spfh_done_[i] = 1;
  h.fill(0.0);
  const Point3& p = cloud_.points[i];
  const Point3& n = cloud_.normals[i];
  if (is_zero_normal(n)) return h;
  std::array<double, 3> f{};
  for (const auto& nb : index_.radius_neighbors(p, radius_)) {
    if (nb.index == i || nb.distance == 0.0) continue;
    const Point3& nq = cloud_.normals[nb.index];
    if (is_zero_normal(nq)) continue;
    if (!pair_features(p, n, cloud_.points[nb.index], nq, f)) continue;
    h[bin_of(f[0], -M_PI, M_PI)] += 1.0;
    h[kFpfhBins + bin_of(f[1], -1.0, 1.0)] += 1.0;
    h[2 * kFpfhBins + bin_of(f[2], -1.0, 1.0)] += 1.0;
  }
  normalize_blocks(h);
  return h;
}

Descriptor FpfhEstimator::at_index(std::size_t index, bool* degenerate) {
  Descriptor out(kFpfhDim, 0.0f);
  if (degenerate) *degenerate = true;
  const Point3& p = cloud_.points[index];
  if (is_zero_normal(cloud_.normals[index])) return out;

  std::vector<Neighbor> nbrs;
  for (const auto& nb : index_.radius_neighbors(p, radius_)) {
    if (nb.index == index || nb.distance == 0.0) continue;
    if (is_zero_normal(cloud_.normals[nb.index])) continue;
    nbrs.push_back(nb);
  }
  if (nbrs.size() < 2) return out;

  std::array<double, kFpfhDim> h = spfh(index);
  std::array<double, kFpfhDim> acc{};
  for (const auto& nb : nbrs) {
    const auto& s = spfh(nb.index);
    const double w = 1.0 / nb.distance;
    for (std::size_t b = 0; b < kFpfhDim; ++b) acc[b] += w * s[b];
  }
  const double inv_k = 1.0 / static_cast<double>(nbrs.size());
  for (std::size_t b = 0; b < kFpfhDim; ++b) h[b] += inv_k * acc[b];
  normalize_blocks(h);
  for (std::size_t b = 0; b < kFpfhDim; ++b) out[b] = static_cast<float>(h[b]);
  if (degenerate) *degenerate = false;
  return out;
}

Descriptor FpfhEstimator::at(const Point3& keypoint, bool* degenerate) {
  return at_index(index_.nearest(keypoint).index, degenerate);
}

Descriptor fpfh_descriptor(const PointCloud& cloud, const Point3& keypoint, double radius,
                           bool* degenerate) {
  FpfhEstimator est(cloud, radius);
  return est.at(keypoint, degenerate);
}

DescriptorSet extract_descriptors(const PointCloud& cloud, const Points& keypoints,
                                  const DescriptorMethod& method) {
  DescriptorSet set;
  set.keypoints = keypoints;
  if (const auto* fp = std::get_if<FpfhParams>(&method)) {
    if (cloud.empty()) throw Error(Errc::kEmptyCloud, "cannot describe an empty cloud");
    const PointCloud with_normals =
        cloud.has_normals() ? cloud : estimate_normals(cloud, fp->normal_radius);
    FpfhEstimator est(with_normals, fp->radius);
    set.dim = kFpfhDim;
    set.source = DescriptorSource::kFpfh;
    set.values.reserve(keypoints.size() * kFpfhDim);
    for (const auto& kp : keypoints) {
      bool degenerate = false;
      const Descriptor d = est.at(kp, &degenerate);
      set.values.insert(set.values.end(), d.begin(), d.end());
      set.degenerate.push_back(degenerate ? 1 : 0);
    }
    return set;
  }
  const auto& ext = std::get<ExternalDescriptors>(method);
  DescriptorSet file = read_dsc1(ext.path);
  if (file.size() != keypoints.size()) {
    throw Error(Errc::kMismatch, ext.path.string() + ": descriptor count " +
                                     std::to_string(file.size()) + " != keypoint count " +
                                     std::to_string(keypoints.size()));
  }
  set.dim = file.dim;
  set.values = std::move(file.values);
  set.degenerate.assign(keypoints.size(), 0);
  set.source = DescriptorSource::kExternal;
  return set;
}

void write_dsc1(const DescriptorSet& set, const std::filesystem::path& path) {
  set.validate();
  write_atomically(path, std::ios::binary, [&](std::ostream& os) {
    binio::write_magic(os, "DSC1");
    binio::write_u32(os, static_cast<std::uint32_t>(set.size()));
    binio::write_u32(os, static_cast<std::uint32_t>(set.dim));
    for (float v : set.values) binio::write_f32(os, v);
    for (const auto& k : set.keypoints) {
      for (int a = 0; a < 3; ++a) binio::write_f32(os, static_cast<float>(k[a]));
    }
  });
}

DescriptorSet read_dsc1(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::kIo, "cannot open " + path.string());
  const std::string what = path.string();
  binio::read_magic(is, "DSC1", what);
  DescriptorSet set;
  const std::uint32_t n = binio::read_u32(is, what);
  set.dim = binio::read_u32(is, what);
  if (set.dim == 0) throw Error(Errc::kParse, what + ": zero descriptor dimension");
  set.values.resize(static_cast<std::size_t>(n) * set.dim);
  for (auto& v : set.values) v = binio::read_f32(is, what);
  set.keypoints.resize(n);
  for (auto& k : set.keypoints) {
    for (int a = 0; a < 3; ++a) k[a] = binio::read_f32(is, what);
  }
  binio::expect_eof(is, what);
  set.degenerate.assign(n, 0);
  set.source = DescriptorSource::kExternal;
  set.validate();
  return set;
}

}  // namespace changeret
