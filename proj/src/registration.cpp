#include "changeret/registration.hpp"

#include <Eigen/SVD>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "changeret/atomic_file.hpp"
#include "changeret/binary_io.hpp"
#include "changeret/error.hpp"
#include "changeret/kdtree.hpp"
#include "changeret/rng.hpp"
#include "json.hpp"

namespace changeret {

namespace {

bool has_three_noncollinear(const Points& pts) {
  if (pts.size() < 3) return false;
  const Point3 c = centroid(pts);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) cov += (p - c) * (p - c).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  const auto ev = solver.eigenvalues();  // ascending
  return ev(2) > 0.0 && ev(1) > 1e-12 * ev(2);
}

struct Correspondences {
  Points src;  // source points already moved by the current transform
  Points dst;
  double truncated_sq_sum = 0.0;
  double inlier_sq_sum = 0.0;
};

Correspondences match(const Points& source, const RigidTransform& t, const Points& target,
                      const PointIndex& index, double max_dist) {
  Correspondences c;
  const double cap = max_dist * max_dist;
  for (const auto& s : source) {
    const Point3 moved = t.apply(s);
    const Neighbor nn = index.nearest_within(moved, max_dist);
    if (std::isfinite(nn.distance)) {
      const double d2 = nn.distance * nn.distance;
      c.src.push_back(moved);
      c.dst.push_back(target[nn.index]);
      c.truncated_sq_sum += std::min(d2, cap);
      c.inlier_sq_sum += d2;
    } else {
      c.truncated_sq_sum += cap;
    }
  }
  return c;
}

}  // namespace

RigidTransform fit_rigid(const Points& src, const Points& dst) {
  if (src.size() != dst.size() || src.size() < 3) {
    throw Error(Errc::kDegenerate, "rigid fit needs >= 3 correspondences");
  }
  const Point3 cs = centroid(src);
  const Point3 cd = centroid(dst);
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) h += (src[i] - cs) * (dst[i] - cd).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  RigidTransform out;
  out.rotation = svd.matrixV() * d * svd.matrixU().transpose();
  out.translation = cd - out.rotation * cs;
  return out;
}

IcpResult icp_align(const PointCloud& source, const PointCloud& target, const RigidTransform& init,
                    const IcpParams& params) {
  if (!(params.max_corr_dist > 0.0)) {
    throw Error(Errc::kPrecondition, "icp max_corr_dist must be positive");
  }
  if (!has_three_noncollinear(source.points) || !has_three_noncollinear(target.points)) {
    throw Error(Errc::kDegenerate, "icp needs >= 3 non-collinear points in both clouds");
  }
  const PointIndex index(target.points);
  const double n = static_cast<double>(source.size());

  IcpResult result;
  result.transform = init;
  Correspondences corr = match(source.points, init, target.points, index, params.max_corr_dist);
  double cost = std::sqrt(corr.truncated_sq_sum / n);
  result.cost_history.push_back(cost);

  for (int it = 0; it < params.max_iters; ++it) {
    if (corr.src.size() < 3) {
      throw Error(Errc::kDegenerate, "icp found fewer than 3 correspondences");
    }
    const RigidTransform step = fit_rigid(corr.src, corr.dst);
    const RigidTransform next = step * result.transform;
    Correspondences next_corr = match(source.points, next, target.points, index, params.max_corr_dist);
    const double next_cost = std::sqrt(next_corr.truncated_sq_sum / n);
    result.iterations = it + 1;
    if (next_cost > cost) {
      // only rounding can raise the truncated cost; keep the previous transform
      result.converged = next_cost - cost < params.tol;
      break;
    }
    result.transform = next;
    corr = std::move(next_corr);
    result.cost_history.push_back(next_cost);
    const double change = cost - next_cost;
    cost = next_cost;
    if (change < params.tol) {
      result.converged = true;
      break;
    }
  }
  if (corr.src.size() < 3) throw Error(Errc::kDegenerate, "icp found fewer than 3 correspondences");
  result.rmse = std::sqrt(corr.inlier_sq_sum / static_cast<double>(corr.src.size()));
  result.fitness = static_cast<double>(corr.src.size()) / n;
  return result;
}

void ScanSequence::validate() const {
  if (scans.empty()) throw Error(Errc::kPrecondition, "scan sequence is empty");
  if (odometry.size() != scans.size() || timestamps.size() != scans.size()) {
    throw Error(Errc::kPrecondition, "scans, odometry and timestamps differ in length");
  }
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (!(timestamps[i] > timestamps[i - 1])) {
      throw Error(Errc::kPrecondition, "timestamps must be strictly increasing");
    }
  }
  for (const auto& s : scans) {
    if (s.empty()) throw Error(Errc::kEmptyCloud, "scan sequence contains an empty scan");
  }
}

std::vector<std::pair<std::size_t, std::size_t>> partition_segments(const ScanSequence& seq,
                                                                    double segment_length) {
  if (!(segment_length > 0.0)) throw Error(Errc::kPrecondition, "segment length must be positive");
  std::vector<std::pair<std::size_t, std::size_t>> segments;
  const std::size_t n = seq.odometry.size();
  std::size_t start = 0;
  double travel = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    travel += (seq.odometry[i].translation - seq.odometry[i - 1].translation).norm();
    if (travel >= segment_length - 1e-9) {
      segments.emplace_back(start, i);
      start = i + 1;
      travel = 0.0;
    }
  }
  if (start < n && (segments.empty() || travel >= segment_length / 2.0 - 1e-9)) {
    segments.emplace_back(start, n - 1);
  }
  return segments;
}

std::vector<LocalMap> build_local_map(const ScanSequence& seq, const LocalMapParams& params) {
  seq.validate();
  std::vector<LocalMap> maps;
  for (const auto& [first, last] : partition_segments(seq, params.segment_length)) {
    LocalMap map;
    map.first_scan = first;
    map.last_scan = last;
    const std::size_t anchor = first == 0 ? 0 : first - 1;
    for (std::size_t i = anchor + 1; i <= last; ++i) {
      map.travel_distance +=
          (seq.odometry[i].translation - seq.odometry[i - 1].translation).norm();
    }
    const RigidTransform base_inv = seq.odometry[first].inverse();
    PointCloud fused = voxel_deduplicate(seq.scans[first], params.dedup_voxel);
    for (std::size_t i = first + 1; i <= last; ++i) {
      const RigidTransform init = base_inv * seq.odometry[i];
      const IcpResult icp = icp_align(seq.scans[i], fused, init, params.icp);
      PointCloud placed = apply_transform(seq.scans[i], icp.transform);
      fused.points.insert(fused.points.end(), placed.points.begin(), placed.points.end());
      if (fused.has_normals() || placed.has_normals()) {
        fused.normals.clear();  // mixed sources; normals are re-estimated downstream
      }
      fused = voxel_deduplicate(fused, params.dedup_voxel);
    }
    map.cloud = std::move(fused);
    maps.push_back(std::move(map));
  }
  return maps;
}

namespace {

PointCloud crop_cube(const PointCloud& cloud, const Point3& center, double edge) {
  PointCloud out;
  const double h = edge / 2.0;
  for (const auto& p : cloud.points) {
    if (((p - center).array().abs() <= h).all()) out.points.push_back(p);
  }
  return out;
}

}  // namespace

std::vector<TrainingPair> mine_training_pairs(const ScanSequence& seq, const PairMiningParams& params) {
  seq.validate();
  params.tdf.validate();
  if (!(params.dt > 0.0)) throw Error(Errc::kPrecondition, "pair dt must be positive");
  if (seq.timestamps.back() - seq.timestamps.front() < params.dt) {
    throw Error(Errc::kPrecondition, "sequence is shorter than dt");
  }
  const std::size_t n = seq.scans.size();
  // partner of scan i: first scan at or after t_i + dt
  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = std::lower_bound(seq.timestamps.begin() + static_cast<std::ptrdiff_t>(i),
                                     seq.timestamps.end(), seq.timestamps[i] + params.dt);
    if (it != seq.timestamps.end()) {
      candidates.emplace_back(i, static_cast<std::size_t>(it - seq.timestamps.begin()));
    }
  }

  const std::size_t n_each = params.n_pairs / 2;
  const double crop = params.effective_crop();
  const double far_apart = 2.0 * params.tdf.region_size;
  Rng rng(params.seed);

  struct Aligned {
    bool tried = false;
    bool ok = false;
    PointCloud partner;  // scan j in scan i's frame
    PointIndex index;
  };
  std::map<std::size_t, Aligned> aligned;

  std::vector<TrainingPair> pairs;
  std::size_t produced = 0;
  const std::size_t max_attempts = 20 * std::max<std::size_t>(n_each, 1);
  for (std::size_t attempt = 0; attempt < max_attempts && produced < n_each; ++attempt) {
    const auto [i, j] = candidates[rng.below(candidates.size())];
    auto& al = aligned[i];
    if (!al.tried) {
      al.tried = true;
      const RigidTransform init = seq.odometry[i].inverse() * seq.odometry[j];
      try {
        const IcpResult icp = icp_align(seq.scans[j], seq.scans[i], init, params.icp);
        if (icp.rmse <= params.max_rmse) {
          al.partner = apply_transform(seq.scans[j], icp.transform);
          al.index = PointIndex(al.partner.points);
          al.ok = true;
        }
      } catch (const Error&) {
        // degenerate alignment: candidate skipped
      }
    }
    if (!al.ok) continue;

    const PointCloud& scan_a = seq.scans[i];
    std::optional<Point3> interest;
    for (int k = 0; k < 32 && !interest; ++k) {
      const Point3& p = scan_a.points[rng.below(scan_a.size())];
      if (std::isfinite(al.index.nearest_within(p, params.overlap_dist).distance)) interest = p;
    }
    if (!interest) continue;
    const Point3 p = *interest;

    TrainingPair pos;
    pos.a = compute_tdf(crop_cube(scan_a, p, crop), p, params.tdf);
    pos.b = compute_tdf(crop_cube(al.partner, p, crop), p, params.tdf);
    pos.label = PairLabel::kPositive;
    pos.sample_time = seq.timestamps[i];

    TrainingPair neg;
    neg.a = pos.a;
    neg.label = PairLabel::kNegative;
    neg.sample_time = seq.timestamps[i];
    std::optional<Point3> other;
    for (int k = 0; k < 32 && !other; ++k) {
      const Point3& q = al.partner.points[rng.below(al.partner.size())];
      if ((q - p).norm() >= far_apart) other = q;
    }
    if (other) {
      neg.b = compute_tdf(crop_cube(al.partner, *other, crop), *other, params.tdf);
    } else {
      // non-corresponding time: the scan farthest in time from i, in its own frame
      const std::size_t k = seq.timestamps[i] - seq.timestamps.front() >
                                    seq.timestamps.back() - seq.timestamps[i]
                                ? 0
                                : n - 1;
      const PointCloud& scan_k = seq.scans[k];
      const Point3 q = scan_k.points[rng.below(scan_k.size())];
      neg.b = compute_tdf(crop_cube(scan_k, q, crop), q, params.tdf);
    }
    pairs.push_back(std::move(pos));
    pairs.push_back(std::move(neg));
    ++produced;
  }
  if (pairs.empty()) {
    throw Error(Errc::kInsufficientData, "no candidate produced a training pair (insufficient overlap)");
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const TrainingPair& x, const TrainingPair& y) {
    return x.sample_time < y.sample_time;
  });
  return pairs;
}

void write_pairs(const std::vector<TrainingPair>& pairs, const std::filesystem::path& path) {
  const std::uint32_t d = pairs.empty() ? 0u : static_cast<std::uint32_t>(pairs.front().a.grid_dim);
  for (const auto& p : pairs) {
    if (p.a.grid_dim != d || p.b.grid_dim != d) {
      throw Error(Errc::kMismatch, "training pairs have differing grid dimensions");
    }
  }
  write_atomically(path, std::ios::binary, [&](std::ostream& os) {
    binio::write_magic(os, "TPR1");
    binio::write_u32(os, static_cast<std::uint32_t>(pairs.size()));
    binio::write_u32(os, d);
    for (const auto& p : pairs) {
      binio::write_u8(os, static_cast<std::uint8_t>(p.label));
      for (float v : p.a.values) binio::write_f32(os, v);
      for (float v : p.b.values) binio::write_f32(os, v);
    }
  });
}

PairFile read_pairs(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::kIo, "cannot open " + path.string());
  const std::string what = path.string();
  binio::read_magic(is, "TPR1", what);
  PairFile f;
  const std::uint32_t count = binio::read_u32(is, what);
  f.grid_dim = binio::read_u32(is, what);
  const std::size_t len = static_cast<std::size_t>(f.grid_dim) * f.grid_dim * f.grid_dim;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto label = binio::read_u8(is, what);
    if (label > 1) throw Error(Errc::kParse, what + ": bad pair label");
    f.labels.push_back(static_cast<PairLabel>(label));
    auto& a = f.a.emplace_back(len);
    for (auto& v : a) v = binio::read_f32(is, what);
    auto& b = f.b.emplace_back(len);
    for (auto& v : b) v = binio::read_f32(is, what);
  }
  binio::expect_eof(is, what);
  return f;
}

void write_pair_metadata(const PairMiningParams& params, const std::filesystem::path& pair_path) {
  nlohmann::json j;
  j["format"] = "TPR1";
  j["dt"] = params.dt;
  j["n_pairs"] = params.n_pairs;
  j["crop_size"] = params.effective_crop();
  j["region_size"] = params.tdf.region_size;
  j["grid_dim"] = params.tdf.grid_dim;
  j["truncation"] = params.tdf.effective_truncation();
  j["overlap_dist"] = params.overlap_dist;
  j["max_rmse"] = params.max_rmse;
  j["seed"] = params.seed;
  auto path = pair_path;
  path += ".json";
  write_atomically(path, std::ios::out, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

}  // namespace changeret
