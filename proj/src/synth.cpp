#include "changeret/synth.hpp"

#include <algorithm>
#include <cmath>

#include "changeret/error.hpp"
#include "changeret/kdtree.hpp"
#include "changeret/rng.hpp"

namespace changeret {

void SceneParams::validate() const {
  if (n_structures < 1 || !(extent > 0.0) || points_per_structure < 1 || noise_sigma < 0.0 ||
      dropout < 0.0 || dropout >= 1.0 || object_points < 1 || view_yaw_range < 0.0 ||
      view_translation_range < 0.0) {
    throw Error(Errc::kConfig, "scene parameters out of range");
  }
}

namespace {

void add_wall(Rng& rng, double half, int n, Points& out) {
  const double len = rng.uniform(4.0, 10.0);
  const double height = rng.uniform(2.0, 4.0);
  const bool along_x = rng.uniform() < 0.5;
  const double span = std::max(0.0, half - len / 2.0);
  const double cu = rng.uniform(-span, span);
  const double cv = rng.uniform(-half, half);
  for (int i = 0; i < n; ++i) {
    const double u = cu + rng.uniform(-len / 2.0, len / 2.0);
    const double z = rng.uniform(0.0, height);
    out.push_back(along_x ? Point3(u, cv, z) : Point3(cv, u, z));
  }
}

void add_box(Rng& rng, double half, int n, Points& out) {
  const double w = rng.uniform(1.0, 4.0);
  const double d = rng.uniform(1.0, 4.0);
  const double h = rng.uniform(1.0, 3.0);
  const double cx = rng.uniform(-half + w / 2.0, half - w / 2.0);
  const double cy = rng.uniform(-half + d / 2.0, half - d / 2.0);
  // area-weighted choice among four sides and the top
  const double areas[5] = {w * h, w * h, d * h, d * h, w * d};
  const double total = areas[0] + areas[1] + areas[2] + areas[3] + areas[4];
  for (int i = 0; i < n; ++i) {
    double pick = rng.uniform() * total;
    int face = 0;
    while (face < 4 && pick >= areas[face]) pick -= areas[face++];
    const double a = rng.uniform(-0.5, 0.5);
    const double b = rng.uniform(0.0, 1.0);
    switch (face) {
      case 0: out.emplace_back(cx + a * w, cy - d / 2.0, b * h); break;
      case 1: out.emplace_back(cx + a * w, cy + d / 2.0, b * h); break;
      case 2: out.emplace_back(cx - w / 2.0, cy + a * d, b * h); break;
      case 3: out.emplace_back(cx + w / 2.0, cy + a * d, b * h); break;
      default: out.emplace_back(cx + a * w, cy + (b - 0.5) * d, h); break;
    }
  }
}

void add_cylinder(Rng& rng, double half, int n, Points& out) {
  const double r = rng.uniform(0.3, 1.5);
  const double h = rng.uniform(2.0, 5.0);
  const double cx = rng.uniform(-half + r, half - r);
  const double cy = rng.uniform(-half + r, half - r);
  for (int i = 0; i < n; ++i) {
    const double a = rng.uniform(0.0, 2.0 * M_PI);
    out.emplace_back(cx + r * std::cos(a), cy + r * std::sin(a), rng.uniform(0.0, h));
  }
}

}  // namespace

PointCloud generate_reference(std::uint64_t seed, const SceneParams& params) {
  params.validate();
  Rng rng(seed);
  const double half = params.extent / 2.0;
  PointCloud ref;
  for (int s = 0; s < params.n_structures; ++s) {
    const double kind = rng.uniform();
    if (kind < 0.35) add_wall(rng, half, params.points_per_structure, ref.points);
    else if (kind < 0.7) add_box(rng, half, params.points_per_structure, ref.points);
    else add_cylinder(rng, half, params.points_per_structure, ref.points);
  }
  return ref;
}

SynthScene generate_scene(std::uint64_t seed, const SceneParams& params) {
  SynthScene scene;
  scene.seed = seed;
  scene.reference = generate_reference(seed, params);
  // a separate stream keeps the reference identical whatever the query settings
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);

  const double yaw = rng.uniform(-params.view_yaw_range, params.view_yaw_range) * M_PI / 180.0;
  const Eigen::Vector3d t(rng.uniform(-params.view_translation_range, params.view_translation_range),
                          rng.uniform(-params.view_translation_range, params.view_translation_range),
                          0.0);
  scene.viewpoint = RigidTransform::from_yaw(yaw, t);

  Points object_ref;
  if (params.insert_object) {
    const double half = params.extent / 2.0;
    const double a = rng.uniform(0.4, 0.9), b = rng.uniform(0.4, 0.9), c = rng.uniform(0.4, 0.9);
    const double clearance = std::max(a, b) + 0.5;
    Points flat;
    for (const auto& p : scene.reference.points) flat.emplace_back(p.x(), p.y(), 0.0);
    const PointIndex index(flat);
    Point3 center = Point3::Zero();
    for (int attempt = 0; attempt < 200; ++attempt) {
      center = Point3(rng.uniform(-half, half), rng.uniform(-half, half), 0.0);
      if (index.nearest(center).distance >= clearance) break;
    }
    center.z() = c;
    for (int i = 0; i < params.object_points; ++i) {
      // uniform direction, scaled onto the ellipsoid
      const double zz = rng.uniform(-1.0, 1.0);
      const double phi = rng.uniform(0.0, 2.0 * M_PI);
      const double rr = std::sqrt(1.0 - zz * zz);
      object_ref.push_back(center + Point3(a * rr * std::cos(phi), b * rr * std::sin(phi), c * zz));
    }
  }

  auto emit = [&](const Point3& p, bool is_object) {
    if (rng.uniform() < params.dropout) return;
    Point3 q = scene.viewpoint.apply(p);
    if (params.noise_sigma > 0.0) {
      q += Point3(rng.normal(0.0, params.noise_sigma), rng.normal(0.0, params.noise_sigma),
                  rng.normal(0.0, params.noise_sigma));
    }
    scene.query.points.push_back(q);
    if (is_object) scene.object.push_back(q);
  };
  for (const auto& p : scene.reference.points) emit(p, false);
  for (const auto& p : object_ref) emit(p, true);
  // a scanner has no reason to list the new object last
  for (std::size_t i = scene.query.points.size(); i > 1; --i) {
    std::swap(scene.query.points[i - 1], scene.query.points[rng.below(i)]);
  }

  if (!scene.object.empty()) {
    scene.object_box_raw = AxisAlignedBox::bounding(scene.object);
    const IcsResult ics = to_ics(scene.query, params.ics);
    Points in_ics;
    for (const auto& p : scene.object) in_ics.push_back(ics.alignment.transform.apply(p));
    scene.object_box_ics = AxisAlignedBox::bounding(in_ics);
  }
  return scene;
}

void CorridorParams::validate() const {
  if (n_scans < 1 || !(spacing >= 0.0) || !(scan_interval > 0.0) || !(range > 0.0) ||
      !(noise_sigma >= 0.0) || !(keep_ratio > 0.0) || keep_ratio > 1.0 || !(point_spacing > 0.0)) {
    throw Error(Errc::kConfig, "corridor parameters out of range");
  }
}

namespace {

// Regular lattice on an axis-aligned vertical rectangle, y or x constant.
void add_panel(Points& out, const Point3& origin, const Point3& u, const Point3& v, double step) {
  const int nu = std::max(1, static_cast<int>(std::ceil(u.norm() / step)));
  const int nv = std::max(1, static_cast<int>(std::ceil(v.norm() / step)));
  for (int i = 0; i <= nu; ++i) {
    for (int j = 0; j <= nv; ++j) {
      out.push_back(origin + u * (static_cast<double>(i) / nu) + v * (static_cast<double>(j) / nv));
    }
  }
}

}  // namespace

CorridorSequence generate_corridor(std::uint64_t seed, const CorridorParams& params) {
  params.validate();
  Rng rng(seed);
  CorridorSequence out;
  const double x0 = -params.range;
  const double x1 = (params.n_scans - 1) * params.spacing + params.range;
  const double half_width = 2.0;
  const double step = params.point_spacing;

  for (double side : {-half_width, half_width}) {
    add_panel(out.world, Point3(x0, side, 0.0), Point3(x1 - x0, 0.0, 0.0), Point3(0.0, 0.0, 3.0), step);
    // pillars jut out of the wall at irregular intervals so the corridor is not
    // translation-symmetric along x
    double x = x0 + rng.uniform(0.5, 2.5);
    while (x < x1 - 1.0) {
      const double w = rng.uniform(0.3, 0.8);
      const double depth = rng.uniform(0.2, 0.6) * (side < 0 ? 1.0 : -1.0);
      const double h = rng.uniform(1.5, 3.0);
      add_panel(out.world, Point3(x, side + depth, 0.0), Point3(w, 0.0, 0.0), Point3(0.0, 0.0, h), step);
      add_panel(out.world, Point3(x, side, 0.0), Point3(0.0, depth, 0.0), Point3(0.0, 0.0, h), step);
      add_panel(out.world, Point3(x + w, side, 0.0), Point3(0.0, depth, 0.0), Point3(0.0, 0.0, h), step);
      x += w + rng.uniform(1.5, 4.0);
    }
  }
  // free-standing posts
  for (double x = x0 + rng.uniform(1.0, 3.0); x < x1; x += rng.uniform(3.0, 6.0)) {
    const double r = rng.uniform(0.1, 0.25);
    const Point3 c(x, rng.uniform(-1.0, 1.0), 0.0);
    const int around = std::max(8, static_cast<int>(std::ceil(2.0 * M_PI * r / step)));
    for (int k = 0; k < around; ++k) {
      const double a = 2.0 * M_PI * k / around;
      for (double z = 0.0; z <= 2.0; z += step) {
        out.world.push_back(c + Point3(r * std::cos(a), r * std::sin(a), z));
      }
    }
  }

  const PointIndex world_index(out.world);
  ScanSequence& seq = out.sequence;
  for (int i = 0; i < params.n_scans; ++i) {
    const double yaw = rng.uniform(-params.yaw_jitter_deg, params.yaw_jitter_deg) * M_PI / 180.0;
    const RigidTransform pose =
        RigidTransform::from_yaw(yaw, Eigen::Vector3d(i * params.spacing, rng.uniform(-0.2, 0.2), 0.0));
    const RigidTransform to_sensor = pose.inverse();
    PointCloud scan;
    for (std::size_t idx : world_index.radius_search(pose.translation, params.range)) {
      if (rng.uniform() >= params.keep_ratio) continue;
      Point3 p = to_sensor.apply(out.world[idx]);
      if (params.noise_sigma > 0.0) {
        p += Point3(rng.normal(0.0, params.noise_sigma), rng.normal(0.0, params.noise_sigma),
                    rng.normal(0.0, params.noise_sigma));
      }
      scan.points.push_back(p);
    }
    seq.scans.push_back(std::move(scan));
    seq.odometry.push_back(pose);
    seq.timestamps.push_back(i * params.scan_interval);
    out.truth.push_back(pose);
  }
  return out;
}

}  // namespace changeret
