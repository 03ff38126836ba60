#include <doctest.h>

#include <fstream>
#include <numeric>

#include "changeret/kdtree.hpp"
#include "changeret/registration.hpp"
#include "changeret/synth.hpp"
#include "test_util.hpp"

using namespace changeret;

namespace {

// Three perpendicular patches: well constrained for point-to-point ICP.
PointCloud corner_cloud(Rng& rng, std::size_t per_face = 400) {
  PointCloud c;
  for (std::size_t i = 0; i < per_face; ++i) {
    const double a = rng.uniform(0, 2), b = rng.uniform(0, 2);
    c.points.emplace_back(a, b, 0.0);
    c.points.emplace_back(a, 0.0, b);
    c.points.emplace_back(0.0, a, b);
  }
  // a bump breaks the corner's symmetries
  for (std::size_t i = 0; i < per_face / 2; ++i) {
    c.points.emplace_back(1.5 + 0.2 * rng.uniform(), 0.5 + 0.2 * rng.uniform(), 0.3);
  }
  return c;
}

ScanSequence straight_sequence(std::size_t n, double spacing) {
  ScanSequence seq;
  for (std::size_t i = 0; i < n; ++i) {
    PointCloud scan;
    scan.points = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    seq.scans.push_back(scan);
    seq.odometry.push_back(RigidTransform::from_yaw(0.0, Eigen::Vector3d(spacing * i, 0, 0)));
    seq.timestamps.push_back(static_cast<double>(i));
  }
  return seq;
}

}  // namespace

TEST_CASE("fit_rigid recovers an exact transform") {
  Rng rng(1);
  const Points src = testutil::random_points(rng, 20);
  const RigidTransform t = testutil::random_transform(rng);
  Points dst;
  for (const auto& p : src) dst.push_back(t.apply(p));
  const RigidTransform fit = fit_rigid(src, dst);
  CHECK((fit.rotation - t.rotation).norm() < 1e-9);
  CHECK((fit.translation - t.translation).norm() < 1e-9);
  CHECK(fit.is_valid());
}

TEST_CASE("icp: identical clouds give the identity") {
  Rng rng(2);
  const PointCloud c = corner_cloud(rng);
  const IcpResult r = icp_align(c, c);
  CHECK(r.converged);
  CHECK(r.rmse < 1e-12);
  CHECK(r.transform.rotation_angle() < 1e-9);
  CHECK(r.transform.translation.norm() < 1e-9);
}

TEST_CASE("icp: recovers a 5 degree yaw and 0.1 m shift") {
  Rng rng(3);
  const PointCloud source = corner_cloud(rng);
  const RigidTransform truth = RigidTransform::from_yaw(5.0 * M_PI / 180.0, Eigen::Vector3d(0.1, 0, 0));
  const PointCloud target = apply_transform(source, truth);
  const IcpResult r = icp_align(source, target);
  const RigidTransform err = r.transform * truth.inverse();
  CHECK(err.rotation_angle() < 1e-3);
  CHECK(err.translation.norm() < 1e-3);
  CHECK(r.converged);
}

TEST_CASE("icp: degenerate inputs") {
  PointCloud two;
  two.points = {{0, 0, 0}, {1, 0, 0}};
  PointCloud line;
  for (int i = 0; i < 10; ++i) line.points.emplace_back(i, 0, 0);
  Rng rng(4);
  const PointCloud good = corner_cloud(rng, 50);
  CHECK_ERRC(icp_align(two, good), Errc::kDegenerate);
  CHECK_ERRC(icp_align(good, line), Errc::kDegenerate);
  PointCloud far = good;
  for (auto& p : far.points) p += Point3(100, 0, 0);
  CHECK_ERRC(icp_align(good, far), Errc::kDegenerate);
}

TEST_CASE("icp: truncated cost never increases (property)") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const PointCloud source = corner_cloud(rng, 200);
    const RigidTransform truth = RigidTransform::from_yaw(rng.uniform(-0.2, 0.2),
                                                          Eigen::Vector3d(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 0));
    PointCloud target = apply_transform(source, truth);
    for (auto& p : target.points) p += Point3(rng.normal(0, 0.01), rng.normal(0, 0.01), rng.normal(0, 0.01));
    const IcpResult r = icp_align(source, target);
    REQUIRE(r.cost_history.size() >= 2);
    for (std::size_t i = 1; i < r.cost_history.size(); ++i) {
      CHECK(r.cost_history[i] <= r.cost_history[i - 1]);
    }
  }
}

TEST_CASE("icp is left-invariant to the target frame (property)") {
  Rng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    const PointCloud source = corner_cloud(rng, 200);
    const RigidTransform offset = RigidTransform::from_yaw(rng.uniform(-0.1, 0.1), Eigen::Vector3d(0.05, -0.05, 0.02));
    const PointCloud target = apply_transform(source, offset);
    const IcpResult base = icp_align(source, target);

    const RigidTransform t = testutil::random_transform(rng);
    // the initial guess moves with the frame so correspondences are unchanged
    const IcpResult moved = icp_align(source, apply_transform(target, t), t);
    const RigidTransform expect = t * base.transform;
    CHECK((moved.transform.rotation - expect.rotation).norm() < 1e-6);
    CHECK((moved.transform.translation - expect.translation).norm() < 1e-6);
  }
}

TEST_CASE("segment partition arithmetic") {
  using Seg = std::pair<std::size_t, std::size_t>;
  CHECK(partition_segments(straight_sequence(11, 1.0), 5.0) == std::vector<Seg>{{0, 5}, {6, 10}});
  // a 1 m tail is below half a segment and is dropped
  CHECK(partition_segments(straight_sequence(12, 1.0), 5.0) == std::vector<Seg>{{0, 5}, {6, 10}});
  // a 3 m tail is kept
  CHECK(partition_segments(straight_sequence(14, 1.0), 5.0) == std::vector<Seg>{{0, 5}, {6, 10}, {11, 13}});
  // a lone short sequence still yields its only segment
  CHECK(partition_segments(straight_sequence(2, 1.0), 5.0) == std::vector<Seg>{{0, 1}});
}

TEST_CASE("single stationary scan gives one map equal to the scan") {
  ScanSequence seq = straight_sequence(1, 0.0);
  const auto maps = build_local_map(seq);
  REQUIRE(maps.size() == 1);
  CHECK(maps[0].travel_distance == 0.0);
  CHECK(maps[0].cloud.points == seq.scans[0].points);
}

TEST_CASE("sequence validation") {
  ScanSequence seq = straight_sequence(3, 1.0);
  seq.timestamps[2] = seq.timestamps[1];
  CHECK_ERRC(seq.validate(), Errc::kPrecondition);
  seq = straight_sequence(3, 1.0);
  seq.odometry.pop_back();
  CHECK_ERRC(build_local_map(seq), Errc::kPrecondition);
}

TEST_CASE("corridor: 11 scans 1 m apart fuse into two maps matching the world") {
  CorridorParams params;
  params.n_scans = 11;
  const CorridorSequence c = generate_corridor(3, params);
  // perturb odometry so ICP has work to do
  ScanSequence seq = c.sequence;
  Rng rng(9);
  for (std::size_t i = 1; i < seq.odometry.size(); ++i) {
    seq.odometry[i] = RigidTransform::from_yaw(rng.uniform(-0.01, 0.01),
                                               Eigen::Vector3d(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), 0)) *
                      seq.odometry[i];
  }
  const auto maps = build_local_map(seq);
  REQUIRE(maps.size() == 2);
  CHECK(maps[0].first_scan == 0);
  CHECK(maps[0].last_scan == 5);
  CHECK(maps[1].first_scan == 6);
  CHECK(maps[1].last_scan == 10);

  const PointIndex world(c.world);
  for (const auto& m : maps) {
    CHECK(m.travel_distance >= 5.0);
    const RigidTransform to_world = c.truth[m.first_scan];
    std::size_t close = 0;
    for (const auto& p : m.cloud.points) close += world.nearest(to_world.apply(p)).distance <= 0.05 ? 1 : 0;
    CHECK(static_cast<double>(close) >= 0.99 * static_cast<double>(m.cloud.size()));
  }
}

TEST_CASE("pair mining: ordering, balance, determinism and the distance oracle") {
  CorridorParams params;
  params.n_scans = 8;
  const CorridorSequence c = generate_corridor(5, params);
  PairMiningParams mp;
  mp.dt = 3.0;
  mp.n_pairs = 10;
  mp.seed = 42;
  mp.tdf.grid_dim = 12;
  mp.tdf.region_size = 3.0;
  const auto pairs = mine_training_pairs(c.sequence, mp);
  REQUIRE(pairs.size() == 10);
  std::size_t positives = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    positives += pairs[i].label == PairLabel::kPositive ? 1 : 0;
    CHECK(pairs[i].a.grid_dim == pairs[i].b.grid_dim);
    if (i > 0) CHECK(pairs[i].sample_time >= pairs[i - 1].sample_time);
  }
  CHECK(positives == 5);

  auto dist = [](const TdfVector& a, const TdfVector& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k) {
      const double d = static_cast<double>(a.values[k]) - b.values[k];
      s += d * d;
    }
    return std::sqrt(s);
  };
  double neg_mean = 0.0;
  std::vector<double> pos;
  for (const auto& p : pairs) {
    if (p.label == PairLabel::kPositive) {
      pos.push_back(dist(p.a, p.b));
    } else {
      neg_mean += dist(p.a, p.b) / 5.0;
    }
  }
  for (double d : pos) CHECK(d < neg_mean);

  testutil::TempDir dir("pairs");
  write_pairs(pairs, dir / "a.tpr");
  write_pairs(mine_training_pairs(c.sequence, mp), dir / "b.tpr");
  std::ifstream fa(dir / "a.tpr", std::ios::binary), fb(dir / "b.tpr", std::ios::binary);
  const std::string ba{std::istreambuf_iterator<char>(fa), {}}, bb{std::istreambuf_iterator<char>(fb), {}};
  CHECK(ba == bb);
  CHECK(ba.substr(0, 4) == "TPR1");
  CHECK(ba.size() == 4 + 4 + 4 + 10 * (1 + 2 * 12 * 12 * 12 * 4));

  const PairFile back = read_pairs(dir / "a.tpr");
  CHECK(back.grid_dim == 12);
  REQUIRE(back.labels.size() == 10);
  CHECK(back.a[3] == pairs[3].a.values);
  CHECK(back.b[7] == pairs[7].b.values);
  CHECK(back.labels[0] == pairs[0].label);

  write_pair_metadata(mp, dir / "a.tpr");
  CHECK(std::filesystem::exists(dir / "a.tpr.json"));
}

TEST_CASE("pair mining: sequence shorter than dt") {
  CorridorParams params;
  params.n_scans = 3;
  const CorridorSequence c = generate_corridor(5, params);
  PairMiningParams mp;
  mp.dt = 3.0;
  CHECK_ERRC(mine_training_pairs(c.sequence, mp), Errc::kPrecondition);
}
