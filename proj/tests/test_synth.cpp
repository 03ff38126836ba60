#include <doctest.h>

#include <algorithm>

#include "changeret/synth.hpp"
#include "test_util.hpp"

using namespace changeret;

namespace {

std::vector<std::array<double, 3>> sorted(const Points& pts) {
  std::vector<std::array<double, 3>> v;
  for (const auto& p : pts) v.push_back({p.x(), p.y(), p.z()});
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST_CASE("scenes are reproducible from their seed") {
  const SynthScene a = generate_scene(11, SceneParams{});
  const SynthScene b = generate_scene(11, SceneParams{});
  CHECK(a.reference.points == b.reference.points);
  CHECK(a.query.points == b.query.points);
  CHECK(a.object == b.object);
  CHECK(a.viewpoint.rotation == b.viewpoint.rotation);
  const SynthScene c = generate_scene(12, SceneParams{});
  CHECK(a.reference.points != c.reference.points);
  CHECK(generate_reference(11, SceneParams{}).points == a.reference.points);
}

TEST_CASE("without noise, insertion or motion the query is the reference minus dropout") {
  SceneParams p;
  p.noise_sigma = 0.0;
  p.insert_object = false;
  p.view_yaw_range = 0.0;
  p.view_translation_range = 0.0;
  const SynthScene s = generate_scene(5, p);
  CHECK(s.object.empty());
  const auto ref = sorted(s.reference.points);
  const auto qry = sorted(s.query.points);
  CHECK(std::includes(ref.begin(), ref.end(), qry.begin(), qry.end()));
  const double kept = static_cast<double>(qry.size()) / static_cast<double>(ref.size());
  CHECK(kept == doctest::Approx(1.0 - p.dropout).epsilon(0.05));
}

TEST_CASE("inserted object lies in its recorded boxes") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SynthScene s = generate_scene(seed, SceneParams{});
    REQUIRE(!s.object.empty());
    const IcsResult ics = to_ics(s.query, SceneParams{}.ics);
    const Box2 raw = Box2::of(s.object_box_raw), inv = Box2::of(s.object_box_ics);
    std::size_t in_raw = 0, in_ics = 0;
    for (const auto& p : s.object) {
      in_raw += raw.contains(p);
      in_ics += inv.contains(ics.alignment.transform.apply(p));
    }
    CHECK(in_raw == s.object.size());
    CHECK(static_cast<double>(in_ics) >= 0.95 * static_cast<double>(s.object.size()));
  }
}

TEST_CASE("query is the reference seen from the recorded viewpoint") {
  SceneParams p;
  p.insert_object = false;
  p.dropout = 0.0;
  const SynthScene s = generate_scene(3, p);
  REQUIRE(s.query.size() == s.reference.size());
  const auto moved = sorted(apply_transform(s.reference, s.viewpoint).points);
  const auto qry = sorted(s.query.points);
  for (std::size_t i = 0; i < qry.size(); i += 97) {
    for (int a = 0; a < 3; ++a) CHECK(std::abs(moved[i][a] - qry[i][a]) < 1e-9);
  }
}

TEST_CASE("scene parameter validation") {
  SceneParams p;
  p.n_structures = 0;
  CHECK_ERRC(p.validate(), Errc::kConfig);
  p = SceneParams{};
  p.dropout = 1.0;
  CHECK_ERRC(p.validate(), Errc::kConfig);
  CorridorParams c;
  c.n_scans = 0;
  CHECK_ERRC(c.validate(), Errc::kConfig);
}

TEST_CASE("corridor sequence is consistent with its truth") {
  CorridorParams c;
  c.n_scans = 4;
  const CorridorSequence seq = generate_corridor(2, c);
  REQUIRE(seq.sequence.scans.size() == 4);
  REQUIRE(seq.truth.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(seq.sequence.timestamps[i] == doctest::Approx(static_cast<double>(i)));
    const auto& scan = seq.sequence.scans[i];
    REQUIRE(!scan.empty());
    // every observed point is within range of its pose
    for (std::size_t k = 0; k < scan.size(); k += 53) CHECK(scan.points[k].norm() <= c.range + 1e-9);
  }
  CHECK(generate_corridor(2, c).sequence.scans[1].points == seq.sequence.scans[1].points);
}
