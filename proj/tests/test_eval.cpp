#include <doctest.h>

#include <algorithm>

#include "changeret/eval.hpp"
#include "changeret/synth.hpp"
#include "test_util.hpp"

using namespace changeret;

namespace {

Ranking ranking_of(const std::vector<std::uint32_t>& ids) {
  Ranking r;
  for (std::size_t i = 0; i < ids.size(); ++i) r.push_back({ids[i], static_cast<double>(i)});
  return r;
}

ChangeReport report_of(std::uint32_t qid, const Points& keypoints) {
  ChangeReport r;
  r.query_id = qid;
  for (std::size_t i = 0; i < keypoints.size(); ++i) {
    r.rankings.push_back({i, keypoints[i], static_cast<double>(keypoints.size() - i), 0, false});
  }
  return r;
}

}  // namespace

TEST_CASE("anr examples") {
  std::vector<std::uint32_t> hundred(100);
  for (std::uint32_t i = 0; i < 100; ++i) hundred[i] = i;
  std::swap(hundred[0], hundred[2]);
  CHECK(anr({ranking_of(hundred)}, {0}, 100) == doctest::Approx(0.03));

  const Ranking a = ranking_of({7, 1, 2, 3, 4, 5, 6, 8, 9, 0});
  const Ranking b = ranking_of({1, 2, 3, 4, 7, 5, 6, 8, 9, 0});
  CHECK(anr({a, b}, {7, 7}, 10) == doctest::Approx(0.3));
  CHECK(rank_of(b, 7) == 5);
  CHECK(anr({a, a}, {7, 7}, 10) == doctest::Approx(0.1));
  CHECK_ERRC(rank_of(a, 77), Errc::kMismatch);
  CHECK_ERRC(anr({a}, {7, 7}, 10), Errc::kMismatch);
}

TEST_CASE("anr of random rankings is near one half") {
  Rng rng(1);
  double sum = 0.0;
  for (int t = 0; t < 200; ++t) {
    std::vector<std::uint32_t> ids(100);
    for (std::uint32_t i = 0; i < 100; ++i) ids[i] = i;
    for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.below(i)]);
    sum += anr({ranking_of(ids)}, {0}, 100);
  }
  CHECK(std::abs(sum / 200 - 0.5) < 0.05);
}

TEST_CASE("top-x examples and boundary inclusion") {
  GroundTruth gt;
  gt.queries[1] = {1, 0, {{0, 0, 1, 1}}};
  const ChangeReport inside = report_of(1, {{0.5, 0.5, 9}, {5, 5, 0}});
  CHECK(top_x_accuracy({inside}, gt, 1) == 1.0);
  const ChangeReport edge = report_of(1, {{1.0, 0.0, -3}});
  CHECK(top_x_hit(edge, gt.at(1), 1));
  const ChangeReport late = report_of(1, {{5, 5, 0}, {6, 6, 0}, {0.2, 0.9, 0}});
  CHECK_FALSE(top_x_hit(late, gt.at(1), 2));
  CHECK(top_x_hit(late, gt.at(1), 3));
  CHECK(top_x_hit(late, gt.at(1), 30));
  CHECK_ERRC(gt.at(5), Errc::kMismatch);
}

TEST_CASE("top-x accuracy on synthetic reports matches a direct containment check and grows with x") {
  Rng rng(2);
  GroundTruth gt;
  std::vector<ChangeReport> reports;
  for (std::uint32_t q = 0; q < 50; ++q) {
    const double cx = rng.uniform(-5, 5), cy = rng.uniform(-5, 5);
    gt.queries[q] = {q, q, {{cx - 0.5, cy - 0.5, cx + 0.5, cy + 0.5}}};
    Points kps = testutil::random_points(rng, 30, -6, 6);
    if (q % 2 == 0) kps[rng.below(30)] = Point3(cx, cy, 0);
    reports.push_back(report_of(q, kps));
  }
  double prev = 0.0;
  for (std::size_t x : {1, 2, 5, 10, 30}) {
    std::size_t hits = 0;
    for (const auto& r : reports) {
      const auto& box = gt.queries.at(r.query_id).boxes[0];
      bool hit = false;
      for (std::size_t i = 0; i < std::min(x, r.rankings.size()); ++i) {
        const Point3& p = r.rankings[i].keypoint;
        hit |= p.x() >= box.xmin && p.x() <= box.xmax && p.y() >= box.ymin && p.y() <= box.ymax;
      }
      hits += hit;
    }
    const double acc = top_x_accuracy(reports, gt, x);
    CHECK(acc == static_cast<double>(hits) / 50.0);
    CHECK(acc >= prev);
    prev = acc;
  }
}

TEST_CASE("ground truth and ranking files round trip") {
  testutil::TempDir dir("eval");
  GroundTruth gt;
  gt.queries[3] = {3, 8, {{-1.5, 0.25, 2.0, 4.0}}};
  gt.queries[4] = {4, 2, {}};
  write_ground_truth(gt, dir / "gt.json");
  const GroundTruth back = read_ground_truth(dir / "gt.json");
  REQUIRE(back.queries.size() == 2);
  CHECK(back.at(3).gt_ref_id == 8);
  REQUIRE(back.at(3).boxes.size() == 1);
  CHECK(back.at(3).boxes[0].xmin == -1.5);
  CHECK(back.at(3).boxes[0].ymax == 4.0);
  CHECK(back.at(4).boxes.empty());

  const Ranking r = {{4, 0.5}, {1, 1.0 / 3.0}};
  write_ranking(9, r, dir / "r.json");
  const auto [qid, rb] = read_ranking(dir / "r.json");
  CHECK(qid == 9);
  REQUIRE(rb.size() == 2);
  CHECK(rb[1].image_id == 1);
  CHECK(rb[1].score == 1.0 / 3.0);
  CHECK_ERRC(read_ground_truth(dir / "none.json"), Errc::kIo);
}
