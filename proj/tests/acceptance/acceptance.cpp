// Acceptance suite: one PASS/FAIL line per criterion, with its runtime.
// Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "changeret/change.hpp"
#include "changeret/config.hpp"
#include "changeret/eval.hpp"
#include "changeret/fpfh.hpp"
#include "changeret/ics.hpp"
#include "changeret/kdtree.hpp"
#include "changeret/pipeline.hpp"
#include "changeret/registration.hpp"
#include "changeret/retrieval.hpp"
#include "changeret/rng.hpp"
#include "changeret/synth.hpp"
#include "changeret/vocabulary.hpp"

using namespace changeret;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

int g_failures = 0;

/// `prior_s` is time already spent outside `body` on work the criterion covers.
void report(const std::string& name, double limit_s, const std::function<Outcome()>& body, double prior_s = 0.0) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = prior_s + std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = limit_s <= 0.0 || secs < limit_s;
  const bool pass = o.ok && in_time;
  if (!pass) ++g_failures;
  std::printf("%s %s: %s [%.2f s", pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
  if (limit_s > 0.0) std::printf(" / limit %.0f s%s", limit_s, in_time ? "" : ", over limit");
  std::printf("]\n");
  std::fflush(stdout);
}

DescriptorSet random_features(Rng& rng, std::size_t n, std::size_t dim) {
  DescriptorSet s;
  s.dim = dim;
  for (std::size_t i = 0; i < n * dim; ++i) s.values.push_back(static_cast<float>(rng.uniform(0, 1)));
  for (std::size_t i = 0; i < n; ++i) {
    s.keypoints.emplace_back(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0, 3));
  }
  return s;
}

std::shared_ptr<const Vocabulary> random_vocab(Rng& rng, std::size_t words, std::size_t dim) {
  KMeansParams p;
  p.words = words;
  p.seed = rng.next();
  return std::make_shared<const Vocabulary>(train_vocabulary(random_features(rng, 10 * words, dim), p));
}

Outcome nbnn_oracle() {
  Rng rng(101);
  for (int inst = 0; inst < 50; ++inst) {
    auto vocab = random_vocab(rng, 8 + rng.below(57), 33);
    const std::size_t n_images = 1 + rng.below(10);
    InvertedIndex index(vocab);
    std::vector<BowImage> images;
    for (std::size_t j = 0; j < n_images; ++j) {
      images.push_back(make_bow_image(random_features(rng, 1 + rng.below(50), 33), *vocab,
                                      static_cast<std::uint32_t>(j * 7 + rng.below(7))));
      index.add(images.back());
    }
    const BowImage q = make_bow_image(random_features(rng, 1 + rng.below(50), 33), *vocab, 0);
    const Ranking exact = nbnn_localize(q, index, 0, NbnnMode::kExact);
    const Ranking brute = brute_force_localize(q, images, *vocab);
    if (exact.size() != brute.size()) return {false, "instance " + std::to_string(inst) + ": length differs"};
    for (std::size_t i = 0; i < exact.size(); ++i) {
      if (exact[i].image_id != brute[i].image_id || exact[i].score != brute[i].score) {
        return {false, "instance " + std::to_string(inst) + ": rank " + std::to_string(i + 1) + " differs"};
      }
    }
  }
  return {true, "50/50 instances rank-identical"};
}

Outcome loc_oracle() {
  Rng rng(202);
  std::size_t checked = 0;
  for (int inst = 0; inst < 50; ++inst) {
    auto vocab = random_vocab(rng, 8 + rng.below(25), 33);
    const BowImage q = make_bow_image(random_features(rng, 5 + rng.below(46), 33), *vocab, 0);
    const BowImage r = make_bow_image(random_features(rng, 5 + rng.below(46), 33), *vocab, 1);
    const GridSpec g{rng.uniform(0.5, 4), rng.uniform(0.5, 4)};
    const auto loc = compute_loc(q, r, g, *vocab);
    const double sentinel = sentinel_value(q, {view_of(r)}, *vocab, ReferenceSide::kExemplar);
    for (std::size_t f = 0; f < q.size(); ++f) {
      const int cell = grid_cell(q.keypoints()[f], g);
      bool any = false;
      double best = 0.0;
      for (std::size_t j = 0; j < r.size(); ++j) {
        if (grid_cell(r.keypoints()[j], g) != cell) continue;
        const double d = l2_distance(q.features.row(f), vocab->exemplar(r.words[j]));
        if (!any || d < best) best = d;
        any = true;
      }
      const double expect = any ? best : sentinel;
      if (loc[f].feature != f || loc[f].loc != expect || loc[f].sentinel == any) {
        return {false, "instance " + std::to_string(inst) + ", feature " + std::to_string(f) + " differs"};
      }
      ++checked;
    }
  }
  return {true, "50/50 instances, " + std::to_string(checked) + " values identical"};
}

Outcome icp_recovery() {
  Rng rng(303);
  double worst_rot = 0.0, worst_trans = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    SceneParams sp;
    sp.points_per_structure = 400;
    const PointCloud source = generate_reference(5000 + static_cast<std::uint64_t>(inst), sp);
    const double yaw = rng.uniform(-10, 10) * M_PI / 180.0;
    Eigen::Vector3d t(rng.normal(), rng.normal(), rng.normal());
    t *= rng.uniform(0, 0.3) / t.norm();
    const RigidTransform truth = RigidTransform::from_yaw(yaw, t);
    const IcpResult r = icp_align(source, apply_transform(source, truth));
    const RigidTransform err = r.transform * truth.inverse();
    worst_rot = std::max(worst_rot, err.rotation_angle());
    worst_trans = std::max(worst_trans, (r.transform.translation - truth.translation).norm());
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "worst rotation error %.2e rad, translation error %.2e m (tol 1e-3)",
                worst_rot, worst_trans);
  return {worst_rot <= 1e-3 && worst_trans <= 1e-3, buf};
}

double mutual_nn_fraction(const Points& a, const Points& b, double radius) {
  PointIndex ia(a), ib(b);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Neighbor nb = ib.nearest(a[i]);
    if (nb.distance <= radius && ia.nearest(b[nb.index]).index == i) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(a.size());
}

Outcome ics_invariance() {
  Rng rng(404);
  double worst = 1.0;
  int passing = 0;
  for (int inst = 0; inst < 30; ++inst) {
    const PointCloud cloud = generate_reference(7000 + static_cast<std::uint64_t>(inst), SceneParams{});
    const RigidTransform t = RigidTransform::from_yaw(
        rng.uniform(-M_PI, M_PI), Eigen::Vector3d(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-1, 1)));
    const double f =
        mutual_nn_fraction(to_ics(cloud).cloud.points, to_ics(apply_transform(cloud, t)).cloud.points, 0.1);
    worst = std::min(worst, f);
    passing += f >= 0.95;
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%d/30 scenes >= 95%% mutual NN within 0.1 m, worst %.1f%%", passing,
                100.0 * worst);
  return {passing == 30, buf};
}

Outcome metric_units() {
  std::vector<std::string> failed;
  // anr examples
  Ranking hundred;
  for (std::uint32_t i = 0; i < 100; ++i) hundred.push_back({i, static_cast<double>(i)});
  std::swap(hundred[0].image_id, hundred[2].image_id);
  if (std::abs(anr({hundred}, {0}, 100) - 0.03) > 1e-15) failed.push_back("anr rank 3 of 100");
  Ranking ten;
  for (std::uint32_t i = 0; i < 10; ++i) ten.push_back({i, static_cast<double>(i)});
  Ranking ten5 = ten;
  std::swap(ten5[0].image_id, ten5[4].image_id);
  if (std::abs(anr({ten, ten5}, {0, 0}, 10) - 0.3) > 1e-15) failed.push_back("anr ranks 1 and 5");
  // top-X examples
  GroundTruth gt;
  gt.queries[0] = {0, 0, {{0, 0, 1, 1}}};
  ChangeReport inside;
  inside.rankings = {{0, Point3(0.5, 0.5, 0), 2.0, 0, false}, {1, Point3(5, 5, 0), 1.0, 0, false}};
  if (top_x_accuracy({inside}, gt, 1) != 1.0) failed.push_back("top-1 inside");
  ChangeReport edge;
  edge.rankings = {{0, Point3(1.0, 0.0, 0), 2.0, 0, false}};
  if (top_x_accuracy({edge}, gt, 1) != 1.0) failed.push_back("top-1 boundary");
  // k-means monotone
  Rng rng(505);
  for (int run = 0; run < 10; ++run) {
    KMeansStats stats;
    KMeansParams p;
    p.words = 64;
    p.seed = static_cast<std::uint64_t>(run);
    train_vocabulary(random_features(rng, 1500, 33), p, &stats);
    for (std::size_t i = 1; i < stats.wcss.size(); ++i) {
      if (stats.wcss[i] > stats.wcss[i - 1]) {
        failed.push_back("k-means run " + std::to_string(run));
        break;
      }
    }
  }
  // FPFH rigid invariance on an analytic curved surface
  PointCloud surf;
  for (int i = 0; i < 4000; ++i) {
    const double x = rng.uniform(-2, 2), y = rng.uniform(-2, 2);
    surf.points.emplace_back(x, y, 0.3 * std::sin(1.3 * x) + 0.15 * x * y - 0.1 * y * y);
    surf.normals.push_back(Point3(-(0.39 * std::cos(1.3 * x) + 0.15 * y), -(0.15 * x - 0.2 * y), 1.0).normalized());
  }
  FpfhEstimator base(surf, 0.5);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
    RigidTransform t;
    t.rotation = Eigen::AngleAxisd(rng.uniform(-M_PI, M_PI), axis.normalized()).toRotationMatrix();
    t.translation = Eigen::Vector3d(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
    const PointCloud moved = apply_transform(surf, t);
    FpfhEstimator est(moved, 0.5);
    for (int k = 0; k < 20; ++k) {
      const std::size_t idx = rng.below(surf.size());
      const Descriptor a = base.at_index(idx), b = est.at(t.apply(surf.points[idx]));
      double l2 = 0.0;
      for (std::size_t d = 0; d < a.size(); ++d) l2 += (double(a[d]) - b[d]) * (double(a[d]) - b[d]);
      worst = std::max(worst, std::sqrt(l2));
    }
  }
  if (!(worst < 1e-6)) failed.push_back("FPFH invariance");
  char buf[160];
  std::snprintf(buf, sizeof(buf), "anr/top-X examples, 10 monotone k-means runs, FPFH worst L2 %.1e", worst);
  std::string detail = buf;
  for (const auto& f : failed) detail += "; failed: " + f;
  return {failed.empty(), detail};
}

}  // namespace

int main() {
  report("NBNN oracle equivalence", 10, nbnn_oracle);
  report("LoC oracle equivalence", 5, loc_oracle);
  report("ICP recovery", 30, icp_recovery);
  report("ICS two-view invariance", 30, ics_invariance);

  const BenchmarkParams with_ics = benchmark_params(PipelineConfig{});
  BenchmarkResult bench;
  double bench_secs = 0.0;
  {
    const auto t0 = std::chrono::steady_clock::now();
    bench = run_benchmark(with_ics);
    bench_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  const double top5 = top_x_accuracy(bench.reports, bench.truth, 5);
  // both end-to-end criteria share one run; each is held to the full run time
  report("End-to-end VL (50 scenes, 10-image DB, FPFH, W=64)", 120, [&] {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "top-1 localization %.1f%% (need >= 90%%), ANR %.3f (need <= 0.05)",
                  100.0 * bench.top1_localization, bench.anr);
    return Outcome{bench.top1_localization >= 0.9 && bench.anr <= 0.05, buf};
  }, bench_secs);
  report("End-to-end ICD (50 insertion scenes)", 120, [&] {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "top-5 keypoint-in-box %.1f%% (need >= 80%%)", 100.0 * top5);
    return Outcome{top5 >= 0.8, buf};
  }, bench_secs);
  report("ICS ablation direction", 0, [&] {
    BenchmarkParams without = with_ics;
    without.bow.use_ics = false;
    const BenchmarkResult raw = run_benchmark(without);
    const double raw_top5 = top_x_accuracy(raw.reports, raw.truth, 5);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "top-5 with ICS %.1f%%, without %.1f%% (need without < with)", 100.0 * top5,
                  100.0 * raw_top5);
    return Outcome{raw_top5 < top5, buf};
  });
  report("Metric unit checks", 0, metric_units);

  std::printf("%s: %d criteria failed\n", g_failures == 0 ? "ALL PASS" : "SOME FAIL", g_failures);
  return g_failures == 0 ? 0 : 1;
}
