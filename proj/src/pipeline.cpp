#include "changeret/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <memory>

#include "changeret/atomic_file.hpp"
#include "changeret/error.hpp"
#include "changeret/rng.hpp"

namespace changeret {

namespace fs = std::filesystem;

ScanSequence load_scan_sequence(const fs::path& scan_dir, const fs::path& odometry_file) {
  if (!fs::is_directory(scan_dir)) throw Error(Errc::kConfig, "scan directory not found: " + scan_dir.string());
  if (!fs::is_regular_file(odometry_file)) {
    throw Error(Errc::kConfig, "odometry file not found: " + odometry_file.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(scan_dir)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".xyz" || ext == ".ply")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  ScanSequence seq;
  std::ifstream in(odometry_file);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    double v[13];
    int got = 0;
    while (got < 13 && ls >> v[got]) ++got;
    if (got == 0 && ls.eof()) continue;
    std::string extra;
    if (got != 13 || (ls >> extra)) {
      throw Error(Errc::kParse, odometry_file.string() + ":" + std::to_string(lineno) +
                                    ": expected 13 numbers (timestamp, 3x4 pose)");
    }
    RigidTransform t;
    t.rotation << v[1], v[2], v[3], v[5], v[6], v[7], v[9], v[10], v[11];
    t.translation << v[4], v[8], v[12];
    if (!t.is_valid(1e-6)) {
      throw Error(Errc::kParse, odometry_file.string() + ":" + std::to_string(lineno) + ": rotation is not orthonormal");
    }
    seq.timestamps.push_back(v[0]);
    seq.odometry.push_back(t);
  }
  if (files.size() != seq.odometry.size()) {
    throw Error(Errc::kMismatch, std::to_string(files.size()) + " scans but " +
                                     std::to_string(seq.odometry.size()) + " odometry entries");
  }
  for (const auto& f : files) seq.scans.push_back(load_cloud(f));
  seq.validate();
  return seq;
}

void save_scan_sequence(const ScanSequence& seq, const fs::path& scan_dir, const fs::path& odometry_file) {
  seq.validate();
  fs::create_directories(scan_dir);
  for (std::size_t i = 0; i < seq.scans.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scan_%04zu.xyz", i);
    save_cloud(seq.scans[i], scan_dir / name);
  }
  write_atomically(odometry_file, std::ios::out, [&](std::ostream& os) {
    os << std::setprecision(17);
    for (std::size_t i = 0; i < seq.scans.size(); ++i) {
      const auto& t = seq.odometry[i];
      os << seq.timestamps[i];
      for (int r = 0; r < 3; ++r) {
        os << ' ' << t.rotation(r, 0) << ' ' << t.rotation(r, 1) << ' ' << t.rotation(r, 2) << ' ' << t.translation(r);
      }
      os << '\n';
    }
  });
}

std::vector<std::uint32_t> database_for(std::size_t i, const BenchmarkParams& params) {
  if (params.db_size == 0 || params.db_size > params.n_scenes) {
    throw Error(Errc::kConfig, "database size must be in [1, n_scenes]");
  }
  std::vector<std::uint32_t> others;
  for (std::size_t j = 0; j < params.n_scenes; ++j) {
    if (j != i) others.push_back(static_cast<std::uint32_t>(j));
  }
  Rng rng(params.seed * 7919 + i);
  for (std::size_t k = 0; k + 1 < params.db_size; ++k) {
    const std::size_t pick = k + static_cast<std::size_t>(rng.below(others.size() - k));
    std::swap(others[k], others[pick]);
  }
  others.resize(params.db_size - 1);
  others.push_back(static_cast<std::uint32_t>(i));
  std::sort(others.begin(), others.end());
  return others;
}

BenchmarkParams benchmark_params(const PipelineConfig& config) {
  BenchmarkParams p;
  p.scene = config.scene;
  p.scene.ics = config.ics;
  p.bow = config.bow_params();
  p.kmeans = config.kmeans;
  p.detect = config.detect;
  return p;
}

BenchmarkResult run_benchmark(const BenchmarkParams& params) {
  SceneParams ref_params = params.scene;
  ref_params.insert_object = false;

  // vocabulary and grid from disjoint training scenes
  DescriptorSet training;
  std::vector<BowImage> training_images;
  std::vector<Points> training_keypoints;
  for (std::size_t t = 0; t < params.n_training; ++t) {
    const PointCloud cloud = generate_reference(params.training_seed + t, ref_params);
    PointCloud frame = params.bow.use_ics ? to_ics(cloud, params.bow.ics).cloud : cloud;
    const Points kps = sample_keypoints(frame, params.bow.keypoints);
    const DescriptorSet d = extract_descriptors(frame, kps, params.bow.method);
    if (training.dim == 0) training.dim = d.dim;
    training.values.insert(training.values.end(), d.values.begin(), d.values.end());
    training.keypoints.insert(training.keypoints.end(), d.keypoints.begin(), d.keypoints.end());
    training_keypoints.push_back(kps);
  }
  auto vocab = std::make_shared<const Vocabulary>(train_vocabulary(training, params.kmeans));
  std::vector<const Points*> kp_sets;
  for (const auto& k : training_keypoints) kp_sets.push_back(&k);

  BenchmarkResult result;
  result.grid = compute_grid_spec(kp_sets);

  std::vector<BowImage> references;
  std::vector<BowImage> queries;
  for (std::size_t i = 0; i < params.n_scenes; ++i) {
    const auto id = static_cast<std::uint32_t>(i);
    const SynthScene scene = generate_scene(params.seed + i, params.scene);
    references.push_back(build_bow_image(scene.reference, params.bow, *vocab, id).image);
    queries.push_back(build_bow_image(scene.query, params.bow, *vocab, id).image);
    QueryTruth truth;
    truth.id = id;
    truth.gt_ref_id = id;
    if (!scene.object.empty()) {
      truth.boxes.push_back(Box2::of(params.bow.use_ics ? scene.object_box_ics : scene.object_box_raw));
    }
    result.truth.queries.emplace(id, truth);
  }

  std::size_t top1 = 0;
  for (std::size_t i = 0; i < params.n_scenes; ++i) {
    InvertedIndex index(vocab);
    for (auto id : database_for(i, params)) index.add(references[id]);
    Ranking ranking = nbnn_localize(queries[i], index, 0, params.detect.mode);
    if (ranking.front().image_id == i) ++top1;
    result.rankings.push_back(std::move(ranking));
    result.gt_ids.push_back(static_cast<std::uint32_t>(i));
    result.reports.push_back(detect_changes(queries[i], index, result.grid, params.detect));
  }
  result.anr = anr(result.rankings, result.gt_ids, params.db_size);
  result.top1_localization = static_cast<double>(top1) / static_cast<double>(params.n_scenes);
  return result;
}

}  // namespace changeret
