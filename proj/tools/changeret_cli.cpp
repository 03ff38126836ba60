// Command-line front end: one subcommand per pipeline stage.
//
// Exit status: 0 success, 1 usage or configuration error, 2 data error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "changeret/change.hpp"
#include "changeret/config.hpp"
#include "changeret/error.hpp"
#include "changeret/eval.hpp"
#include "changeret/pipeline.hpp"
#include "changeret/synth.hpp"

namespace fs = std::filesystem;
using namespace changeret;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct Globals {
  std::string config_path;
  std::vector<std::string> overrides;

  PipelineConfig load() const {
    PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : load_config(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Error(Errc::kConfig, "--set expects key=value, got " + kv);
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
  }
};

std::string numbered(const std::string& stem, std::size_t i, const std::string& ext) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "_%04zu", i);
  return stem + buf + ext;
}

bool is_dsc1(const fs::path& p) { return p.extension() == ".dsc1"; }

GridSpec grid_for(const PipelineConfig& cfg, const InvertedIndex& index) {
  if (cfg.grid_x_bar > 0.0) return GridSpec{cfg.grid_x_bar, cfg.grid_y_bar};
  std::vector<const Points*> sets;
  for (const auto& e : index.images()) sets.push_back(&e.keypoints);
  return compute_grid_spec(sets);
}

BowImage load_query(const PipelineConfig& cfg, const fs::path& path, const Vocabulary& vocab,
                    std::uint32_t id, bool no_ics) {
  if (is_dsc1(path)) {
    if (no_ics) {
      throw Error(Errc::kConfig, "--no-ics applies to cloud queries; extract the features with --no-ics instead");
    }
    return make_bow_image(read_dsc1(path), vocab, id);
  }
  BowParams bow = cfg.bow_params();
  bow.use_ics = bow.use_ics && !no_ics;
  return build_bow_image(load_cloud(path), bow, vocab, id).image;
}

void print_metrics(const BenchmarkResult& r, std::size_t db_size) {
  std::printf("localization top-1 accuracy: %.4f\n", r.top1_localization);
  std::printf("ANR: %.4f (x100: %.2f)\n", r.anr, 100.0 * r.anr);
  std::printf("change detection top-1 accuracy: %.4f\n", top_x_accuracy(r.reports, r.truth, 1));
  std::printf("change detection top-5 accuracy: %.4f\n", top_x_accuracy(r.reports, r.truth, 5));
  std::printf("database size: %zu, queries: %zu\n", db_size, r.reports.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-cloud viewpoint localization and change retrieval"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "Pipeline config file (key = value)");
  app.add_option("--set", g.overrides, "Override one config key: key=value (repeatable)");

  std::function<void()> action;

  // print-config
  auto* print_cfg = app.add_subcommand("print-config", "Print the effective configuration");
  print_cfg->callback([&] { action = [&] { std::cout << g.load().to_text(); }; });

  // synth
  struct {
    std::uint64_t seed = 1;
    std::size_t count = 1;
    std::string out;
  } synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate reference/query scene pairs with ground truth");
  synth_cmd->add_option("--seed", synth.seed, "Seed of the first scene; scene i uses seed + i");
  synth_cmd->add_option("--count", synth.count, "Number of scenes")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->callback([&] {
    action = [&] {
      const PipelineConfig cfg = g.load();
      SceneParams params = cfg.scene;
      params.ics = cfg.ics;
      fs::create_directories(synth.out);
      GroundTruth ics_truth, raw_truth;
      for (std::size_t i = 0; i < synth.count; ++i) {
        const SynthScene scene = generate_scene(synth.seed + i, params);
        save_cloud(scene.reference, fs::path(synth.out) / numbered("ref", i, ".ply"));
        save_cloud(scene.query, fs::path(synth.out) / numbered("query", i, ".ply"));
        QueryTruth t;
        t.id = static_cast<std::uint32_t>(i);
        t.gt_ref_id = t.id;
        QueryTruth raw = t;
        if (!scene.object.empty()) {
          t.boxes.push_back(Box2::of(scene.object_box_ics));
          raw.boxes.push_back(Box2::of(scene.object_box_raw));
        }
        ics_truth.queries.emplace(t.id, t);
        raw_truth.queries.emplace(raw.id, raw);
      }
      write_ground_truth(ics_truth, fs::path(synth.out) / "ground_truth.json");
      write_ground_truth(raw_truth, fs::path(synth.out) / "ground_truth_raw.json");
      std::printf("wrote %zu scenes to %s\n", synth.count, synth.out.c_str());
    };
  });

  // synth-scans
  struct {
    std::uint64_t seed = 1;
    CorridorParams params;
    std::string out;
  } corridor;
  auto* corridor_cmd = app.add_subcommand("synth-scans", "Generate a corridor scan sequence with odometry");
  corridor_cmd->add_option("--seed", corridor.seed, "Seed");
  corridor_cmd->add_option("--scans", corridor.params.n_scans, "Number of scans")->check(CLI::PositiveNumber);
  corridor_cmd->add_option("--spacing", corridor.params.spacing, "Meters between scans");
  corridor_cmd->add_option("--noise", corridor.params.noise_sigma, "Per-coordinate noise sigma");
  corridor_cmd->add_option("--out", corridor.out, "Output directory (scans/ and odometry.txt)")->required();
  corridor_cmd->callback([&] {
    action = [&] {
      const CorridorSequence c = generate_corridor(corridor.seed, corridor.params);
      save_scan_sequence(c.sequence, fs::path(corridor.out) / "scans", fs::path(corridor.out) / "odometry.txt");
      std::printf("wrote %zu scans to %s\n", c.sequence.scans.size(), corridor.out.c_str());
    };
  });

  // build-map
  struct {
    std::string scans, odometry, out;
  } build;
  auto* build_cmd = app.add_subcommand("build-map", "Fuse a scan sequence into local maps");
  build_cmd->add_option("--scans", build.scans, "Directory of .xyz/.ply scans")->required();
  build_cmd->add_option("--odometry", build.odometry, "Odometry text file")->required();
  build_cmd->add_option("--out", build.out, "Output directory for map_NNNN.ply")->required();
  build_cmd->callback([&] {
    action = [&] {
      const PipelineConfig cfg = g.load();
      const ScanSequence seq = load_scan_sequence(build.scans, build.odometry);
      LocalMapParams params = cfg.map;
      params.icp = cfg.icp;
      const auto maps = build_local_map(seq, params);
      fs::create_directories(build.out);
      for (std::size_t i = 0; i < maps.size(); ++i) {
        save_cloud(maps[i].cloud, fs::path(build.out) / numbered("map", i, ".ply"), CloudFormat::kPlyAscii);
        std::printf("map %zu: scans %zu-%zu, %zu points, travel %.2f m\n", i, maps[i].first_scan,
                    maps[i].last_scan, maps[i].cloud.size(), maps[i].travel_distance);
      }
    };
  });

  // mine-pairs
  struct {
    std::string scans, odometry, out;
  } mine;
  auto* mine_cmd = app.add_subcommand("mine-pairs", "Mine positive/negative TDF training pairs");
  mine_cmd->add_option("--scans", mine.scans, "Directory of .xyz/.ply scans")->required();
  mine_cmd->add_option("--odometry", mine.odometry, "Odometry text file")->required();
  mine_cmd->add_option("--out", mine.out, "Output TPR1 file")->required();
  mine_cmd->callback([&] {
    action = [&] {
      const PipelineConfig cfg = g.load();
      const ScanSequence seq = load_scan_sequence(mine.scans, mine.odometry);
      PairMiningParams params = cfg.pairs;
      params.tdf = cfg.tdf;
      params.icp = cfg.icp;
      const auto pairs = mine_training_pairs(seq, params);
      write_pairs(pairs, mine.out);
      write_pair_metadata(params, mine.out);
      std::size_t positives = 0;
      for (const auto& p : pairs) positives += p.label == PairLabel::kPositive ? 1 : 0;
      std::printf("wrote %zu pairs (%zu positive) to %s\n", pairs.size(), positives, mine.out.c_str());
    };
  });

  // extract
  struct {
    std::string cloud, out, method = "fpfh", descriptors;
    bool no_ics = false;
  } extract;
  auto* extract_cmd = app.add_subcommand("extract", "Keypoints and descriptors of one map (DSC1)");
  extract_cmd->add_option("--cloud", extract.cloud, "Input map (.xyz/.ply)")->required();
  extract_cmd->add_option("--out", extract.out, "Output .dsc1 file")->required();
  extract_cmd->add_option("--method", extract.method, "fpfh or external")
      ->check(CLI::IsMember({"fpfh", "external"}));
  extract_cmd->add_option("--descriptors", extract.descriptors, "DSC1 file for --method external");
  extract_cmd->add_flag("--no-ics", extract.no_ics, "Keep the map frame instead of the invariant frame");
  extract_cmd->callback([&] {
    action = [&] {
      const PipelineConfig cfg = g.load();
      PointCloud cloud = load_cloud(extract.cloud);
      IcsAlignment alignment;
      if (cfg.use_ics && !extract.no_ics) {
        IcsResult r = to_ics(cloud, cfg.ics);
        cloud = std::move(r.cloud);
        alignment = r.alignment;
      }
      DescriptorMethod method = cfg.fpfh;
      if (extract.method == "external") {
        if (extract.descriptors.empty()) throw Error(Errc::kConfig, "--method external needs --descriptors");
        method = ExternalDescriptors{extract.descriptors};
      }
      const Points keypoints = sample_keypoints(cloud, cfg.tdf);
      const DescriptorSet set = extract_descriptors(cloud, keypoints, method);
      write_dsc1(set, extract.out);
      std::size_t degenerate = 0;
      for (auto d : set.degenerate) degenerate += d;
      std::printf("%zu keypoints, dim %zu, %zu degenerate, yaw %.3f deg%s\n", set.size(), set.dim, degenerate,
                  alignment.yaw_deg, alignment.low_contrast ? " (low contrast)" : "");
    };
  });

  // train-vocab
  struct {
    std::vector<std::string> features;
    std::string out;
  } train;
  auto* train_cmd = app.add_subcommand("train-vocab", "k-means vocabulary from DSC1 feature files");
  train_cmd->add_option("--features", train.features, "Training .dsc1 files")->required();
  train_cmd->add_option("--out", train.out, "Output VOC1 file")->required();
  train_cmd->callback([&] {
    action = [&] {
      const PipelineConfig cfg = g.load();
      DescriptorSet all;
      for (const auto& f : train.features) {
        const DescriptorSet d = read_dsc1(f);
        if (all.dim == 0) all.dim = d.dim;
        if (d.dim != all.dim) throw Error(Errc::kMismatch, f + ": descriptor dimension differs");
        all.values.insert(all.values.end(), d.values.begin(), d.values.end());
        all.keypoints.insert(all.keypoints.end(), d.keypoints.begin(), d.keypoints.end());
        all.degenerate.insert(all.degenerate.end(), d.degenerate.begin(), d.degenerate.end());
      }
      KMeansStats stats;
      const Vocabulary vocab = train_vocabulary(all, cfg.kmeans, &stats);
      write_vocabulary(vocab, train.out);
      std::printf("%zu words from %zu features, %d iterations%s, wcss %.6g\n", vocab.words(), all.size(),
                  stats.iterations, stats.converged ? " (converged)" : "",
                  stats.wcss.empty() ? 0.0 : stats.wcss.back());
    };
  });

  // index
  struct {
    std::string vocab, out;
    std::vector<std::string> features;
    std::uint32_t first_id = 0;
  } index;
  auto* index_cmd = app.add_subcommand("index", "Inverted index over reference feature files");
  index_cmd->add_option("--vocab", index.vocab, "VOC1 vocabulary")->required();
  index_cmd->add_option("--features", index.features, "Reference .dsc1 files; ids follow argument order")
      ->required();
  index_cmd->add_option("--first-id", index.first_id, "Id of the first reference image");
  index_cmd->add_option("--out", index.out, "Output IDX1 file")->required();
  index_cmd->callback([&] {
    action = [&] {
      auto vocab = std::make_shared<const Vocabulary>(read_vocabulary(index.vocab));
      InvertedIndex idx(vocab);
      std::uint32_t id = index.first_id;
      for (const auto& f : index.features) {
        BowImage img = make_bow_image(read_dsc1(f), *vocab, id++);
        img.tag = fs::path(f).stem().string();
        idx.add(img);
      }
      write_index(idx, index.out, index.vocab);
      std::printf("indexed %zu images, %zu postings\n", idx.images().size(), idx.total_postings());
    };
  });

  // localize
  struct {
    std::string index, query, out, mode;
    std::uint32_t id = 0;
    std::size_t top = 0;
  } loc;
  auto* loc_cmd = app.add_subcommand("localize", "Rank reference images for a query");
  loc_cmd->add_option("--index", loc.index, "IDX1 index")->required();
  loc_cmd->add_option("--query", loc.query, "Query .dsc1 features or map cloud")->required();
  loc_cmd->add_option("--id", loc.id, "Query id written to the ranking");
  loc_cmd->add_option("--top", loc.top, "Keep the top k images (0 = all)");
  loc_cmd->add_option("--mode", loc.mode, "exact or word")->check(CLI::IsMember({"exact", "word"}));
  loc_cmd->add_option("--out", loc.out, "Ranking JSON; without it a rank table goes to stdout");
  loc_cmd->callback([&] {
    action = [&] {
      PipelineConfig cfg = g.load();
      if (!loc.mode.empty()) cfg.set("nbnn.mode", loc.mode);
      const InvertedIndex idx = read_index(loc.index);
      const BowImage query = load_query(cfg, loc.query, idx.vocabulary(), loc.id, false);
      const Ranking ranking = nbnn_localize(query, idx, loc.top, cfg.detect.mode);
      if (loc.out.empty()) {
        for (std::size_t i = 0; i < ranking.size(); ++i) {
          std::printf("%zu\t%u\t%.9g\n", i + 1, ranking[i].image_id, ranking[i].score);
        }
      } else {
        write_ranking(loc.id, ranking, loc.out);
      }
    };
  });

  // detect
  struct {
    std::string index, query, out, plot;
    std::uint32_t id = 0;
    std::size_t hypotheses = 0;
    bool no_ics = false;
  } det;
  auto* det_cmd = app.add_subcommand("detect", "Rank query keypoints by likelihood of change");
  det_cmd->add_option("--index", det.index, "IDX1 index")->required();
  det_cmd->add_option("--query", det.query, "Query .dsc1 features or map cloud")->required();
  det_cmd->add_option("--id", det.id, "Query id written to the report");
  det_cmd->add_option("--hypotheses", det.hypotheses, "Top localization hypotheses compared against");
  det_cmd->add_flag("--no-ics", det.no_ics, "Use the map frame of a cloud query (ablation)");
  det_cmd->add_option("--out", det.out, "Change report JSON")->required();
  det_cmd->add_option("--plot", det.plot, "Also write a gnuplot table of rank vs LoC");
  det_cmd->callback([&] {
    action = [&] {
      PipelineConfig cfg = g.load();
      if (det.hypotheses > 0) cfg.detect.n_hypotheses = det.hypotheses;
      const InvertedIndex idx = read_index(det.index);
      const BowImage query = load_query(cfg, det.query, idx.vocabulary(), det.id, det.no_ics);
      const ChangeReport report = detect_changes(query, idx, grid_for(cfg, idx), cfg.detect);
      write_report(report, det.out);
      if (!det.plot.empty()) write_loc_table(report, det.plot);
      std::size_t sentinels = 0;
      for (const auto& e : report.rankings) sentinels += e.sentinel ? 1 : 0;
      std::printf("query %u: %zu keypoints ranked, %zu in empty cells\n", report.query_id, report.rankings.size(),
                  sentinels);
    };
  });

  // evaluate
  struct {
    std::string truth;
    std::vector<std::string> rankings, reports;
    std::size_t db_size = 0;
    std::vector<std::size_t> top{1, 5};
  } ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "ANR and top-X accuracy against ground truth");
  ev_cmd->add_option("--truth", ev.truth, "Ground-truth JSON")->required();
  ev_cmd->add_option("--rankings", ev.rankings, "Ranking JSON files");
  ev_cmd->add_option("--reports", ev.reports, "Change report JSON files");
  ev_cmd->add_option("--db-size", ev.db_size, "Database size for ANR (default: ranking length)");
  ev_cmd->add_option("--top", ev.top, "X values for top-X accuracy")->check(CLI::PositiveNumber);
  ev_cmd->callback([&] {
    action = [&] {
      const GroundTruth truth = read_ground_truth(ev.truth);
      if (ev.rankings.empty() && ev.reports.empty()) {
        throw Error(Errc::kConfig, "evaluate needs --rankings and/or --reports");
      }
      if (!ev.rankings.empty()) {
        std::vector<Ranking> rankings;
        std::vector<std::uint32_t> gt_ids;
        std::size_t db_size = ev.db_size;
        std::size_t top1 = 0;
        for (const auto& f : ev.rankings) {
          auto [qid, ranking] = read_ranking(f);
          const std::uint32_t gt = truth.at(qid).gt_ref_id;
          if (!ranking.empty() && ranking.front().image_id == gt) ++top1;
          if (ev.db_size == 0) db_size = std::max(db_size, ranking.size());
          rankings.push_back(std::move(ranking));
          gt_ids.push_back(gt);
        }
        const double a = anr(rankings, gt_ids, db_size);
        std::printf("localization top-1 accuracy: %.4f\n",
                    static_cast<double>(top1) / static_cast<double>(rankings.size()));
        std::printf("ANR: %.4f (x100: %.2f)\n", a, 100.0 * a);
      }
      if (!ev.reports.empty()) {
        std::vector<ChangeReport> reports;
        for (const auto& f : ev.reports) reports.push_back(read_report(f));
        for (auto x : ev.top) {
          std::printf("change detection top-%zu accuracy: %.4f\n", x, top_x_accuracy(reports, truth, x));
        }
      }
    };
  });

  // bench
  struct {
    std::size_t scenes = 50, db_size = 10, training = 10;
    std::uint64_t seed = 1;
    bool no_ics = false;
  } bench;
  auto* bench_cmd = app.add_subcommand("bench", "Synthetic end-to-end localization + change detection run");
  bench_cmd->add_option("--scenes", bench.scenes, "Number of scenes (queries)")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--db-size", bench.db_size, "Reference images per query database")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--training", bench.training, "Training scenes for vocabulary and grid")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seed", bench.seed, "Seed of the first scene");
  bench_cmd->add_flag("--no-ics", bench.no_ics, "Skip the invariant frame (ablation)");
  bench_cmd->callback([&] {
    action = [&] {
      PipelineConfig cfg = g.load();
      if (bench.no_ics) cfg.use_ics = false;
      BenchmarkParams params = benchmark_params(cfg);
      params.n_scenes = bench.scenes;
      params.db_size = bench.db_size;
      params.n_training = bench.training;
      params.seed = bench.seed;
      print_metrics(run_benchmark(params), params.db_size);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (action) action();
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::kConfig ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
