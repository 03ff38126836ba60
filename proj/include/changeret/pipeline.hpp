#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "changeret/change.hpp"
#include "changeret/config.hpp"
#include "changeret/eval.hpp"
#include "changeret/retrieval.hpp"
#include "changeret/synth.hpp"
#include "changeret/vocabulary.hpp"

namespace changeret {

/**
 * Odometry text file: one line per scan,
 * `timestamp r00 r01 r02 tx r10 r11 r12 ty r20 r21 r22 tz`, '#' comments.
 * Scans are the .xyz/.ply files of the scan directory in name order.
 */
ScanSequence load_scan_sequence(const std::filesystem::path& scan_dir,
                                const std::filesystem::path& odometry_file);
/// Writes scan_NNNN.xyz files and the odometry file.
void save_scan_sequence(const ScanSequence& seq, const std::filesystem::path& scan_dir,
                        const std::filesystem::path& odometry_file);

/**
 * @brief End-to-end synthetic change-retrieval run.
 *
 * Scene i contributes reference image i and query i. Each query is searched
 * against a database holding its own reference plus db_size - 1 other
 * references chosen by seed. The vocabulary and grid spec come from a
 * disjoint set of training scenes.
 */
struct BenchmarkParams {
  std::size_t n_scenes = 50;
  std::size_t db_size = 10;
  std::size_t n_training = 10;
  std::uint64_t seed = 1;
  std::uint64_t training_seed = 1'000'003;  ///< training scene t uses training_seed + t
  SceneParams scene;
  BowParams bow;
  KMeansParams kmeans;
  DetectParams detect;
};

struct BenchmarkResult {
  std::vector<Ranking> rankings;
  std::vector<std::uint32_t> gt_ids;
  std::vector<ChangeReport> reports;
  GroundTruth truth;
  GridSpec grid;
  double anr = 0.0;
  double top1_localization = 0.0;
};

/// Database members for query `i`: i itself plus distinct others, sorted.
std::vector<std::uint32_t> database_for(std::size_t i, const BenchmarkParams& params);

/// Pipeline settings from `config`; counts and seed keep their defaults.
BenchmarkParams benchmark_params(const PipelineConfig& config);

BenchmarkResult run_benchmark(const BenchmarkParams& params);

}  // namespace changeret
