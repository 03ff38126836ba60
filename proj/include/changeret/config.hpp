#pragma once

#include <filesystem>
#include <string>

#include "changeret/change.hpp"
#include "changeret/fpfh.hpp"
#include "changeret/ics.hpp"
#include "changeret/registration.hpp"
#include "changeret/retrieval.hpp"
#include "changeret/synth.hpp"
#include "changeret/tdf.hpp"
#include "changeret/vocabulary.hpp"

namespace changeret {

/// Every tunable of the pipeline, loadable from a flat `key = value` file.
struct PipelineConfig {
  TdfConfig tdf;
  FpfhParams fpfh;
  IcsParams ics;
  bool use_ics = true;
  KMeansParams kmeans;
  double grid_x_bar = 0.0;  ///< <= 0: derive from the indexed reference images
  double grid_y_bar = 0.0;
  DetectParams detect;
  IcpParams icp = kScanIcp;  ///< scan-to-map registration of build-map and mine-pairs
  LocalMapParams map;
  PairMiningParams pairs;
  SceneParams scene;

  /// Sets one key; throws Error(kConfig) for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  void validate() const;
  /// Flat `key = value` dump accepted by load_config.
  std::string to_text() const;

  BowParams bow_params() const;
};

/// '#' starts a comment; blank lines ignored; values may be double-quoted.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& text, const std::string& origin = "<config>");

}  // namespace changeret
