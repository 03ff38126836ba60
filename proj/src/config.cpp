#include "changeret/config.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "changeret/error.hpp"

namespace changeret {

namespace {

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  errno = 0;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(x)) {
    throw Error(Errc::kConfig, "bad number for '" + key + "': " + v);
  }
  return x;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  char* end = nullptr;
  errno = 0;
  if (v.empty() || v.front() == '-') throw Error(Errc::kConfig, "bad integer for '" + key + "': " + v);
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (*end != '\0' || errno == ERANGE) throw Error(Errc::kConfig, "bad integer for '" + key + "': " + v);
  return x;
}

int to_int(const std::string& key, const std::string& v) {
  const std::uint64_t x = to_u64(key, v);
  if (x > 1'000'000'000ULL) throw Error(Errc::kConfig, "integer out of range for '" + key + "': " + v);
  return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error(Errc::kConfig, "bad boolean for '" + key + "': " + v);
}

// shortest text that parses back to the same double
std::string fmt(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

struct Field {
  const char* key;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
};

#define DBL(KEY, MEMBER)                                                         \
  Field{KEY, [](const PipelineConfig& c) { return fmt(c.MEMBER); },             \
        [](PipelineConfig& c, const std::string& k, const std::string& v) { c.MEMBER = to_double(k, v); }}
#define INT(KEY, MEMBER)                                                         \
  Field{KEY, [](const PipelineConfig& c) { return std::to_string(c.MEMBER); },  \
        [](PipelineConfig& c, const std::string& k, const std::string& v) { c.MEMBER = to_int(k, v); }}
#define SIZE(KEY, MEMBER)                                                        \
  Field{KEY, [](const PipelineConfig& c) { return std::to_string(c.MEMBER); },  \
        [](PipelineConfig& c, const std::string& k, const std::string& v) {     \
          c.MEMBER = static_cast<std::size_t>(to_u64(k, v));                     \
        }}
#define U64(KEY, MEMBER)                                                         \
  Field{KEY, [](const PipelineConfig& c) { return std::to_string(c.MEMBER); },  \
        [](PipelineConfig& c, const std::string& k, const std::string& v) { c.MEMBER = to_u64(k, v); }}
#define BOOL(KEY, MEMBER)                                                        \
  Field{KEY, [](const PipelineConfig& c) { return std::string(c.MEMBER ? "true" : "false"); }, \
        [](PipelineConfig& c, const std::string& k, const std::string& v) { c.MEMBER = to_bool(k, v); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      SIZE("keypoints.count", tdf.n_keypoints),
      DBL("keypoints.region_size", tdf.region_size),
      SIZE("keypoints.grid_dim", tdf.grid_dim),
      DBL("keypoints.truncation", tdf.truncation),
      U64("keypoints.seed", tdf.seed),
      DBL("fpfh.radius", fpfh.radius),
      DBL("fpfh.normal_radius", fpfh.normal_radius),
      BOOL("ics.enabled", use_ics),
      DBL("ics.resolution_deg", ics.resolution_deg),
      INT("ics.refine_factor", ics.refine_factor),
      INT("ics.refine_candidates", ics.refine_candidates),
      DBL("ics.bin_width", ics.bin_width),
      DBL("ics.low_contrast_ratio", ics.low_contrast_ratio),
      SIZE("vocabulary.words", kmeans.words),
      INT("vocabulary.max_iters", kmeans.max_iters),
      U64("vocabulary.seed", kmeans.seed),
      DBL("grid.x_bar", grid_x_bar),
      DBL("grid.y_bar", grid_y_bar),
      SIZE("detect.hypotheses", detect.n_hypotheses),
      Field{"detect.reference",
            [](const PipelineConfig& c) {
              return std::string(c.detect.side == ReferenceSide::kRaw ? "raw" : "exemplar");
            },
            [](PipelineConfig& c, const std::string& k, const std::string& v) {
              if (v == "raw") {
                c.detect.side = ReferenceSide::kRaw;
              } else if (v == "exemplar") {
                c.detect.side = ReferenceSide::kExemplar;
              } else {
                throw Error(Errc::kConfig, "'" + k + "' must be exemplar or raw");
              }
            }},
      Field{"nbnn.mode",
            [](const PipelineConfig& c) {
              return std::string(c.detect.mode == NbnnMode::kExact ? "exact" : "word");
            },
            [](PipelineConfig& c, const std::string& k, const std::string& v) {
              if (v == "exact") {
                c.detect.mode = NbnnMode::kExact;
              } else if (v == "word") {
                c.detect.mode = NbnnMode::kWordRestricted;
              } else {
                throw Error(Errc::kConfig, "'" + k + "' must be exact or word");
              }
            }},
      INT("icp.max_iters", icp.max_iters),
      DBL("icp.max_corr_dist", icp.max_corr_dist),
      DBL("icp.tol", icp.tol),
      DBL("map.segment_length", map.segment_length),
      DBL("map.dedup_voxel", map.dedup_voxel),
      DBL("pairs.dt", pairs.dt),
      SIZE("pairs.count", pairs.n_pairs),
      DBL("pairs.crop_size", pairs.crop_size),
      DBL("pairs.overlap_dist", pairs.overlap_dist),
      DBL("pairs.max_rmse", pairs.max_rmse),
      U64("pairs.seed", pairs.seed),
      INT("synth.structures", scene.n_structures),
      DBL("synth.extent", scene.extent),
      INT("synth.points_per_structure", scene.points_per_structure),
      DBL("synth.noise_sigma", scene.noise_sigma),
      BOOL("synth.insert_object", scene.insert_object),
      DBL("synth.view_yaw_range", scene.view_yaw_range),
      DBL("synth.view_translation_range", scene.view_translation_range),
      DBL("synth.dropout", scene.dropout),
      INT("synth.object_points", scene.object_points),
  };
  return table;
}

#undef DBL
#undef INT
#undef SIZE
#undef U64
#undef BOOL

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(*this, key, value);
      return;
    }
  }
  throw Error(Errc::kConfig, "unknown config key: " + key);
}

void PipelineConfig::validate() const {
  tdf.validate();
  ics.validate();
  scene.validate();
  if (!(fpfh.radius > 0.0) || !(fpfh.normal_radius > 0.0)) {
    throw Error(Errc::kConfig, "fpfh radii must be positive");
  }
  if (kmeans.words == 0) throw Error(Errc::kConfig, "vocabulary.words must be positive");
  if (kmeans.max_iters <= 0) throw Error(Errc::kConfig, "vocabulary.max_iters must be positive");
  if ((grid_x_bar > 0.0) != (grid_y_bar > 0.0)) {
    throw Error(Errc::kConfig, "grid.x_bar and grid.y_bar must be given together");
  }
  if (detect.n_hypotheses == 0) throw Error(Errc::kConfig, "detect.hypotheses must be positive");
  if (icp.max_iters <= 0 || !(icp.max_corr_dist > 0.0) || !(icp.tol >= 0.0)) {
    throw Error(Errc::kConfig, "invalid icp parameters");
  }
  if (!(map.segment_length > 0.0) || !(map.dedup_voxel > 0.0)) {
    throw Error(Errc::kConfig, "map.segment_length and map.dedup_voxel must be positive");
  }
  if (!(pairs.dt > 0.0) || pairs.n_pairs == 0 || !(pairs.overlap_dist > 0.0) || !(pairs.max_rmse > 0.0)) {
    throw Error(Errc::kConfig, "invalid pair mining parameters");
  }
}

std::string PipelineConfig::to_text() const {
  std::ostringstream os;
  for (const auto& f : fields()) os << f.key << " = " << f.get(*this) << "\n";
  return os.str();
}

BowParams PipelineConfig::bow_params() const {
  BowParams p;
  p.keypoints = tdf;
  p.method = fpfh;
  p.ics = ics;
  p.use_ics = use_ics;
  return p;
}

PipelineConfig parse_config(const std::string& text, const std::string& origin) {
  PipelineConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(Errc::kConfig, origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    try {
      cfg.set(key, value);
    } catch (const Error& e) {
      throw Error(Errc::kConfig, origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIo, "cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

}  // namespace changeret
