#include "changeret/change.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>

#include "changeret/atomic_file.hpp"
#include "changeret/error.hpp"
#include "json.hpp"

namespace changeret {

void GridSpec::validate() const {
  if (!(x_bar > 0.0) || !(y_bar > 0.0) || !std::isfinite(x_bar) || !std::isfinite(y_bar)) {
    throw Error(Errc::kPrecondition, "grid spec needs positive finite x_bar and y_bar");
  }
}

namespace {

int interval(double v, double bar) {
  if (v <= -bar) return 0;
  if (v <= 0.0) return 1;
  if (v <= bar) return 2;
  return 3;
}

double norm_of(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(s);
}

}  // namespace

int grid_cell(const Point3& p, const GridSpec& g) {
  return 4 * interval(p.y(), g.y_bar) + interval(p.x(), g.x_bar);
}

GridSpec compute_grid_spec(const std::vector<const Points*>& keypoint_sets) {
  double sx = 0.0, sy = 0.0;
  std::size_t n = 0;
  for (const Points* set : keypoint_sets) {
    for (const auto& p : *set) {
      sx += std::abs(p.x());
      sy += std::abs(p.y());
      ++n;
    }
  }
  if (n == 0) throw Error(Errc::kInsufficientData, "grid spec needs at least one keypoint");
  GridSpec g{sx / static_cast<double>(n), sy / static_cast<double>(n)};
  if (!(g.x_bar > 0.0) || !(g.y_bar > 0.0)) {
    throw Error(Errc::kDegenerate, "keypoints have no horizontal spread; grid spec undefined");
  }
  return g;
}

GridSpec compute_grid_spec(const std::vector<BowImage>& training_images) {
  std::vector<const Points*> sets;
  for (const auto& img : training_images) sets.push_back(&img.keypoints());
  return compute_grid_spec(sets);
}

ReferenceView view_of(const BowImage& image) {
  return {&image.features.keypoints, &image.words,
          image.has_descriptors() ? &image.features : nullptr};
}

ReferenceView view_of(const InvertedIndex::Entry& entry) {
  return {&entry.keypoints, &entry.words, entry.raw.values.empty() ? nullptr : &entry.raw};
}

namespace {

std::span<const float> reference_vector(const ReferenceView& ref, std::size_t i,
                                        const Vocabulary& vocab, ReferenceSide side) {
  if (side == ReferenceSide::kRaw) return ref.raw->row(i);
  return vocab.exemplar((*ref.words)[i]);
}

void check_reference(const ReferenceView& ref, const BowImage& query, const Vocabulary& vocab,
                     ReferenceSide side) {
  if (!query.has_descriptors()) throw Error(Errc::kPrecondition, "query needs raw descriptors");
  if (query.features.dim != vocab.dim()) {
    throw Error(Errc::kMismatch, "query and vocabulary descriptor dimensions differ");
  }
  if (side == ReferenceSide::kRaw) {
    if (ref.raw == nullptr) throw Error(Errc::kPrecondition, "raw mode needs reference descriptors");
    if (ref.raw->dim != query.features.dim) {
      throw Error(Errc::kMismatch, "query and reference descriptor dimensions differ");
    }
  }
}

}  // namespace

double sentinel_value(const BowImage& query, const std::vector<ReferenceView>& refs,
                      const Vocabulary& vocab, ReferenceSide side) {
  double m = 0.0;
  for (std::size_t i = 0; i < query.size(); ++i) m = std::max(m, norm_of(query.features.row(i)));
  for (const auto& ref : refs) {
    for (std::size_t i = 0; i < ref.words->size(); ++i) {
      m = std::max(m, norm_of(reference_vector(ref, i, vocab, side)));
    }
  }
  return 2.0 * m;
}

std::vector<LocEntry> compute_loc(const BowImage& query, const ReferenceView& reference,
                                  const GridSpec& g, const Vocabulary& vocab, ReferenceSide side,
                                  double sentinel) {
  g.validate();
  check_reference(reference, query, vocab, side);
  if (!(sentinel > 0.0)) sentinel = sentinel_value(query, {reference}, vocab, side);

  std::array<std::vector<std::size_t>, 16> by_cell;
  const Points& ref_kp = *reference.keypoints;
  for (std::size_t i = 0; i < ref_kp.size(); ++i) by_cell[grid_cell(ref_kp[i], g)].push_back(i);

  std::vector<LocEntry> out;
  out.reserve(query.size());
  for (std::size_t f = 0; f < query.size(); ++f) {
    LocEntry e;
    e.feature = f;
    e.keypoint = query.keypoints()[f];
    e.cell = grid_cell(e.keypoint, g);
    const auto& candidates = by_cell[e.cell];
    if (candidates.empty()) {
      e.loc = sentinel;
      e.sentinel = true;
    } else {
      double best = std::numeric_limits<double>::infinity();
      const auto q = query.features.row(f);
      for (auto r : candidates) best = std::min(best, l2_distance(q, reference_vector(reference, r, vocab, side)));
      e.loc = best;
    }
    out.push_back(e);
  }
  return out;
}

std::vector<LocEntry> compute_loc(const BowImage& query, const BowImage& reference,
                                  const GridSpec& g, const Vocabulary& vocab, ReferenceSide side) {
  return compute_loc(query, view_of(reference), g, vocab, side);
}

void rank_entries(std::vector<LocEntry>& entries) {
  std::sort(entries.begin(), entries.end(), [](const LocEntry& a, const LocEntry& b) {
    return a.loc > b.loc || (a.loc == b.loc && a.feature < b.feature);
  });
}

ChangeReport detect_changes(const BowImage& query, const InvertedIndex& index, const GridSpec& g,
                            const DetectParams& params) {
  if (index.empty()) throw Error(Errc::kPrecondition, "reference index is empty");
  if (params.n_hypotheses == 0) throw Error(Errc::kPrecondition, "need at least one hypothesis");
  ChangeReport report;
  report.query_id = query.id;
  const Ranking ranking = nbnn_localize(query, index, params.n_hypotheses, params.mode);
  std::vector<ReferenceView> refs;
  for (const auto& r : ranking) {
    report.hypotheses.push_back(r.image_id);
    refs.push_back(view_of(*index.find(r.image_id)));
  }
  const Vocabulary& vocab = index.vocabulary();
  for (const auto& ref : refs) check_reference(ref, query, vocab, params.side);
  const double sentinel = sentinel_value(query, refs, vocab, params.side);

  std::vector<LocEntry> combined;
  for (const auto& ref : refs) {
    auto locs = compute_loc(query, ref, g, vocab, params.side, sentinel);
    if (combined.empty()) {
      combined = std::move(locs);
      continue;
    }
    for (std::size_t f = 0; f < combined.size(); ++f) {
      // the shared sentinel bounds every measured distance, so min() is safe
      auto& c = combined[f];
      c.loc = std::min(c.loc, locs[f].loc);
      c.sentinel = c.sentinel && locs[f].sentinel;
    }
  }
  rank_entries(combined);
  report.rankings = std::move(combined);
  return report;
}

void write_report(const ChangeReport& report, const std::filesystem::path& path) {
  nlohmann::json j;
  j["query_id"] = report.query_id;
  j["hypotheses"] = report.hypotheses;
  auto& changes = j["changes"] = nlohmann::json::array();
  for (const auto& e : report.rankings) {
    changes.push_back({{"feature", e.feature},
                       {"x", e.keypoint.x()},
                       {"y", e.keypoint.y()},
                       {"z", e.keypoint.z()},
                       {"loc", e.loc},
                       {"cell", e.cell},
                       {"sentinel", e.sentinel}});
  }
  write_atomically(path, std::ios::out, [&](std::ostream& os) { os << j.dump(1) << '\n'; });
}

ChangeReport read_report(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::kIo, "cannot open " + path.string());
  ChangeReport report;
  try {
    const auto j = nlohmann::json::parse(is);
    report.query_id = j.at("query_id").get<std::uint32_t>();
    report.hypotheses = j.at("hypotheses").get<std::vector<std::uint32_t>>();
    std::size_t i = 0;
    for (const auto& c : j.at("changes")) {
      LocEntry e;
      e.feature = c.contains("feature") ? c.at("feature").get<std::size_t>() : i;
      ++i;
      e.keypoint = Point3(c.at("x").get<double>(), c.at("y").get<double>(), c.at("z").get<double>());
      e.loc = c.at("loc").get<double>();
      e.cell = c.at("cell").get<int>();
      e.sentinel = c.at("sentinel").get<bool>();
      report.rankings.push_back(e);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::kParse, path.string() + ": " + ex.what());
  }
  return report;
}

void write_loc_table(const ChangeReport& report, const std::filesystem::path& path) {
  write_atomically(path, std::ios::out, [&](std::ostream& os) {
    os << "# query " << report.query_id << "\n# rank loc sentinel cell x y z\n";
    os.precision(10);
    for (std::size_t r = 0; r < report.rankings.size(); ++r) {
      const auto& e = report.rankings[r];
      os << r + 1 << ' ' << e.loc << ' ' << (e.sentinel ? 1 : 0) << ' ' << e.cell << ' '
         << e.keypoint.x() << ' ' << e.keypoint.y() << ' ' << e.keypoint.z() << '\n';
    }
  });
}

}  // namespace changeret
