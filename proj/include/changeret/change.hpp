#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "changeret/retrieval.hpp"

namespace changeret {

/// Grid partition of the horizontal plane at x = 0, ±x_bar and y = 0, ±y_bar.
struct GridSpec {
  double x_bar = 1.0;
  double y_bar = 1.0;

  void validate() const;
};

/// Cell id in [0, 15] = 4 * iy + ix; intervals (-inf,-b], (-b,0], (0,b], (b,inf).
int grid_cell(const Point3& p, const GridSpec& g);

/// Means of |x| and |y| over all keypoints of the training images.
GridSpec compute_grid_spec(const std::vector<const Points*>& keypoint_sets);
GridSpec compute_grid_spec(const std::vector<BowImage>& training_images);

/// Which side of the reference supplies E(r) in the distance.
enum class ReferenceSide {
  kExemplar,  ///< quantized reference, distance |q - E(r)|
  kRaw,       ///< raw reference descriptor, distance |q - r|
};

struct LocEntry {
  std::size_t feature = 0;  ///< index into the query
  Point3 keypoint = Point3::Zero();
  double loc = 0.0;
  int cell = 0;
  bool sentinel = false;  ///< the reference cell was empty; loc holds the sentinel value
};

/// Reference features visible to compute_loc.
struct ReferenceView {
  const Points* keypoints = nullptr;
  const std::vector<WordId>* words = nullptr;
  const DescriptorSet* raw = nullptr;  ///< required for ReferenceSide::kRaw
};
ReferenceView view_of(const BowImage& image);
ReferenceView view_of(const InvertedIndex::Entry& entry);

/// Largest descriptor norm seen on either side, doubled.
double sentinel_value(const BowImage& query, const std::vector<ReferenceView>& refs,
                      const Vocabulary& vocab, ReferenceSide side);

/**
 * Per query feature, the smallest distance to a reference feature in the same
 * grid cell. Empty cells yield `sentinel` (<= 0 selects the default
 * sentinel_value for this pair) with the flag set. Output is in query order.
 */
std::vector<LocEntry> compute_loc(const BowImage& query, const ReferenceView& reference,
                                  const GridSpec& g, const Vocabulary& vocab,
                                  ReferenceSide side = ReferenceSide::kExemplar,
                                  double sentinel = 0.0);
std::vector<LocEntry> compute_loc(const BowImage& query, const BowImage& reference,
                                  const GridSpec& g, const Vocabulary& vocab,
                                  ReferenceSide side = ReferenceSide::kExemplar);

struct ChangeReport {
  std::uint32_t query_id = 0;
  std::vector<std::uint32_t> hypotheses;
  std::vector<LocEntry> rankings;  ///< descending loc, ties by lowest feature index
};

struct DetectParams {
  std::size_t n_hypotheses = 1;
  NbnnMode mode = NbnnMode::kWordRestricted;
  ReferenceSide side = ReferenceSide::kExemplar;
};

/// Top hypotheses from nbnn_localize, LoC as the minimum over them, ranked.
ChangeReport detect_changes(const BowImage& query, const InvertedIndex& index, const GridSpec& g,
                            const DetectParams& params = {});

/// Orders entries by descending loc, ties by lowest feature index.
void rank_entries(std::vector<LocEntry>& entries);

void write_report(const ChangeReport& report, const std::filesystem::path& path);
ChangeReport read_report(const std::filesystem::path& path);

/// gnuplot-friendly table: rank, loc, sentinel, cell, x, y, z.
void write_loc_table(const ChangeReport& report, const std::filesystem::path& path);

}  // namespace changeret
