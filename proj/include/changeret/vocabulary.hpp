#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "changeret/fpfh.hpp"
#include "changeret/kdtree.hpp"

namespace changeret {

/// 1-based visual word id.
using WordId = std::uint32_t;

/**
 * @brief W exemplar centroids of dimension D with exact nearest-exemplar lookup.
 *
 * Immutable after construction; quantize() is thread-safe.
 */
class Vocabulary {
 public:
  Vocabulary() = default;
  /// `centroids` holds W rows of `dim` values. Throws on non-finite or
  /// duplicate centroids.
  Vocabulary(std::vector<float> centroids, std::size_t dim);

  std::size_t words() const { return words_; }
  std::size_t dim() const { return dim_; }
  const std::vector<float>& data() const { return centroids_; }

  /// L2-nearest exemplar; ties go to the lowest id. Throws Error(kMismatch)
  /// when the descriptor dimension differs.
  WordId quantize(std::span<const float> descriptor) const;

  /// Centroid of word `w`. Throws Error(kOutOfRange) outside [1, W].
  std::span<const float> exemplar(WordId w) const;

 private:
  std::vector<float> centroids_;
  std::size_t dim_ = 0;
  std::size_t words_ = 0;
  KdTree<float> tree_;
};

struct KMeansParams {
  std::size_t words = 64;
  int max_iters = 50;
  std::uint64_t seed = 0;
};

struct KMeansStats {
  /// Within-cluster sum of squares after each Lloyd iteration.
  std::vector<double> wcss;
  int iterations = 0;
  bool converged = false;  ///< assignments stopped changing
  std::size_t reseeded = 0;
};

/// k-means++ seeding, then Lloyd iterations with farthest-point repair of
/// empty clusters. Deterministic under (features, params).
Vocabulary train_vocabulary(const DescriptorSet& features, const KMeansParams& params,
                            KMeansStats* stats = nullptr);

/// Euclidean distance in double precision.
double l2_distance(std::span<const float> a, std::span<const float> b);

void write_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path);
Vocabulary read_vocabulary(const std::filesystem::path& path);

}  // namespace changeret
