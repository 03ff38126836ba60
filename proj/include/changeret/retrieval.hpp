#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "changeret/fpfh.hpp"
#include "changeret/ics.hpp"
#include "changeret/tdf.hpp"
#include "changeret/vocabulary.hpp"

namespace changeret {

/// One image as a bag of visual words: keypoints (ICS unless the ICS step
/// was skipped), their words, and the raw descriptors when available.
struct BowImage {
  std::uint32_t id = 0;
  std::string tag;
  DescriptorSet features;  ///< keypoints always; values empty when loaded from an index file
  std::vector<WordId> words;

  std::size_t size() const { return words.size(); }
  const Points& keypoints() const { return features.keypoints; }
  bool has_descriptors() const { return features.values.size() == features.size() * features.dim && features.dim > 0; }
};

struct BowParams {
  TdfConfig keypoints;  ///< n_keypoints and seed drive sampling
  DescriptorMethod method = FpfhParams{};
  IcsParams ics;
  bool use_ics = true;
};

struct BowBuild {
  BowImage image;
  IcsAlignment alignment;  ///< identity when use_ics is false
};

/// to_ics → sample_keypoints → descriptors → quantize.
BowBuild build_bow_image(const PointCloud& map, const BowParams& params, const Vocabulary& vocab,
                         std::uint32_t id);

/// Quantizes already-extracted descriptors into a BowImage.
BowImage make_bow_image(DescriptorSet features, const Vocabulary& vocab, std::uint32_t id);

enum class NbnnMode {
  kExact,           ///< every reference exemplar of every image is considered
  kWordRestricted,  ///< inverted-file lookup, exhaustive fallback over the image's words
};

struct Ranked {
  std::uint32_t image_id = 0;
  double score = 0.0;
};
using Ranking = std::vector<Ranked>;

/**
 * @brief Word → posting list over reference images.
 *
 * Single-writer during construction via add(), then read-only.
 */
class InvertedIndex {
 public:
  struct Posting {
    std::uint32_t image_id;
    std::uint32_t feature;
  };

  struct Entry {
    std::uint32_t id = 0;
    std::string tag;
    Points keypoints;
    std::vector<WordId> words;
    std::vector<WordId> distinct_words;  ///< sorted
    DescriptorSet raw;                   ///< empty unless the added image carried descriptors
  };

  explicit InvertedIndex(std::shared_ptr<const Vocabulary> vocab);

  /// Throws Error(kDuplicateId) for a repeated id, Error(kMismatch) when a
  /// stored word disagrees with the vocabulary.
  void add(const BowImage& image);

  const Vocabulary& vocabulary() const { return *vocab_; }
  std::shared_ptr<const Vocabulary> vocabulary_ptr() const { return vocab_; }
  const std::vector<Posting>& postings(WordId w) const;
  const std::vector<Entry>& images() const { return images_; }
  const Entry* find(std::uint32_t id) const;
  std::size_t total_postings() const;
  bool empty() const { return images_.empty(); }

 private:
  std::shared_ptr<const Vocabulary> vocab_;
  std::vector<std::vector<Posting>> postings_;  // index w - 1
  std::vector<Entry> images_;
  std::map<std::uint32_t, std::size_t> slot_;
};

/// Sum over query features of the distance to the nearest exemplar among
/// each image's words; ascending score, ties by lowest id; top `k` (0 = all).
Ranking nbnn_localize(const BowImage& query, const InvertedIndex& index, std::size_t k = 0,
                      NbnnMode mode = NbnnMode::kWordRestricted);

/// Direct evaluation over every feature of every image, no index.
Ranking brute_force_localize(const BowImage& query, const std::vector<BowImage>& images,
                             const Vocabulary& vocab);

/// IDX1 index file; the vocabulary is referenced by path.
void write_index(const InvertedIndex& index, const std::filesystem::path& path,
                 const std::filesystem::path& vocab_path);
/// Loads the index and the vocabulary it references (relative paths resolve
/// against the index file's directory).
InvertedIndex read_index(const std::filesystem::path& path);

}  // namespace changeret
