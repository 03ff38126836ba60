#include "changeret/retrieval.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include "changeret/atomic_file.hpp"
#include "changeret/binary_io.hpp"
#include "changeret/error.hpp"

namespace changeret {

BowImage make_bow_image(DescriptorSet features, const Vocabulary& vocab, std::uint32_t id) {
  features.validate();
  if (features.size() == 0) throw Error(Errc::kInsufficientData, "image has no features");
  BowImage image;
  image.id = id;
  image.words.reserve(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) image.words.push_back(vocab.quantize(features.row(i)));
  image.features = std::move(features);
  return image;
}

BowBuild build_bow_image(const PointCloud& map, const BowParams& params, const Vocabulary& vocab,
                         std::uint32_t id) {
  if (std::holds_alternative<FpfhParams>(params.method) && vocab.dim() != kFpfhDim) {
    throw Error(Errc::kMismatch, "vocabulary dimension does not match FPFH");
  }
  BowBuild out;
  PointCloud frame;
  if (params.use_ics) {
    IcsResult ics = to_ics(map, params.ics);
    out.alignment = ics.alignment;
    frame = std::move(ics.cloud);
  } else {
    frame = map;
  }
  const Points keypoints = sample_keypoints(frame, params.keypoints);
  DescriptorSet features = extract_descriptors(frame, keypoints, params.method);
  out.image = make_bow_image(std::move(features), vocab, id);
  return out;
}

InvertedIndex::InvertedIndex(std::shared_ptr<const Vocabulary> vocab) : vocab_(std::move(vocab)) {
  if (!vocab_) throw Error(Errc::kPrecondition, "index needs a vocabulary");
  postings_.resize(vocab_->words());
}

void InvertedIndex::add(const BowImage& image) {
  if (slot_.count(image.id)) {
    throw Error(Errc::kDuplicateId, "image " + std::to_string(image.id) + " already indexed");
  }
  if (image.words.size() != image.features.size()) {
    throw Error(Errc::kMismatch, "image word count differs from keypoint count");
  }
  if (image.words.empty()) throw Error(Errc::kInsufficientData, "image has no features");
  for (std::size_t i = 0; i < image.words.size(); ++i) {
    const WordId w = image.words[i];
    if (w < 1 || w > vocab_->words()) throw Error(Errc::kOutOfRange, "word id outside vocabulary");
    if (image.has_descriptors() && vocab_->quantize(image.features.row(i)) != w) {
      throw Error(Errc::kMismatch, "stored word disagrees with the vocabulary");
    }
  }
  Entry e;
  e.id = image.id;
  e.tag = image.tag;
  e.keypoints = image.features.keypoints;
  e.words = image.words;
  e.distinct_words = image.words;
  std::sort(e.distinct_words.begin(), e.distinct_words.end());
  e.distinct_words.erase(std::unique(e.distinct_words.begin(), e.distinct_words.end()),
                         e.distinct_words.end());
  if (image.has_descriptors()) e.raw = image.features;
  for (std::size_t i = 0; i < e.words.size(); ++i) {
    postings_[e.words[i] - 1].push_back({e.id, static_cast<std::uint32_t>(i)});
  }
  slot_.emplace(e.id, images_.size());
  images_.push_back(std::move(e));
}

const std::vector<InvertedIndex::Posting>& InvertedIndex::postings(WordId w) const {
  if (w < 1 || w > postings_.size()) throw Error(Errc::kOutOfRange, "word id outside vocabulary");
  return postings_[w - 1];
}

const InvertedIndex::Entry* InvertedIndex::find(std::uint32_t id) const {
  const auto it = slot_.find(id);
  return it == slot_.end() ? nullptr : &images_[it->second];
}

std::size_t InvertedIndex::total_postings() const {
  std::size_t n = 0;
  for (const auto& p : postings_) n += p.size();
  return n;
}

namespace {

Ranking finish_ranking(Ranking r, std::size_t k) {
  std::sort(r.begin(), r.end(), [](const Ranked& a, const Ranked& b) {
    return a.score < b.score || (a.score == b.score && a.image_id < b.image_id);
  });
  if (k > 0 && r.size() > k) r.resize(k);
  return r;
}

void require_query(const BowImage& query, const Vocabulary& vocab) {
  if (!query.has_descriptors()) {
    throw Error(Errc::kPrecondition, "query image needs raw descriptors");
  }
  if (query.features.dim != vocab.dim()) {
    throw Error(Errc::kMismatch, "query descriptor dimension differs from the vocabulary");
  }
}

double min_over_words(std::span<const float> q, const std::vector<WordId>& words,
                      const Vocabulary& vocab) {
  double best = std::numeric_limits<double>::infinity();
  for (WordId w : words) best = std::min(best, l2_distance(q, vocab.exemplar(w)));
  return best;
}

}  // namespace

Ranking nbnn_localize(const BowImage& query, const InvertedIndex& index, std::size_t k,
                      NbnnMode mode) {
  const Vocabulary& vocab = index.vocabulary();
  require_query(query, vocab);
  const auto& images = index.images();
  std::vector<double> score(images.size(), 0.0);

  if (mode == NbnnMode::kExact) {
    for (std::size_t j = 0; j < images.size(); ++j) {
      for (std::size_t f = 0; f < query.size(); ++f) {
        score[j] += min_over_words(query.features.row(f), images[j].distinct_words, vocab);
      }
    }
  } else {
    std::vector<std::uint8_t> has_word(images.size());
    std::map<std::uint32_t, std::size_t> slot;
    for (std::size_t j = 0; j < images.size(); ++j) slot.emplace(images[j].id, j);
    for (std::size_t f = 0; f < query.size(); ++f) {
      const auto q = query.features.row(f);
      const WordId w = query.words[f];
      std::fill(has_word.begin(), has_word.end(), 0);
      for (const auto& p : index.postings(w)) has_word[slot.at(p.image_id)] = 1;
      // query word is its nearest exemplar, so sharing it attains the minimum
      const double own = l2_distance(q, vocab.exemplar(w));
      for (std::size_t j = 0; j < images.size(); ++j) {
        score[j] += has_word[j] ? own : min_over_words(q, images[j].distinct_words, vocab);
      }
    }
  }

  Ranking ranking;
  for (std::size_t j = 0; j < images.size(); ++j) ranking.push_back({images[j].id, score[j]});
  return finish_ranking(std::move(ranking), k);
}

Ranking brute_force_localize(const BowImage& query, const std::vector<BowImage>& images,
                             const Vocabulary& vocab) {
  Ranking ranking;
  if (images.empty()) return ranking;
  require_query(query, vocab);
  for (const auto& image : images) {
    double total = 0.0;
    for (std::size_t f = 0; f < query.size(); ++f) {
      double best = std::numeric_limits<double>::infinity();
      for (WordId w : image.words) best = std::min(best, l2_distance(query.features.row(f), vocab.exemplar(w)));
      total += best;
    }
    ranking.push_back({image.id, total});
  }
  return finish_ranking(std::move(ranking), 0);
}

void write_index(const InvertedIndex& index, const std::filesystem::path& path,
                 const std::filesystem::path& vocab_path) {
  const std::string vp = vocab_path.generic_string();
  write_atomically(path, std::ios::binary, [&](std::ostream& os) {
    binio::write_magic(os, "IDX1");
    binio::write_u32(os, static_cast<std::uint32_t>(index.images().size()));
    binio::write_u32(os, static_cast<std::uint32_t>(index.vocabulary().words()));
    for (const auto& e : index.images()) {
      binio::write_u32(os, e.id);
      binio::write_u32(os, static_cast<std::uint32_t>(e.words.size()));
      for (std::size_t i = 0; i < e.words.size(); ++i) {
        binio::write_u32(os, e.words[i]);
        for (int a = 0; a < 3; ++a) binio::write_f32(os, static_cast<float>(e.keypoints[i][a]));
      }
    }
    binio::write_u32(os, static_cast<std::uint32_t>(vp.size()));
    os.write(vp.data(), static_cast<std::streamsize>(vp.size()));
  });
}

InvertedIndex read_index(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::kIo, "cannot open " + path.string());
  const std::string what = path.string();
  binio::read_magic(is, "IDX1", what);
  const std::uint32_t n_images = binio::read_u32(is, what);
  const std::uint32_t n_words = binio::read_u32(is, what);
  std::vector<BowImage> images(n_images);
  for (auto& img : images) {
    img.id = binio::read_u32(is, what);
    const std::uint32_t n = binio::read_u32(is, what);
    img.words.resize(n);
    img.features.keypoints.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      img.words[i] = binio::read_u32(is, what);
      for (int a = 0; a < 3; ++a) img.features.keypoints[i][a] = binio::read_f32(is, what);
    }
  }
  const std::uint32_t len = binio::read_u32(is, what);
  std::string vp(len, '\0');
  is.read(vp.data(), len);
  if (!is) throw Error(Errc::kParse, what + ": truncated vocabulary path");
  binio::expect_eof(is, what);

  std::filesystem::path vocab_path(vp);
  if (vocab_path.is_relative()) vocab_path = path.parent_path() / vocab_path;
  auto vocab = std::make_shared<const Vocabulary>(read_vocabulary(vocab_path));
  if (vocab->words() != n_words) {
    throw Error(Errc::kMismatch, what + ": word count differs from referenced vocabulary");
  }
  InvertedIndex index(vocab);
  for (const auto& img : images) index.add(img);
  return index;
}

}  // namespace changeret
