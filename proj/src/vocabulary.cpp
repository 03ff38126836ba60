#include "changeret/vocabulary.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "changeret/atomic_file.hpp"
#include "changeret/binary_io.hpp"
#include "changeret/error.hpp"
#include "changeret/rng.hpp"

namespace changeret {

double l2_distance(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

Vocabulary::Vocabulary(std::vector<float> centroids, std::size_t dim)
    : centroids_(std::move(centroids)), dim_(dim) {
  if (dim_ == 0 || centroids_.empty() || centroids_.size() % dim_ != 0) {
    throw Error(Errc::kPrecondition, "vocabulary needs W >= 1 centroids of positive dimension");
  }
  words_ = centroids_.size() / dim_;
  for (float v : centroids_) {
    if (!std::isfinite(v)) throw Error(Errc::kPrecondition, "non-finite vocabulary centroid");
  }
  tree_ = KdTree<float>(centroids_, dim_);
  // duplicates would make the nearest exemplar of a centroid another word
  for (std::size_t w = 0; w < words_; ++w) {
    const auto row = std::span<const float>(centroids_.data() + w * dim_, dim_);
    if (tree_.nearest(row).index != w) {
      throw Error(Errc::kPrecondition, "vocabulary contains duplicate centroids");
    }
  }
}

WordId Vocabulary::quantize(std::span<const float> descriptor) const {
  if (descriptor.size() != dim_) {
    throw Error(Errc::kMismatch, "descriptor dimension " + std::to_string(descriptor.size()) +
                                     " != vocabulary dimension " + std::to_string(dim_));
  }
  return static_cast<WordId>(tree_.nearest(descriptor).index + 1);
}

std::span<const float> Vocabulary::exemplar(WordId w) const {
  if (w < 1 || w > words_) {
    throw Error(Errc::kOutOfRange, "word " + std::to_string(w) + " outside [1, " +
                                       std::to_string(words_) + "]");
  }
  return {centroids_.data() + (w - 1) * dim_, dim_};
}

namespace {

double sq_dist(const float* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return s;
}

double sq_dist(const float* a, const float* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

}  // namespace

Vocabulary train_vocabulary(const DescriptorSet& features, const KMeansParams& params,
                            KMeansStats* stats) {
  const std::size_t n = features.size();
  const std::size_t k = params.words;
  const std::size_t dim = features.dim;
  if (k == 0) throw Error(Errc::kPrecondition, "vocabulary size must be >= 1");
  if (n < k) {
    throw Error(Errc::kInsufficientData, std::to_string(n) + " features cannot train " +
                                             std::to_string(k) + " words");
  }
  features.validate();
  const float* x = features.values.data();
  auto row = [&](std::size_t i) { return x + i * dim; };

  // k-means++ seeding
  Rng rng(params.seed);
  std::vector<double> centers(k * dim);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t first = static_cast<std::size_t>(rng.below(n));
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t pick = first;
    if (c > 0) {
      double total = 0.0;
      for (double v : d2) total += v;
      if (!(total > 0.0)) {
        throw Error(Errc::kInsufficientData, "fewer distinct features than vocabulary words");
      }
      double target = rng.uniform() * total;
      pick = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        pick = i;
        target -= d2[i];
        if (target < 0.0) break;
      }
    }
    for (std::size_t a = 0; a < dim; ++a) centers[c * dim + a] = row(pick)[a];
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(row(i), row(pick), dim));
    }
  }

  KMeansStats local;
  std::vector<std::size_t> assign(n, k);
  std::vector<double> cost(n, 0.0);
  std::vector<std::size_t> counts(k);
  for (int it = 0; it < params.max_iters; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = sq_dist(row(i), centers.data() + c * dim, dim);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) changed = true;
      assign[i] = best;
      cost[i] = best_d;
    }
    if (!changed) {
      local.converged = true;
      break;
    }

    // empty clusters take the point currently farthest from its centroid
    std::fill(counts.begin(), counts.end(), 0);
    for (auto a : assign) ++counts[a];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (cost[i] > cost[far] && counts[assign[i]] > 1) far = i;
      }
      --counts[assign[far]];
      assign[far] = c;
      counts[c] = 1;
      cost[far] = 0.0;
      ++local.reseeded;
    }

    // update in feature-index order for bit reproducibility
    std::fill(centers.begin(), centers.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double* ctr = centers.data() + assign[i] * dim;
      for (std::size_t a = 0; a < dim; ++a) ctr[a] += row(i)[a];
    }
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t a = 0; a < dim; ++a) centers[c * dim + a] /= static_cast<double>(counts[c]);
    }
    double wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i) wcss += sq_dist(row(i), centers.data() + assign[i] * dim, dim);
    local.wcss.push_back(wcss);
    local.iterations = it + 1;
  }

  std::vector<float> out(centers.size());
  for (std::size_t i = 0; i < centers.size(); ++i) out[i] = static_cast<float>(centers[i]);
  if (stats) *stats = local;
  return Vocabulary(std::move(out), dim);
}

void write_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path) {
  write_atomically(path, std::ios::binary, [&](std::ostream& os) {
    binio::write_magic(os, "VOC1");
    binio::write_u32(os, static_cast<std::uint32_t>(vocab.words()));
    binio::write_u32(os, static_cast<std::uint32_t>(vocab.dim()));
    for (float v : vocab.data()) binio::write_f32(os, v);
  });
}

Vocabulary read_vocabulary(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::kIo, "cannot open " + path.string());
  const std::string what = path.string();
  binio::read_magic(is, "VOC1", what);
  const std::uint32_t w = binio::read_u32(is, what);
  const std::uint32_t d = binio::read_u32(is, what);
  std::vector<float> data(static_cast<std::size_t>(w) * d);
  for (auto& v : data) v = binio::read_f32(is, what);
  binio::expect_eof(is, what);
  return Vocabulary(std::move(data), d);
}

}  // namespace changeret
