#include "changeret/eval.hpp"

#include <fstream>

#include "changeret/atomic_file.hpp"
#include "changeret/error.hpp"
#include "json.hpp"

namespace changeret {

const QueryTruth& GroundTruth::at(std::uint32_t query_id) const {
  const auto it = queries.find(query_id);
  if (it == queries.end()) {
    throw Error(Errc::kMismatch, "no ground truth for query " + std::to_string(query_id));
  }
  return it->second;
}

void GroundTruth::validate() const {
  for (const auto& [id, q] : queries) {
    for (const auto& b : q.boxes) {
      if (!(b.xmax > b.xmin) || !(b.ymax > b.ymin)) {
        throw Error(Errc::kPrecondition,
                    "query " + std::to_string(id) + ": box has no horizontal area");
      }
    }
  }
}

std::size_t rank_of(const Ranking& ranking, std::uint32_t id) {
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (ranking[i].image_id == id) return i + 1;
  }
  throw Error(Errc::kMismatch, "ground-truth image " + std::to_string(id) + " missing from ranking");
}

double anr(const std::vector<Ranking>& rankings, const std::vector<std::uint32_t>& gt_ids,
           std::size_t db_size) {
  if (db_size == 0) throw Error(Errc::kPrecondition, "database size must be >= 1");
  if (rankings.size() != gt_ids.size()) {
    throw Error(Errc::kMismatch, "one ground-truth id is needed per ranking");
  }
  if (rankings.empty()) throw Error(Errc::kInsufficientData, "no rankings to average");
  double sum = 0.0;
  for (std::size_t i = 0; i < rankings.size(); ++i) {
    sum += static_cast<double>(rank_of(rankings[i], gt_ids[i])) / static_cast<double>(db_size);
  }
  return sum / static_cast<double>(rankings.size());
}

bool top_x_hit(const ChangeReport& report, const QueryTruth& truth, std::size_t x) {
  const std::size_t depth = std::min(x, report.rankings.size());
  for (std::size_t i = 0; i < depth; ++i) {
    for (const auto& box : truth.boxes) {
      if (box.contains(report.rankings[i].keypoint)) return true;
    }
  }
  return false;
}

double top_x_accuracy(const std::vector<ChangeReport>& reports, const GroundTruth& gt, std::size_t x) {
  if (x == 0) throw Error(Errc::kPrecondition, "top-X needs X >= 1");
  if (reports.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& r : reports) hits += top_x_hit(r, gt.at(r.query_id), x) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(reports.size());
}

void write_ground_truth(const GroundTruth& gt, const std::filesystem::path& path) {
  nlohmann::json j;
  auto& qs = j["queries"] = nlohmann::json::array();
  for (const auto& [id, q] : gt.queries) {
    nlohmann::json boxes = nlohmann::json::array();
    for (const auto& b : q.boxes) {
      boxes.push_back({{"xmin", b.xmin}, {"ymin", b.ymin}, {"xmax", b.xmax}, {"ymax", b.ymax}});
    }
    qs.push_back({{"id", id}, {"gt_ref_id", q.gt_ref_id}, {"boxes", boxes}});
  }
  write_atomically(path, std::ios::out, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::kIo, "cannot open " + path.string());
  GroundTruth gt;
  try {
    const auto j = nlohmann::json::parse(is);
    for (const auto& q : j.at("queries")) {
      QueryTruth t;
      t.id = q.at("id").get<std::uint32_t>();
      t.gt_ref_id = q.at("gt_ref_id").get<std::uint32_t>();
      for (const auto& b : q.at("boxes")) {
        t.boxes.push_back({b.at("xmin").get<double>(), b.at("ymin").get<double>(),
                           b.at("xmax").get<double>(), b.at("ymax").get<double>()});
      }
      if (!gt.queries.emplace(t.id, t).second) {
        throw Error(Errc::kDuplicateId, path.string() + ": duplicate query " + std::to_string(t.id));
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::kParse, path.string() + ": " + ex.what());
  }
  gt.validate();
  return gt;
}

void write_ranking(std::uint32_t query_id, const Ranking& ranking, const std::filesystem::path& path) {
  nlohmann::json j;
  j["query_id"] = query_id;
  auto& r = j["ranking"] = nlohmann::json::array();
  for (const auto& e : ranking) r.push_back({{"id", e.image_id}, {"score", e.score}});
  write_atomically(path, std::ios::out, [&](std::ostream& os) { os << j.dump(1) << '\n'; });
}

std::pair<std::uint32_t, Ranking> read_ranking(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::kIo, "cannot open " + path.string());
  try {
    const auto j = nlohmann::json::parse(is);
    Ranking ranking;
    for (const auto& e : j.at("ranking")) {
      ranking.push_back({e.at("id").get<std::uint32_t>(), e.at("score").get<double>()});
    }
    return {j.at("query_id").get<std::uint32_t>(), ranking};
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::kParse, path.string() + ": " + ex.what());
  }
}

}  // namespace changeret
