#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "changeret/change.hpp"
#include "changeret/eval.hpp"
#include "test_util.hpp"

using namespace changeret;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run cli(const std::string& args, const testutil::TempDir& dir) {
  const fs::path log = dir / "cli.log";
  const std::string cmd = std::string("\"") + CHANGERET_CLI_PATH + "\" " + args + " > \"" +
                          log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream is(log);
  std::stringstream ss;
  ss << is.rdbuf();
  r.output = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

// small problem sizes keep the pipeline test quick
const std::string kSmall =
    "--set keypoints.count=120 --set vocabulary.words=16 --set synth.points_per_structure=600 ";

}  // namespace

TEST_CASE("usage and data errors map to distinct exit codes") {
  testutil::TempDir dir("cli_codes");
  CHECK(cli("--help", dir).code == 0);
  CHECK(cli("no-such-command", dir).code == 1);
  CHECK(cli("extract --bogus-flag 1 --cloud x --out y", dir).code == 1);
  CHECK(cli("--set nosuch.key=3 print-config", dir).code == 1);
  const Run missing = cli("extract --cloud " + q(dir / "absent.ply") + " --out " + q(dir / "x.dsc1"), dir);
  CHECK(missing.code == 2);
  CHECK(missing.output.find("error:") != std::string::npos);
  const Run cfg = cli("print-config", dir);
  CHECK(cfg.code == 0);
  CHECK(cfg.output.find("keypoints.count = 500") != std::string::npos);
}

TEST_CASE("full pipeline through the command line") {
  testutil::TempDir dir("cli_pipeline");
  REQUIRE(cli(kSmall + "synth --seed 3 --count 3 --out " + q(dir / "data"), dir).code == 0);
  for (const char* f : {"ref_0000.ply", "query_0002.ply", "ground_truth.json", "ground_truth_raw.json"}) {
    CHECK(fs::exists(dir / "data" / f));
  }
  std::string refs;
  for (int i = 0; i < 3; ++i) {
    const std::string n = "000" + std::to_string(i);
    const Run r = cli(kSmall + "extract --cloud " + q(dir / "data" / ("ref_" + n + ".ply")) + " --out " +
                          q(dir / ("ref_" + n + ".dsc1")),
                      dir);
    REQUIRE_MESSAGE(r.code == 0, r.output);
    REQUIRE(cli(kSmall + "extract --cloud " + q(dir / "data" / ("query_" + n + ".ply")) + " --out " +
                    q(dir / ("query_" + n + ".dsc1")),
                dir)
                .code == 0);
    refs += q(dir / ("ref_" + n + ".dsc1")) + " ";
  }
  const DescriptorSet d = read_dsc1(dir / "ref_0000.dsc1");
  CHECK(d.size() == 120);
  CHECK(d.dim == 33);

  Run r = cli(kSmall + "train-vocab --features " + refs + "--out " + q(dir / "v.voc"), dir);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  r = cli(kSmall + "index --vocab " + q(dir / "v.voc") + " --features " + refs + "--out " + q(dir / "db.idx"), dir);
  REQUIRE_MESSAGE(r.code == 0, r.output);

  std::string rankings, reports;
  for (int i = 0; i < 3; ++i) {
    const std::string n = "000" + std::to_string(i);
    const std::string id = std::to_string(i);
    r = cli(kSmall + "localize --index " + q(dir / "db.idx") + " --query " + q(dir / ("query_" + n + ".dsc1")) +
                " --id " + id + " --out " + q(dir / ("rank_" + n + ".json")),
            dir);
    REQUIRE_MESSAGE(r.code == 0, r.output);
    r = cli(kSmall + "detect --index " + q(dir / "db.idx") + " --query " + q(dir / ("query_" + n + ".dsc1")) +
                " --id " + id + " --out " + q(dir / ("rep_" + n + ".json")) + " --plot " +
                q(dir / ("rep_" + n + ".dat")),
            dir);
    REQUIRE_MESSAGE(r.code == 0, r.output);
    rankings += q(dir / ("rank_" + n + ".json")) + " ";
    reports += q(dir / ("rep_" + n + ".json")) + " ";
  }
  const auto [qid, ranking] = read_ranking(dir / "rank_0001.json");
  CHECK(qid == 1);
  CHECK(ranking.size() == 3);
  const ChangeReport rep = read_report(dir / "rep_0001.json");
  CHECK(rep.rankings.size() == 120);
  CHECK(fs::exists(dir / "rep_0001.dat"));

  r = cli("evaluate --truth " + q(dir / "data" / "ground_truth.json") + " --rankings " + rankings +
              "--reports " + reports + "--db-size 3",
          dir);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(r.output.find("ANR") != std::string::npos);
  CHECK(r.output.find("top-5") != std::string::npos);

  SUBCASE("stdout ranking and cloud queries, with and without the invariant frame") {
    r = cli(kSmall + "localize --index " + q(dir / "db.idx") + " --query " + q(dir / "data" / "query_0000.ply") +
                " --top 2",
            dir);
    CHECK(r.code == 0);
    // rank, image id, score; two rows for --top 2
    std::istringstream rows(r.output);
    std::size_t rank = 0, n_rows = 0;
    std::uint32_t id = 0;
    double score = 0.0;
    while (rows >> rank >> id >> score) ++n_rows;
    CHECK(n_rows == 2);
    CHECK(rank == 2);
    r = cli(kSmall + "detect --no-ics --index " + q(dir / "db.idx") + " --query " +
                q(dir / "data" / "query_0000.ply") + " --out " + q(dir / "raw.json"),
            dir);
    CHECK_MESSAGE(r.code == 0, r.output);
    r = cli(kSmall + "detect --no-ics --index " + q(dir / "db.idx") + " --query " + q(dir / "query_0000.dsc1") +
                " --out " + q(dir / "raw.json"),
            dir);
    CHECK(r.code == 1);
  }
}

TEST_CASE("scan sequences: local maps, pair mining, reruns") {
  testutil::TempDir dir("cli_scans");
  Run r = cli("synth-scans --seed 4 --scans 11 --out " + q(dir / "seq"), dir);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(fs::exists(dir / "seq" / "odometry.txt"));
  const std::string scans = q(dir / "seq" / "scans"), odo = q(dir / "seq" / "odometry.txt");

  r = cli("build-map --scans " + scans + " --odometry " + odo + " --out " + q(dir / "maps"), dir);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(fs::exists(dir / "maps" / "map_0000.ply"));
  CHECK(fs::exists(dir / "maps" / "map_0001.ply"));
  CHECK_FALSE(fs::exists(dir / "maps" / "map_0002.ply"));
  const std::string first = slurp(dir / "maps" / "map_0000.ply");
  REQUIRE(cli("build-map --scans " + scans + " --odometry " + odo + " --out " + q(dir / "maps2"), dir).code == 0);
  CHECK(slurp(dir / "maps2" / "map_0000.ply") == first);

  r = cli("--set pairs.count=4 --set keypoints.grid_dim=8 --set pairs.dt=3 --set keypoints.region_size=3 "
          "mine-pairs --scans " + scans + " --odometry " + odo + " --out " + q(dir / "pairs.tpr"),
          dir);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(fs::file_size(dir / "pairs.tpr") == 12 + 4 * (1 + 2 * 512 * 4));

  r = cli("build-map --scans " + scans + " --odometry " + q(dir / "none.txt") + " --out " + q(dir / "m3"), dir);
  CHECK(r.code == 1);
  CHECK(r.output.find("error:") != std::string::npos);
}
