#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "binsd/cli.hpp"
#include "binsd/metrics.hpp"
#include "binsd/report.hpp"

using namespace binsd;
namespace fs = std::filesystem;

namespace {

std::atomic<int> g_tempdir_counter{0};

struct TempDir {
  fs::path path;
  TempDir()
      : path(fs::temp_directory_path() /
             ("binsd_cli_" + std::to_string(g_tempdir_counter.fetch_add(1)))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

const char* kDemoSpec = R"({
  "n_sources": 12, "variants_per_source": 3, "node_count_range": [3, 8],
  "d_feat": 6, "seed": 7, "rename_fraction": 0.3, "transform_profile": "easy"
})";

// gen -> train -> embed -> index; queries are the first 8 corpus records
struct Pipeline {
  TempDir dir;
  std::string corpus, model, pool, queries, repo;

  explicit Pipeline(const std::string& protocol = "random") {
    corpus = dir.file("corpus.jsonl");
    model = dir.file("model.json");
    pool = dir.file("pool.bsdx");
    queries = dir.file("queries.bsdx");
    repo = dir.file("repo.bsdx");
    write_file(dir.file("spec.json"), kDemoSpec);
    REQUIRE(run_command({"gen", "--spec", dir.file("spec.json"), "--out", corpus}) == 0);
    REQUIRE(run_command({"train", "--corpus", corpus, "--out", model, "--d-embed", "8",
                         "--iterations", "2", "--epochs", "4", "--seed", "5"}) == 0);
    REQUIRE(run_command({"embed", "--corpus", corpus, "--model", model, "--out", pool,
                         "--threads", "1"}) == 0);

    // query slice: header plus the first 8 records
    const std::string qcorpus = dir.file("queries.jsonl");
    {
      std::ifstream in(corpus);
      std::ofstream out(qcorpus, std::ios::binary);
      std::string line;
      for (int n = 0; std::getline(in, line) && n < 9; ++n) out << line << '\n';
    }
    REQUIRE(run_command({"embed", "--corpus", qcorpus, "--model", model, "--out", queries,
                         "--threads", "1"}) == 0);
    REQUIRE(run_command({"index", "--pool", pool, "--out", repo, "--protocol", protocol,
                         "--queries", queries, "--size", "28", "--seed", "3"}) == 0);
  }
};

}  // namespace

TEST_CASE("help exits 0, unknown subcommand exits 1") {
  CHECK(run_command({"eval", "--help"}) == 0);
  CHECK(run_command({"--help"}) == 0);
  CHECK(run_command({"frobnicate"}) == 1);
  CHECK(run_command({}) == 1);
}

TEST_CASE("missing required flag is a usage error") {
  CHECK(run_command({"gen", "--spec", "nowhere.json"}) == 1);
}

TEST_CASE("corrupt index magic is a data error (exit 2)") {
  TempDir dir;
  write_file(dir.file("broken.bsdx"), "this is not an index at all");
  write_file(dir.file("q.bsdx"), "junk");
  CHECK(run_command({"query", "--repo", dir.file("broken.bsdx"), "--queries", dir.file("q.bsdx"),
                     "--out", dir.file("lists.json")}) == 2);
}

TEST_CASE("missing input file is a data error") {
  TempDir dir;
  CHECK(run_command({"gen", "--spec", dir.file("absent.json"), "--out", dir.file("c.jsonl")}) == 2);
}

TEST_CASE("full pipeline produces a report with every metric column") {
  Pipeline p;
  const std::string report = p.dir.file("report.csv");
  REQUIRE(run_command({"eval", "--corpus", p.corpus, "--model", p.model, "--repo", p.repo,
                       "--queries", p.pool, "--out", report, "--k", "5", "--n-queries", "20",
                       "--n-pairs", "300", "--seed", "11", "--rectify", p.dir.file("delta.csv"),
                       "--pairs-out", p.dir.file("pairs.csv"), "--plots", "roc,ksweep"}) == 0);

  const auto loaded = read_report_csv(report);
  CHECK(loaded.K == 5);
  CHECK(loaded.n_queries == 20);
  CHECK(loaded.auc >= 0.0);
  CHECK(loaded.auc <= 1.0);
  const std::string text = read_file(report);
  for (const char* metric : {"auc", "acc", "threshold", "precision_k", "recall_k", "f1_k",
                             "rank1", "map_k", "mrr_k", "ndcg_k"})
    CHECK(text.find(metric) != std::string::npos);

  CHECK(fs::exists(p.dir.file("delta.csv")));
  CHECK(fs::exists(p.dir.file("pairs.csv")));
  CHECK(fs::exists(p.dir.file("report_roc.svg")));
  CHECK(fs::exists(p.dir.file("report_ksweep.svg")));
}

TEST_CASE("same seed and config give byte-identical outputs") {
  Pipeline p;
  auto run_eval = [&](const std::string& out) {
    REQUIRE(run_command({"eval", "--corpus", p.corpus, "--model", p.model, "--repo", p.repo,
                         "--queries", p.pool, "--out", out, "--k", "5", "--n-queries", "15",
                         "--n-pairs", "200", "--seed", "21"}) == 0);
  };
  run_eval(p.dir.file("r1.csv"));
  run_eval(p.dir.file("r2.csv"));
  CHECK(read_file(p.dir.file("r1.csv")) == read_file(p.dir.file("r2.csv")));

  // regenerating the corpus reproduces it byte for byte
  const std::string corpus2 = p.dir.file("corpus2.jsonl");
  write_file(p.dir.file("spec2.json"), kDemoSpec);
  REQUIRE(run_command({"gen", "--spec", p.dir.file("spec2.json"), "--out", corpus2}) == 0);
  CHECK(read_file(p.corpus) == read_file(corpus2));
}

TEST_CASE("threads flag does not change embedding output") {
  Pipeline p;
  const std::string pool4 = p.dir.file("pool4.bsdx");
  REQUIRE(run_command({"embed", "--corpus", p.corpus, "--model", p.model, "--out", pool4,
                       "--threads", "4"}) == 0);
  CHECK(read_file(p.pool) == read_file(pool4));
}

TEST_CASE("query subcommand writes ranked lists and timing") {
  Pipeline p;
  const std::string lists = p.dir.file("lists.json");
  const std::string timing = p.dir.file("timing.csv");
  REQUIRE(run_command({"query", "--repo", p.repo, "--queries", p.pool, "--out", lists, "--k", "5",
                       "--policy", "source", "--n-queries", "8", "--seed", "2", "--timing-out",
                       timing}) == 0);
  const std::string text = read_file(lists);
  CHECK(text.find("\"results\"") != std::string::npos);
  CHECK(text.find("\"total_relevant_in_repo\"") != std::string::npos);

  const std::string tcsv = read_file(timing);
  CHECK(tcsv.find("phase,seconds") == 0);
  CHECK(tcsv.find("query,") != std::string::npos);
}

TEST_CASE("filter-eval and collide run end to end") {
  Pipeline p("exclude-identical");
  REQUIRE(run_command({"filter-eval", "--corpus", p.corpus, "--model", p.model, "--repo", p.repo,
                       "--queries", p.queries, "--out", p.dir.file("filter.csv"), "--k", "5",
                       "--alpha", "0.05", "--tol", "1e-6", "--n-queries", "10", "--seed",
                       "4"}) == 0);
  const std::string filter_text = read_file(p.dir.file("filter.csv"));
  CHECK(filter_text.find("metric,before,after,delta") == 0);

  REQUIRE(run_command({"collide", "--corpus", p.corpus, "--model", p.model, "--repo", p.repo,
                       "--queries", p.queries, "--out", p.dir.file("collide.json"), "--k", "5",
                       "--tau-sim", "0.9", "--tau-node", "0.3", "--n-queries", "10", "--seed",
                       "4"}) == 0);
  const std::string collide_text = read_file(p.dir.file("collide.json"));
  CHECK(collide_text.find("\"collision\"") != std::string::npos);
  CHECK(collide_text.find("\"rename\"") != std::string::npos);
  CHECK(collide_text.find("\"other\"") != std::string::npos);
}

TEST_CASE("vuln and license subcommands") {
  Pipeline p;
  // vulnerable queries: reuse a slice of the corpus as its own query file
  const std::string queries = p.dir.file("vuln_queries.jsonl");
  {
    std::ifstream in(p.corpus);
    std::ofstream out(queries, std::ios::binary);
    std::string line;
    int n = 0;
    while (std::getline(in, line) && n < 4) {
      out << line << '\n';
      ++n;
    }
  }
  REQUIRE(run_command({"vuln", "--queries", queries, "--pool", p.pool, "--model", p.model,
                       "--k", "10", "--out", p.dir.file("vuln.csv")}) == 0);
  const std::string vuln_text = read_file(p.dir.file("vuln.csv"));
  CHECK(vuln_text.find("query,max_similarity,min_similarity,bugs") == 0);
  // every query's exact instance is in the pool, so max similarity is exactly 1
  {
    std::istringstream rows(vuln_text);
    std::string row;
    std::getline(rows, row);  // header
    while (std::getline(rows, row)) {
      const auto first_comma = row.find(',');
      const auto second_comma = row.find(',', first_comma + 1);
      CHECK(row.substr(first_comma + 1, second_comma - first_comma - 1) == "1");
    }
  }

  // firmware of two libraries: one is the pool itself (contains the queries)
  write_file(p.dir.file("fw.json"),
             std::string("{\"libraries\": {\"poolcopy\": \"") + "pool.bsdx" +
                 "\", \"decoy\": \"pool.bsdx\"}}");
  REQUIRE(run_command({"license", "--query-lib", queries, "--firmware-manifest",
                       p.dir.file("fw.json"), "--model", p.model, "--truth", "poolcopy", "--out",
                       p.dir.file("license.csv")}) == 0);
  const std::string lic = read_file(p.dir.file("license.csv"));
  CHECK(lic.find("library,s_qt,rank,is_truth") == 0);
  CHECK(lic.find("poolcopy") != std::string::npos);
}

TEST_CASE("report subcommand draws ROC and sweep charts") {
  TempDir dir;
  write_file(dir.file("pairs.csv"), "score,label\n0.9,1\n0.8,1\n0.2,-1\n0.1,-1\n");
  REQUIRE(run_command({"report", "--pairs", dir.file("pairs.csv"), "--out", dir.file("roc.svg")}) ==
          0);
  const std::string svg = read_file(dir.file("roc.svg"));
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);

  write_file(dir.file("sweep.csv"),
             "x,series,value\n0,rank1,0.2\n0.25,rank1,0.4\n0.5,rank1,0.6\n0.75,rank1,0.8\n1,"
             "rank1,1.0\n0,mrr,0.1\n0.25,mrr,0.3\n0.5,mrr,0.5\n0.75,mrr,0.7\n1,mrr,0.9\n");
  REQUIRE(run_command({"report", "--sweep", dir.file("sweep.csv"), "--out", dir.file("sweep.svg"),
                       "--title", "ratio sweep", "--x-label", "injection ratio"}) == 0);
  CHECK(read_file(dir.file("sweep.svg")).find("rank1") != std::string::npos);
}

TEST_CASE("eval can build shared or fresh per-query repositories from a pool") {
  Pipeline p;
  REQUIRE(run_command({"eval", "--corpus", p.corpus, "--model", p.model, "--pool", p.pool,
                       "--repo-protocol", "exclude-identical", "--repo-size", "25", "--queries",
                       p.queries, "--out", p.dir.file("shared.csv"), "--k", "5", "--n-queries",
                       "0", "--n-pairs", "100", "--seed", "3"}) == 0);
  REQUIRE(run_command({"eval", "--corpus", p.corpus, "--model", p.model, "--pool", p.pool,
                       "--repo-protocol", "exclude-identical", "--repo-size", "25",
                       "--fresh-repos", "--queries", p.queries, "--out", p.dir.file("fresh.csv"),
                       "--k", "5", "--n-queries", "0", "--n-pairs", "100", "--seed", "3"}) == 0);
  CHECK(read_report_csv(p.dir.file("shared.csv")).n_queries == 8);
  CHECK(read_report_csv(p.dir.file("fresh.csv")).n_queries == 8);

  // exactly one repository source must be given
  CHECK(run_command({"eval", "--corpus", p.corpus, "--model", p.model, "--repo", p.repo,
                     "--pool", p.pool, "--out", p.dir.file("x.csv")}) == 2);
  CHECK(run_command({"eval", "--corpus", p.corpus, "--model", p.model, "--out",
                     p.dir.file("x.csv")}) == 2);
}

TEST_CASE("ratio sweep through the pipeline yields a 5-point curve per metric") {
  Pipeline p;
  std::ostringstream sweep;
  sweep << "x,series,value\n";
  int idx = 0;
  for (const char* ratio : {"0", "0.25", "0.5", "0.75", "1.0"}) {
    const std::string repo = p.dir.file("repo_r" + std::to_string(idx) + ".bsdx");
    const std::string report = p.dir.file("report_r" + std::to_string(idx) + ".csv");
    REQUIRE(run_command({"index", "--pool", p.pool, "--queries", p.queries, "--out", repo,
                         "--protocol", "ratio", "--ratio", ratio, "--size", "28", "--seed",
                         "3"}) == 0);
    REQUIRE(run_command({"eval", "--corpus", p.corpus, "--model", p.model, "--repo", repo,
                         "--queries", p.queries, "--out", report, "--k", "5", "--n-queries", "0",
                         "--n-pairs", "100", "--seed", "13"}) == 0);
    const auto r = read_report_csv(report);
    sweep << ratio << ",rank1," << r.rank1 << '\n';
    sweep << ratio << ",mrr_k," << r.mrr_k << '\n';
    sweep << ratio << ",precision_k," << r.precision_k << '\n';
    ++idx;
  }
  write_file(p.dir.file("sweep.csv"), sweep.str());
  REQUIRE(run_command({"report", "--sweep", p.dir.file("sweep.csv"), "--out",
                       p.dir.file("sweep.svg"), "--title", "metrics vs injection ratio",
                       "--x-label", "injection ratio"}) == 0);
  const std::string svg = read_file(p.dir.file("sweep.svg"));
  CHECK(svg.find("rank1") != std::string::npos);
  CHECK(svg.find("mrr_k") != std::string::npos);
  CHECK(svg.find("precision_k") != std::string::npos);
}

TEST_CASE("ROC of perfectly separated scores passes through the ideal corners") {
  PairScoreSet separated{{{0.9, +1}, {0.8, +1}, {0.2, -1}, {0.1, -1}}};
  const auto pts = roc_points(separated);
  REQUIRE(pts.size() >= 3);
  CHECK(pts.front() == std::pair<double, double>{0.0, 0.0});
  bool hits_top_left = false;
  for (const auto& p : pts) hits_top_left |= p == std::pair<double, double>{0.0, 1.0};
  CHECK(hits_top_left);
  CHECK(pts.back() == std::pair<double, double>{1.0, 1.0});
}

TEST_CASE("timing table is empty with a header when no phases ran") {
  PhaseTimings t;
  CHECK(t.to_csv() == "phase,seconds\n");
  t.record("train", 1.5);
  t.record("embed", 0.25);
  const auto csv = t.to_csv();
  CHECK(csv.find("train,1.5") != std::string::npos);
  CHECK(csv.find("embed,0.25") != std::string::npos);
}

TEST_CASE("run manifest is deterministic and carries the config hash") {
  const auto a = run_manifest(42, "cmd=gen;seed=42;");
  const auto b = run_manifest(42, "cmd=gen;seed=42;");
  CHECK(a == b);
  CHECK(a.find("seed=42") != std::string::npos);
  CHECK(a.find("config_hash=") != std::string::npos);
  const auto c = run_manifest(42, "cmd=gen;seed=43;");
  CHECK(a != c);
}

TEST_CASE("bundled demo spec drives the documented quickstart end to end") {
  // configs/demo_spec.json is the corpus recipe shipped with the README
  const auto spec_path = fs::path(__FILE__).parent_path().parent_path() / "configs" /
                         "demo_spec.json";
  REQUIRE(fs::exists(spec_path));
  TempDir dir;
  REQUIRE(run_command({"gen", "--spec", spec_path.string(), "--out", dir.file("demo.jsonl")}) == 0);
  REQUIRE(run_command({"train", "--corpus", dir.file("demo.jsonl"), "--out", dir.file("m.json"),
                       "--d-embed", "8", "--iterations", "2", "--epochs", "3", "--seed", "5"}) ==
          0);
  REQUIRE(run_command({"embed", "--corpus", dir.file("demo.jsonl"), "--model", dir.file("m.json"),
                       "--out", dir.file("p.bsdx")}) == 0);

  // queries: the base variant of each source (every 4th record)
  {
    std::ifstream in(dir.file("demo.jsonl"));
    std::ofstream out(dir.file("q.jsonl"), std::ios::binary);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      if (n == 0 || (n - 1) % 4 == 0) out << line << '\n';
      ++n;
    }
  }
  REQUIRE(run_command({"embed", "--corpus", dir.file("q.jsonl"), "--model", dir.file("m.json"),
                       "--out", dir.file("q.bsdx")}) == 0);
  REQUIRE(run_command({"index", "--pool", dir.file("p.bsdx"), "--queries", dir.file("q.bsdx"),
                       "--out", dir.file("r.bsdx"), "--protocol", "exclude-identical", "--size",
                       "70", "--seed", "9"}) == 0);
  REQUIRE(run_command({"eval", "--corpus", dir.file("demo.jsonl"), "--model", dir.file("m.json"),
                       "--repo", dir.file("r.bsdx"), "--queries", dir.file("q.bsdx"), "--out",
                       dir.file("report.csv"), "--k", "5", "--n-queries", "0", "--n-pairs", "400",
                       "--seed", "13"}) == 0);

  const auto report = read_report_csv(dir.file("report.csv"));
  CHECK(report.n_queries == 24);
  const std::string text = read_file(dir.file("report.csv"));
  for (const char* metric : {"auc", "acc", "threshold", "precision_k", "recall_k", "f1_k",
                             "rank1", "map_k", "mrr_k", "ndcg_k"})
    CHECK(text.find(metric) != std::string::npos);
}
