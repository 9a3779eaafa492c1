#include "binsd/apps.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace binsd {

using nlohmann::json;

std::vector<VulnReport> vuln_search(const std::vector<FunctionEmbedding>& queries,
                                    const Repository& firmware_pool, int K) {
  if (firmware_pool.entries.empty()) throw DataError("firmware pool is empty");
  std::vector<VulnReport> reports;
  for (const auto& q : queries) {
    RankedList list = query_topk(firmware_pool, q, K, GroundTruthPolicy::BySource);
    VulnReport r;
    r.query = q.ref;
    for (const auto& res : list.results) {
      r.top.push_back({res.ref, res.score, res.relevant});
      r.confirmed += res.relevant ? 1 : 0;
    }
    r.max_similarity = r.top.empty() ? 0.0 : r.top.front().score;
    r.min_similarity = r.top.empty() ? 0.0 : r.top.back().score;
    reports.push_back(std::move(r));
  }
  return reports;
}

LibraryScore library_similarity(const std::string& query_name,
                                const std::vector<FunctionEmbedding>& queries,
                                const std::string& target_name, const Repository& target) {
  if (queries.empty()) throw DataError("query library is empty");
  if (target.entries.empty()) throw DataError("target library is empty");
  LibraryScore score;
  score.query_library = query_name;
  score.target_library = target_name;
  for (const auto& q : queries) {
    RankedList top1 = query_topk(target, q, 1, GroundTruthPolicy::BySource);
    score.s_f.push_back(top1.results.front().score);
  }
  double total = 0.0;
  for (double s : score.s_f) total += s;
  score.S_QT = total / static_cast<double>(score.s_f.size());
  return score;
}

LibraryRanking rank_target_libraries(const std::string& query_name,
                                     const std::vector<FunctionEmbedding>& queries,
                                     const std::vector<NamedLibrary>& firmware,
                                     const std::string& truth_library) {
  if (firmware.empty()) throw DataError("firmware has no libraries");

  LibraryRanking ranking;
  for (const auto& lib : firmware) {
    const LibraryScore s = library_similarity(query_name, queries, lib.name, lib.repo);
    ranking.entries.push_back({lib.name, s.S_QT, 0});
  }
  std::sort(ranking.entries.begin(), ranking.entries.end(), [](const auto& a, const auto& b) {
    if (a.S_QT != b.S_QT) return a.S_QT > b.S_QT;
    return a.library < b.library;
  });
  for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
    ranking.entries[i].rank = static_cast<int>(i) + 1;
    if (ranking.entries[i].library == truth_library) ranking.truth_rank = ranking.entries[i].rank;
  }
  return ranking;
}

std::vector<NamedLibrary> load_firmware_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(path + ": malformed manifest: " + e.what());
  }
  if (!j.contains("libraries") || !j["libraries"].is_object())
    throw DataError(path + ": manifest needs a \"libraries\" object");

  const auto base = std::filesystem::path(path).parent_path();
  std::vector<NamedLibrary> firmware;
  for (const auto& [name, index_path] : j["libraries"].items()) {
    NamedLibrary lib;
    lib.name = name;
    const std::filesystem::path p(index_path.get<std::string>());
    lib.repo.entries = read_index(p.is_absolute() ? p.string() : (base / p).string());
    if (lib.repo.entries.empty()) throw DataError(path + ": library " + name + " is empty");
    firmware.push_back(std::move(lib));
  }
  std::sort(firmware.begin(), firmware.end(),
            [](const auto& a, const auto& b) { return a.name < b.name; });
  return firmware;
}

}  // namespace binsd
