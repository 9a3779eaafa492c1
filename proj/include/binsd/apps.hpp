#ifndef BINSD_APPS_HPP
#define BINSD_APPS_HPP

#include <string>
#include <vector>

#include "binsd/repo.hpp"

namespace binsd {

struct VulnHit {
  FunctionRef ref;
  double score = 0.0;
  bool relevant = false;  // BySource ground truth when available
};

struct VulnReport {
  FunctionRef query;
  std::vector<VulnHit> top;  // K best, scores non-increasing
  double max_similarity = 0.0;
  double min_similarity = 0.0;
  long confirmed = 0;  // hits sharing the query's source_id
};

/// Top-K search of each query against the firmware pool. Reports the
/// list's max and min scores; no similarity threshold is applied, the
/// ranked evidence is the verdict.
std::vector<VulnReport> vuln_search(const std::vector<FunctionEmbedding>& queries,
                                    const Repository& firmware_pool, int K = 10);

struct LibraryScore {
  std::string query_library;
  std::string target_library;
  double S_QT = 0.0;             // arithmetic mean of per-function scores
  std::vector<double> s_f;       // top-1 score of each query function
};

/// s_f = top-1 cosine of each query function against T; S_QT = mean(s_f).
LibraryScore library_similarity(const std::string& query_name,
                                const std::vector<FunctionEmbedding>& queries,
                                const std::string& target_name, const Repository& target);

struct NamedLibrary {
  std::string name;
  Repository repo;
};

struct LibraryRanking {
  struct Entry {
    std::string library;
    double S_QT = 0.0;
    int rank = 0;  // 1-based, dense
  };
  std::vector<Entry> entries;   // descending S_QT, ties by name ascending
  int truth_rank = -1;          // -1 when the designated library is absent
};

/// Scores the query library against every firmware library and sorts by
/// S_QT. truth_library names the expected match; its rank is reported,
/// or -1 when no library of that name exists in the firmware.
LibraryRanking rank_target_libraries(const std::string& query_name,
                                     const std::vector<FunctionEmbedding>& queries,
                                     const std::vector<NamedLibrary>& firmware,
                                     const std::string& truth_library);

/// Firmware manifest: JSON {"libraries": {"name": "index-path", ...}}.
/// Paths are resolved relative to the manifest's directory.
std::vector<NamedLibrary> load_firmware_manifest(const std::string& path);

}  // namespace binsd

#endif  // BINSD_APPS_HPP
