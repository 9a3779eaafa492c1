#ifndef BINSD_REPO_HPP
#define BINSD_REPO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "binsd/embedder.hpp"

namespace binsd {

/// How relevance of a search hit is decided.
///   ByName   — hit's function_name equals the query's (the conventional
///              labeling, blind to renames).
///   BySource — hit's source_id equals the query's (rectified ground truth).
enum class GroundTruthPolicy { ByName, BySource };

const char* to_string(GroundTruthPolicy p);

enum class ProtocolKind {
  Random,            // uniform sample of the pool
  ExcludeIdentical,  // sample of the pool minus the queries' exact instances
  RatioInjection,    // a controlled share of query functions, rest random
};

struct Protocol {
  ProtocolKind kind = ProtocolKind::Random;
  double ratio = 0.0;  // RatioInjection only, in [0,1]
};

struct EmbeddedFunction {
  FunctionRef ref;
  Vec embedding;
};

/// Immutable after build; safe for concurrent queries.
struct Repository {
  std::vector<EmbeddedFunction> entries;
  Protocol protocol;
  std::uint64_t seed = 0;

  std::size_t size() const { return entries.size(); }
  std::size_t d_embed() const { return entries.empty() ? 0 : entries.front().embedding.size(); }
};

/// "Identical to a query" means same source_id AND same CompilationTag:
/// the exact compiled instance. Co-source variants stay findable.
bool identical_to_any(const FunctionRef& entry, const std::vector<FunctionRef>& queries);

/// Builds a repository under the given protocol, deterministic in seed.
/// RatioInjection injects exactly round(ratio * |queries|) query functions
/// (which must exist in the pool) and fills the remainder with random
/// non-query entries. Throws DataError when the filtered pool is too small.
Repository build_repository(const std::vector<EmbeddedFunction>& pool,
                            const std::vector<FunctionRef>& queries, const Protocol& protocol,
                            std::size_t size, std::uint64_t seed);

struct RankedResult {
  FunctionRef ref;
  double score = 0.0;
  bool relevant = false;
};

struct RankedList {
  FunctionRef query;
  std::vector<RankedResult> results;  // scores non-increasing, ties by ref ascending
  int K = 0;
  long total_relevant_in_repo = 0;    // counted over the whole repository
};

/// Exhaustive cosine scoring, top-K with the deterministic tie-break.
RankedList query_topk(const Repository& repo, const FunctionEmbedding& query, int K,
                      GroundTruthPolicy policy);

/// Full descending ranking (K = repository size); used to provide the
/// fallback remainder for the alignment filter.
RankedList query_full(const Repository& repo, const FunctionEmbedding& query,
                      GroundTruthPolicy policy);

/// BySource-minus-ByName differences of every ranking metric over the
/// same queries and repositories. Precision deltas are >= 0 whenever
/// renamed variants keep unique names.
struct MetricDeltas {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double rank1 = 0.0;
  double map = 0.0;
  double mrr = 0.0;
  double ndcg = 0.0;
};

MetricDeltas rectification_delta(const std::vector<RankedList>& lists_by_name,
                                 const std::vector<RankedList>& lists_by_source, int K);

/// Binary index file: magic "BSDX", format_version u32, d_embed u32,
/// count u64, then per entry five length-prefixed UTF-8 strings
/// (function_name, source_id, arch, opt_level, compiler) followed by
/// d_embed little-endian float32 values.
inline constexpr int kIndexFormatVersion = 1;
void write_index(const std::string& path, const std::vector<EmbeddedFunction>& entries);
std::vector<EmbeddedFunction> read_index(const std::string& path);

}  // namespace binsd

#endif  // BINSD_REPO_HPP
