#include "binsd/repo.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "binsd/metrics.hpp"
#include "binsd/rng.hpp"

namespace binsd {

const char* to_string(GroundTruthPolicy p) {
  return p == GroundTruthPolicy::ByName ? "name" : "source";
}

bool identical_to_any(const FunctionRef& entry, const std::vector<FunctionRef>& queries) {
  for (const auto& q : queries)
    if (entry.source_id == q.source_id && entry.compilation == q.compilation) return true;
  return false;
}

namespace {

std::vector<std::size_t> sample_without_replacement(std::size_t pool, std::size_t want,
                                                    SplitMix64& rng) {
  std::vector<std::size_t> idx(pool);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  shuffle(idx, rng);
  idx.resize(want);
  return idx;
}

}  // namespace

Repository build_repository(const std::vector<EmbeddedFunction>& pool,
                            const std::vector<FunctionRef>& queries, const Protocol& protocol,
                            std::size_t size, std::uint64_t seed) {
  Repository repo;
  repo.protocol = protocol;
  repo.seed = seed;
  SplitMix64 rng = SplitMix64(seed).split("build-repository");

  auto filtered_indices = [&] {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < pool.size(); ++i)
      if (!identical_to_any(pool[i].ref, queries)) keep.push_back(i);
    return keep;
  };

  switch (protocol.kind) {
    case ProtocolKind::Random: {
      if (size > pool.size()) throw DataError("repository size exceeds pool");
      for (std::size_t i : sample_without_replacement(pool.size(), size, rng))
        repo.entries.push_back(pool[i]);
      break;
    }
    case ProtocolKind::ExcludeIdentical: {
      const auto keep = filtered_indices();
      if (size > keep.size()) throw DataError("repository size exceeds pool after exclusion");
      auto picks = sample_without_replacement(keep.size(), size, rng);
      for (std::size_t k : picks) repo.entries.push_back(pool[keep[k]]);
      break;
    }
    case ProtocolKind::RatioInjection: {
      if (!(protocol.ratio >= 0.0 && protocol.ratio <= 1.0))
        throw DataError("injection ratio must be in [0,1]");
      const auto inject =
          static_cast<std::size_t>(std::llround(protocol.ratio * static_cast<double>(queries.size())));
      if (inject > size) throw DataError("injection count exceeds repository size");

      std::vector<std::size_t> qidx(queries.size());
      std::iota(qidx.begin(), qidx.end(), std::size_t{0});
      shuffle(qidx, rng);
      qidx.resize(inject);
      for (std::size_t qi : qidx) {
        const auto& want = queries[qi];
        auto it = std::find_if(pool.begin(), pool.end(),
                               [&](const EmbeddedFunction& e) { return e.ref == want; });
        if (it == pool.end())
          throw DataError("query function not present in pool: " + want.function_name);
        repo.entries.push_back(*it);
      }

      const auto keep = filtered_indices();
      const std::size_t remainder = size - inject;
      if (remainder > keep.size()) throw DataError("repository size exceeds pool after exclusion");
      for (std::size_t k : sample_without_replacement(keep.size(), remainder, rng))
        repo.entries.push_back(pool[keep[k]]);
      break;
    }
  }
  if (repo.entries.empty()) throw DataError("repository must be nonempty");
  return repo;
}

namespace {

bool relevant_under(const FunctionRef& query, const FunctionRef& entry, GroundTruthPolicy policy) {
  return policy == GroundTruthPolicy::ByName ? entry.function_name == query.function_name
                                             : entry.source_id == query.source_id;
}

}  // namespace

RankedList query_topk(const Repository& repo, const FunctionEmbedding& query, int K,
                      GroundTruthPolicy policy) {
  if (K < 1) throw DataError("K must be >= 1");
  if (repo.d_embed() != query.vector.size()) throw DataError("embedding dimension mismatch");

  RankedList list;
  list.query = query.ref;
  list.K = K;

  std::vector<RankedResult> scored;
  scored.reserve(repo.size());
  for (const auto& e : repo.entries) {
    RankedResult r;
    r.ref = e.ref;
    r.score = cosine_similarity(query.vector, e.embedding);
    r.relevant = relevant_under(query.ref, e.ref, policy);
    if (r.relevant) ++list.total_relevant_in_repo;
    scored.push_back(std::move(r));
  }

  const auto cmp = [](const RankedResult& a, const RankedResult& b) {
    if (a.score != b.score) return a.score > b.score;
    return ref_less(a.ref, b.ref);
  };
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(K), scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                    scored.end(), cmp);
  scored.resize(keep);
  list.results = std::move(scored);
  return list;
}

RankedList query_full(const Repository& repo, const FunctionEmbedding& query,
                      GroundTruthPolicy policy) {
  return query_topk(repo, query, static_cast<int>(repo.size()), policy);
}

MetricDeltas rectification_delta(const std::vector<RankedList>& lists_by_name,
                                 const std::vector<RankedList>& lists_by_source, int K) {
  if (lists_by_name.size() != lists_by_source.size())
    throw DataError("rectification requires the same query set");
  for (std::size_t i = 0; i < lists_by_name.size(); ++i)
    if (!(lists_by_name[i].query == lists_by_source[i].query))
      throw DataError("rectification query sets differ");

  const auto before = precision_recall_f1_at_k(lists_by_name, K);
  const auto after = precision_recall_f1_at_k(lists_by_source, K);
  MetricDeltas d;
  d.precision = after.precision - before.precision;
  d.recall = after.recall - before.recall;
  d.f1 = after.f1 - before.f1;
  d.rank1 = rank1(lists_by_source) - rank1(lists_by_name);
  d.map = map_at_k(lists_by_source, K).value - map_at_k(lists_by_name, K).value;
  d.mrr = mrr_at_k(lists_by_source, K).value - mrr_at_k(lists_by_name, K).value;
  d.ndcg = ndcg_at_k(lists_by_source, K).value - ndcg_at_k(lists_by_name, K).value;
  return d;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void put_f32(std::ostream& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

void put_str(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError(path + ": truncated index");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& in, const std::string& path) {
  const std::uint64_t lo = get_u32(in, path);
  const std::uint64_t hi = get_u32(in, path);
  return lo | (hi << 32);
}

std::string get_str(std::istream& in, const std::string& path) {
  const std::uint32_t len = get_u32(in, path);
  if (len > (1u << 20)) throw DataError(path + ": unreasonable string length in index");
  std::string s(len, '\0');
  if (len && !in.read(s.data(), len)) throw DataError(path + ": truncated index");
  return s;
}

}  // namespace

void write_index(const std::string& path, const std::vector<EmbeddedFunction>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out.write("BSDX", 4);
  put_u32(out, kIndexFormatVersion);
  const std::uint32_t d = entries.empty() ? 0 : static_cast<std::uint32_t>(entries[0].embedding.size());
  put_u32(out, d);
  put_u64(out, entries.size());
  for (const auto& e : entries) {
    if (e.embedding.size() != d) throw DataError("index entries must share one dimension");
    put_str(out, e.ref.function_name);
    put_str(out, e.ref.source_id);
    put_str(out, to_string(e.ref.compilation.arch));
    put_str(out, to_string(e.ref.compilation.opt_level));
    put_str(out, e.ref.compilation.compiler);
    for (double x : e.embedding) put_f32(out, static_cast<float>(x));
  }
  if (!out) throw DataError("write failed: " + path);
}

std::vector<EmbeddedFunction> read_index(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "BSDX", 4) != 0)
    throw DataError(path + ": bad magic");
  const std::uint32_t version = get_u32(in, path);
  if (version != kIndexFormatVersion)
    throw DataError(path + ": unsupported index format_version " + std::to_string(version));
  const std::uint32_t d = get_u32(in, path);
  const std::uint64_t count = get_u64(in, path);

  std::vector<EmbeddedFunction> entries;
  entries.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    EmbeddedFunction e;
    e.ref.function_name = get_str(in, path);
    e.ref.source_id = get_str(in, path);
    const auto arch = parse_arch(get_str(in, path));
    const auto opt = parse_opt_level(get_str(in, path));
    if (!arch || !opt) throw DataError(path + ": bad compilation tag in index");
    e.ref.compilation.arch = *arch;
    e.ref.compilation.opt_level = *opt;
    e.ref.compilation.compiler = get_str(in, path);
    e.embedding.resize(d);
    for (std::uint32_t k = 0; k < d; ++k) {
      const std::uint32_t bits = get_u32(in, path);
      float f;
      std::memcpy(&f, &bits, 4);
      e.embedding[k] = static_cast<double>(f);
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace binsd
