#include "binsd/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "binsd/acfg.hpp"
#include "binsd/align.hpp"
#include "binsd/apps.hpp"
#include "binsd/collision.hpp"
#include "binsd/corpus.hpp"
#include "binsd/embedder.hpp"
#include "binsd/metrics.hpp"
#include "binsd/report.hpp"
#include "binsd/repo.hpp"
#include "binsd/rng.hpp"

namespace binsd {

namespace {

using nlohmann::json;

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

LogLevel log_level() {
  const char* env = std::getenv("BINSD_LOG");
  if (!env) return LogLevel::Info;
  const std::string v(env);
  if (v == "error") return LogLevel::Error;
  if (v == "debug") return LogLevel::Debug;
  return LogLevel::Info;
}

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::Info) std::cerr << "[info] " << msg << '\n';
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::Debug) std::cerr << "[debug] " << msg << '\n';
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Key=value list of the resolved options, sorted, so the config hash is
/// independent of flag order.
std::string resolved_config(const std::map<std::string, std::string>& kv) {
  std::string out;
  for (const auto& [k, v] : kv) {
    out += k;
    out += '=';
    out += v;
    out += ';';
  }
  return out;
}

void print_manifest(std::uint64_t seed, const std::map<std::string, std::string>& kv) {
  std::cout << run_manifest(seed, resolved_config(kv)) << '\n';
}

json ref_to_json(const FunctionRef& r) {
  return {{"function_name", r.function_name},
          {"source_id", r.source_id},
          {"arch", to_string(r.compilation.arch)},
          {"opt_level", to_string(r.compilation.opt_level)},
          {"compiler", r.compilation.compiler}};
}

void write_ranked_lists(const std::string& path, const std::vector<RankedList>& lists,
                        GroundTruthPolicy policy) {
  json j;
  j["format_version"] = 1;
  j["policy"] = to_string(policy);
  json arr = json::array();
  for (const auto& list : lists) {
    json l;
    l["query"] = ref_to_json(list.query);
    l["K"] = list.K;
    l["total_relevant_in_repo"] = list.total_relevant_in_repo;
    json results = json::array();
    for (const auto& r : list.results)
      results.push_back(
          {{"ref", ref_to_json(r.ref)}, {"score", r.score}, {"relevant", r.relevant}});
    l["results"] = std::move(results);
    arr.push_back(std::move(l));
  }
  j["lists"] = std::move(arr);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << '\n';
}

std::string ref_key(const FunctionRef& r) {
  return r.source_id + '\x1f' + r.function_name + '\x1f' + to_string(r.compilation.arch) +
         '\x1f' + to_string(r.compilation.opt_level) + '\x1f' + r.compilation.compiler;
}

/// Graph lookup over one or more parsed corpora.
class GraphTable {
 public:
  void add(const std::vector<AttributedCfg>& functions) {
    for (const auto& g : functions) table_.emplace(ref_key(ref_of(g)), &g);
  }
  GraphLookup lookup() const {
    return [this](const FunctionRef& ref) -> const AttributedCfg& {
      auto it = table_.find(ref_key(ref));
      if (it == table_.end())
        throw DataError("no graph for " + ref.function_name + " (" + ref.source_id + ")");
      return *it->second;
    };
  }

 private:
  std::map<std::string, const AttributedCfg*> table_;
};

/// Order-stable parallel embedding; identical output for any thread count
/// because every function's computation is independent. Components are
/// quantized to index precision (float32) so scores are identical whether
/// an embedding came from a .bsdx file or was computed in-process, and an
/// exact instance always scores exactly 1.0 against itself.
std::vector<EmbeddedFunction> embed_all(const std::vector<AttributedCfg>& functions,
                                        const ModelParams& params, const EmbeddingConfig& cfg,
                                        int threads) {
  std::vector<EmbeddedFunction> out(functions.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      EmbedResult r = embed_function(functions[i], params, cfg);
      for (double& x : r.embedding.vector) x = static_cast<double>(static_cast<float>(x));
      out[i] = {r.embedding.ref, std::move(r.embedding.vector)};
    }
  };
  const int n = std::max(1, threads);
  log_debug("embedding " + std::to_string(functions.size()) + " functions on " +
            std::to_string(n) + " thread(s)");
  if (n == 1 || functions.size() < 2) {
    work(0, functions.size());
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (functions.size() + static_cast<std::size_t>(n) - 1) / static_cast<std::size_t>(n);
  for (int t = 0; t < n; ++t) {
    const std::size_t begin = static_cast<std::size_t>(t) * chunk;
    const std::size_t end = std::min(functions.size(), begin + chunk);
    if (begin >= end) break;
    pool.emplace_back(work, begin, end);
  }
  for (auto& th : pool) th.join();
  return out;
}

std::vector<FunctionEmbedding> to_embeddings(const std::vector<EmbeddedFunction>& entries) {
  std::vector<FunctionEmbedding> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back({e.embedding, e.ref});
  return out;
}

std::vector<FunctionEmbedding> sample_queries(const std::vector<EmbeddedFunction>& pool,
                                              std::size_t n, std::uint64_t seed) {
  auto queries = to_embeddings(pool);
  if (n == 0 || n >= queries.size()) return queries;
  SplitMix64 rng = SplitMix64(seed).split("query-sample");
  shuffle(queries, rng);
  queries.resize(n);
  return queries;
}

/// Random labeled pairs for AUC/ACC: alternating positive (co-source
/// variant) and negative (other source) picks.
PairScoreSet sample_scored_pairs(const std::vector<EmbeddedFunction>& pool, std::size_t n_pairs,
                                 std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_source;
  for (std::size_t i = 0; i < pool.size(); ++i) by_source[pool[i].ref.source_id].push_back(i);
  std::vector<std::vector<std::size_t>*> multi;
  std::vector<std::string> sources;
  for (auto& [s, v] : by_source) {
    sources.push_back(s);
    if (v.size() >= 2) multi.push_back(&v);
  }
  if (multi.empty() || sources.size() < 2)
    throw DataError("pair sampling needs co-source variants and >= 2 sources");

  SplitMix64 rng = SplitMix64(seed).split("scored-pairs");
  PairScoreSet set;
  for (std::size_t p = 0; p < n_pairs; ++p) {
    if (p % 2 == 0) {
      const auto& group = *multi[rng.next_below(multi.size())];
      const std::size_t a = group[rng.next_below(group.size())];
      std::size_t b = a;
      while (b == a) b = group[rng.next_below(group.size())];
      set.items.emplace_back(cosine_similarity(pool[a].embedding, pool[b].embedding), +1);
    } else {
      const std::size_t a = rng.next_below(pool.size());
      std::size_t b = a;
      while (pool[b].ref.source_id == pool[a].ref.source_id) b = rng.next_below(pool.size());
      set.items.emplace_back(cosine_similarity(pool[a].embedding, pool[b].embedding), -1);
    }
  }
  return set;
}

GroundTruthPolicy policy_from(const std::string& name) {
  if (name == "name") return GroundTruthPolicy::ByName;
  if (name == "source") return GroundTruthPolicy::BySource;
  throw DataError("unknown ground-truth policy \"" + name + "\"");
}

Protocol protocol_from(const std::string& name, double ratio) {
  Protocol protocol;
  if (name == "random") {
    protocol.kind = ProtocolKind::Random;
  } else if (name == "exclude-identical") {
    protocol.kind = ProtocolKind::ExcludeIdentical;
  } else if (name == "ratio") {
    protocol.kind = ProtocolKind::RatioInjection;
    protocol.ratio = ratio;
  } else {
    throw DataError("unknown protocol \"" + name + "\"");
  }
  return protocol;
}

struct PairsCsv {
  static void write(const std::string& path, const PairScoreSet& set) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "score,label\n";
    for (const auto& [score, label] : set.items) out << fmt17(score) << ',' << label << '\n';
  }
  static PairScoreSet read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "score,label")
      throw DataError(path + ": bad pairs header");
    PairScoreSet set;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) throw DataError(path + ": bad pairs row");
      set.items.emplace_back(std::stod(line.substr(0, comma)),
                             std::stoi(line.substr(comma + 1)));
    }
    return set;
  }
};

std::string stem_of(const std::string& path) {
  const auto dot = path.rfind('.');
  return dot == std::string::npos ? path : path.substr(0, dot);
}

// ---- subcommand bodies ----------------------------------------------------

struct GenOpts {
  std::string spec_path, out;
  std::int64_t seed_override = -1;
};

int cmd_gen(const GenOpts& o) {
  CorpusSpec spec = spec_from_json_file(o.spec_path);
  if (o.seed_override >= 0) spec.seed = static_cast<std::uint64_t>(o.seed_override);
  print_manifest(spec.seed, {{"cmd", "gen"},
                             {"spec", o.spec_path},
                             {"out", o.out},
                             {"n_sources", std::to_string(spec.n_sources)},
                             {"variants", std::to_string(spec.variants_per_source)},
                             {"profile", spec.profile.name},
                             {"rename_fraction", fmt17(spec.rename_fraction)},
                             {"seed", std::to_string(spec.seed)}});
  Corpus corpus = generate_corpus(spec);
  write_acfg_stream(corpus, o.out);
  log_info("wrote " + std::to_string(corpus.functions.size()) + " functions to " + o.out);
  return 0;
}

struct TrainOpts {
  std::string corpus, out, timing_out;
  int d_embed = 64, T = 5, sigma_depth = 2, epochs = 30, batch = 16;
  bool use_prev_term = false;
  double lr = 1e-3;
  std::uint64_t seed = 1;
};

int cmd_train(const TrainOpts& o) {
  print_manifest(o.seed, {{"cmd", "train"},
                          {"corpus", o.corpus},
                          {"out", o.out},
                          {"d_embed", std::to_string(o.d_embed)},
                          {"T", std::to_string(o.T)},
                          {"sigma_depth", std::to_string(o.sigma_depth)},
                          {"use_prev_term", o.use_prev_term ? "1" : "0"},
                          {"epochs", std::to_string(o.epochs)},
                          {"batch", std::to_string(o.batch)},
                          {"lr", fmt17(o.lr)},
                          {"seed", std::to_string(o.seed)}});
  Corpus corpus = parse_acfg_stream(o.corpus);
  EmbeddingConfig cfg;
  cfg.d_feat = corpus.d_feat;
  cfg.d_embed = o.d_embed;
  cfg.T = o.T;
  cfg.sigma_depth = o.sigma_depth;
  cfg.use_prev_term = o.use_prev_term;
  cfg.seed = o.seed;
  TrainHyper hyper{o.lr, o.epochs, o.batch, o.seed};

  PhaseTimings timings;
  TrainResult result;
  {
    ScopedTimer timer(timings, "train");
    result = train_on_corpus(corpus.functions, cfg, hyper);
  }
  save_checkpoint(o.out, result.params, cfg);
  log_info("initial loss " + fmt17(result.log.initial_mean_loss) + ", final loss " +
           fmt17(result.log.epoch_mean_loss.empty() ? result.log.initial_mean_loss
                                                    : result.log.epoch_mean_loss.back()));
  if (!o.timing_out.empty()) timings.write_csv(o.timing_out);
  return 0;
}

struct EmbedOpts {
  std::string corpus, model, out, timing_out;
  int threads = 1;
};

int cmd_embed(const EmbedOpts& o) {
  Checkpoint ck = load_checkpoint(o.model);
  print_manifest(ck.config.seed, {{"cmd", "embed"},
                                  {"corpus", o.corpus},
                                  {"model", o.model},
                                  {"out", o.out},
                                  {"threads", std::to_string(o.threads)}});
  Corpus corpus = parse_acfg_stream(o.corpus);
  if (corpus.d_feat != ck.config.d_feat)
    throw DataError("corpus d_feat does not match the checkpoint");
  PhaseTimings timings;
  std::vector<EmbeddedFunction> pool;
  {
    ScopedTimer timer(timings, "embed");
    pool = embed_all(corpus.functions, ck.params, ck.config, o.threads);
  }
  write_index(o.out, pool);
  log_info("embedded " + std::to_string(pool.size()) + " functions");
  if (!o.timing_out.empty()) timings.write_csv(o.timing_out);
  return 0;
}

struct IndexOpts {
  std::string pool, queries, out, protocol = "random";
  double ratio = 0.0;
  std::uint64_t size = 0, seed = 1;
};

int cmd_index(const IndexOpts& o) {
  print_manifest(o.seed, {{"cmd", "index"},
                          {"pool", o.pool},
                          {"queries", o.queries},
                          {"out", o.out},
                          {"protocol", o.protocol},
                          {"ratio", fmt17(o.ratio)},
                          {"size", std::to_string(o.size)},
                          {"seed", std::to_string(o.seed)}});
  const auto pool = read_index(o.pool);
  std::vector<FunctionRef> query_refs;
  if (!o.queries.empty())
    for (const auto& e : read_index(o.queries)) query_refs.push_back(e.ref);

  const Protocol protocol = protocol_from(o.protocol, o.ratio);
  if (protocol.kind != ProtocolKind::Random && query_refs.empty())
    throw DataError("protocol \"" + o.protocol + "\" needs --queries");

  const std::size_t size = o.size == 0 ? pool.size() : o.size;
  Repository repo = build_repository(pool, query_refs, protocol, size, o.seed);
  write_index(o.out, repo.entries);
  log_info("repository of " + std::to_string(repo.size()) + " entries");
  return 0;
}

struct QueryOpts {
  std::string repo, queries, out, policy = "source";
  int k = 5;
  std::uint64_t n_queries = 0, seed = 1;
  std::string timing_out;
};

int cmd_query(const QueryOpts& o) {
  print_manifest(o.seed, {{"cmd", "query"},
                          {"repo", o.repo},
                          {"queries", o.queries},
                          {"out", o.out},
                          {"k", std::to_string(o.k)},
                          {"policy", o.policy},
                          {"n_queries", std::to_string(o.n_queries)},
                          {"seed", std::to_string(o.seed)}});
  Repository repo;
  repo.entries = read_index(o.repo);
  const auto queries = sample_queries(read_index(o.queries), o.n_queries, o.seed);
  const GroundTruthPolicy policy = policy_from(o.policy);

  PhaseTimings timings;
  std::vector<RankedList> lists;
  {
    ScopedTimer timer(timings, "query");
    for (const auto& q : queries) lists.push_back(query_topk(repo, q, o.k, policy));
  }
  write_ranked_lists(o.out, lists, policy);
  log_info(std::to_string(lists.size()) + " queries against " + std::to_string(repo.size()) +
           " entries");
  if (!o.timing_out.empty()) timings.write_csv(o.timing_out);
  return 0;
}

struct EvalOpts {
  std::string corpus, model, repo, pool, queries, out, rectify_out, pairs_out, plots, timing_out;
  int k = 5;
  std::uint64_t n_queries = 100, n_pairs = 2000, seed = 1;
  std::string policy = "source";
  // repository construction when --pool is given instead of --repo
  std::string repo_protocol = "random";
  double ratio = 0.0;
  std::uint64_t repo_size = 0;
  bool fresh_repos = false;  // one repository per query instead of one shared
};

int cmd_eval(const EvalOpts& o) {
  print_manifest(o.seed, {{"cmd", "eval"},
                          {"corpus", o.corpus},
                          {"model", o.model},
                          {"repo", o.repo},
                          {"pool", o.pool},
                          {"repo_protocol", o.repo_protocol},
                          {"ratio", fmt17(o.ratio)},
                          {"repo_size", std::to_string(o.repo_size)},
                          {"fresh_repos", o.fresh_repos ? "1" : "0"},
                          {"queries", o.queries},
                          {"out", o.out},
                          {"k", std::to_string(o.k)},
                          {"policy", o.policy},
                          {"n_queries", std::to_string(o.n_queries)},
                          {"n_pairs", std::to_string(o.n_pairs)},
                          {"seed", std::to_string(o.seed)}});
  Checkpoint ck = load_checkpoint(o.model);
  Corpus corpus = parse_acfg_stream(o.corpus);
  if (corpus.d_feat != ck.config.d_feat)
    throw DataError("corpus d_feat does not match the checkpoint");
  if (o.repo.empty() == o.pool.empty())
    throw DataError("eval needs exactly one of --repo or --pool");

  PhaseTimings timings;
  std::vector<EmbeddedFunction> corpus_pool;
  {
    ScopedTimer timer(timings, "embed");
    corpus_pool = embed_all(corpus.functions, ck.params, ck.config, 1);
  }

  const auto queries = o.queries.empty()
                           ? sample_queries(corpus_pool, o.n_queries, o.seed)
                           : sample_queries(read_index(o.queries), o.n_queries, o.seed);

  // Repository source: a prebuilt index, one built here over the whole
  // query set (default), or a fresh one per query.
  std::vector<EmbeddedFunction> raw_pool;
  Repository shared_repo;
  if (!o.repo.empty()) {
    shared_repo.entries = read_index(o.repo);
  } else {
    raw_pool = read_index(o.pool);
    if (!o.fresh_repos) {
      std::vector<FunctionRef> refs;
      for (const auto& q : queries) refs.push_back(q.ref);
      shared_repo = build_repository(raw_pool, refs, protocol_from(o.repo_protocol, o.ratio),
                                     o.repo_size == 0 ? raw_pool.size() : o.repo_size, o.seed);
    }
  }

  const GroundTruthPolicy policy = policy_from(o.policy);
  std::vector<RankedList> lists, lists_by_name, lists_by_source;
  {
    ScopedTimer timer(timings, "query");
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      const auto& q = queries[qi];
      const Repository* repo = &shared_repo;
      Repository own;
      if (o.fresh_repos) {
        own = build_repository(raw_pool, {q.ref}, protocol_from(o.repo_protocol, o.ratio),
                               o.repo_size == 0 ? raw_pool.size() : o.repo_size, o.seed + qi);
        repo = &own;
      }
      lists_by_name.push_back(query_topk(*repo, q, o.k, GroundTruthPolicy::ByName));
      lists_by_source.push_back(query_topk(*repo, q, o.k, GroundTruthPolicy::BySource));
    }
    lists = policy == GroundTruthPolicy::ByName ? lists_by_name : lists_by_source;
  }

  const PairScoreSet pairs = sample_scored_pairs(corpus_pool, o.n_pairs, o.seed);
  const MetricReport report = aggregate_report(lists, pairs, o.k);
  write_report_csv(report, o.out);
  log_info("auc " + fmt17(report.auc) + ", precision@" + std::to_string(o.k) + " " +
           fmt17(report.precision_k));

  if (!o.rectify_out.empty()) {
    const MetricDeltas d = rectification_delta(lists_by_name, lists_by_source, o.k);
    std::ofstream out(o.rectify_out, std::ios::binary);
    if (!out) throw DataError("cannot write " + o.rectify_out);
    out << "metric,delta\n"
        << "precision_k," << fmt17(d.precision) << '\n'
        << "recall_k," << fmt17(d.recall) << '\n'
        << "f1_k," << fmt17(d.f1) << '\n'
        << "rank1," << fmt17(d.rank1) << '\n'
        << "map_k," << fmt17(d.map) << '\n'
        << "mrr_k," << fmt17(d.mrr) << '\n'
        << "ndcg_k," << fmt17(d.ndcg) << '\n';
  }
  if (!o.pairs_out.empty()) PairsCsv::write(o.pairs_out, pairs);

  if (!o.plots.empty()) {
    std::stringstream ss(o.plots);
    std::string plot;
    while (std::getline(ss, plot, ',')) {
      if (plot == "roc") {
        write_roc_svg(stem_of(o.out) + "_roc.svg", pairs);
      } else if (plot == "ksweep") {
        ChartSeries precision{"precision@K", {}}, recall{"recall@K", {}}, ndcg{"ndcg@K", {}};
        for (int kk = 1; kk <= o.k; ++kk) {
          const auto prf = precision_recall_f1_at_k(lists, kk);
          precision.points.emplace_back(kk, prf.precision);
          recall.points.emplace_back(kk, prf.recall);
          ndcg.points.emplace_back(kk, ndcg_at_k(lists, kk).value);
        }
        write_line_chart_svg(stem_of(o.out) + "_ksweep.svg", "metrics vs K", "K", "value",
                             {precision, recall, ndcg});
      } else {
        throw DataError("unknown plot \"" + plot + "\"");
      }
    }
  }
  if (!o.timing_out.empty()) timings.write_csv(o.timing_out);
  return 0;
}

struct FilterEvalOpts {
  std::string corpus, model, repo, queries, out;
  int k = 5;
  double alpha = 0.05, tol = 1e-6;
  std::uint64_t n_queries = 100, seed = 1;
  std::string policy = "source";
};

int cmd_filter_eval(const FilterEvalOpts& o) {
  print_manifest(o.seed, {{"cmd", "filter-eval"},
                          {"corpus", o.corpus},
                          {"model", o.model},
                          {"repo", o.repo},
                          {"out", o.out},
                          {"k", std::to_string(o.k)},
                          {"alpha", fmt17(o.alpha)},
                          {"tol", fmt17(o.tol)},
                          {"policy", o.policy},
                          {"n_queries", std::to_string(o.n_queries)},
                          {"seed", std::to_string(o.seed)}});
  Checkpoint ck = load_checkpoint(o.model);
  Corpus corpus = parse_acfg_stream(o.corpus);
  Repository repo;
  repo.entries = read_index(o.repo);

  GraphTable graphs;
  graphs.add(corpus.functions);
  const auto lookup = graphs.lookup();

  const auto corpus_pool = embed_all(corpus.functions, ck.params, ck.config, 1);
  const auto queries = o.queries.empty()
                           ? sample_queries(corpus_pool, o.n_queries, o.seed)
                           : sample_queries(read_index(o.queries), o.n_queries, o.seed);
  const GroundTruthPolicy policy = policy_from(o.policy);

  std::vector<RankedList> before, after;
  for (const auto& q : queries) {
    RankedList full = query_full(repo, q, policy);
    RankedList top;
    top.query = full.query;
    top.K = o.k;
    top.total_relevant_in_repo = full.total_relevant_in_repo;
    const auto keep = std::min<std::size_t>(full.results.size(), static_cast<std::size_t>(o.k));
    top.results.assign(full.results.begin(), full.results.begin() + static_cast<std::ptrdiff_t>(keep));
    before.push_back(top);
    after.push_back(filter_full_ranking(full, o.k, lookup, o.alpha, o.tol));
  }

  const FilterEffect effect = evaluate_filter_effect(before, after, o.k);
  const auto prf_before = precision_recall_f1_at_k(before, o.k);
  const auto prf_after = precision_recall_f1_at_k(after, o.k);

  std::ofstream out(o.out, std::ios::binary);
  if (!out) throw DataError("cannot write " + o.out);
  out << "metric,before,after,delta\n";
  out << "precision_k," << fmt17(prf_before.precision) << ',' << fmt17(prf_after.precision) << ','
      << fmt17(effect.delta_precision) << '\n';
  out << "recall_k," << fmt17(prf_before.recall) << ',' << fmt17(prf_after.recall) << ','
      << fmt17(effect.delta_recall) << '\n';
  out << "query,precision_before,precision_after,recall_before,recall_after\n";
  for (const auto& pq : effect.per_query)
    out << pq.query.function_name << ',' << fmt17(pq.precision_before) << ','
        << fmt17(pq.precision_after) << ',' << fmt17(pq.recall_before) << ','
        << fmt17(pq.recall_after) << '\n';
  log_info("precision " + fmt17(prf_before.precision) + " -> " + fmt17(prf_after.precision));
  return 0;
}

struct CollideOpts {
  std::string corpus, model, repo, queries, out;
  int k = 5;
  double tau_sim = 0.9, tau_node = 0.3;
  std::uint64_t n_queries = 100, seed = 1;
  std::string policy = "source";
};

int cmd_collide(const CollideOpts& o) {
  print_manifest(o.seed, {{"cmd", "collide"},
                          {"corpus", o.corpus},
                          {"model", o.model},
                          {"repo", o.repo},
                          {"out", o.out},
                          {"k", std::to_string(o.k)},
                          {"tau_sim", fmt17(o.tau_sim)},
                          {"tau_node", fmt17(o.tau_node)},
                          {"policy", o.policy},
                          {"n_queries", std::to_string(o.n_queries)},
                          {"seed", std::to_string(o.seed)}});
  Checkpoint ck = load_checkpoint(o.model);
  Corpus corpus = parse_acfg_stream(o.corpus);
  Repository repo;
  repo.entries = read_index(o.repo);

  GraphTable graphs;
  graphs.add(corpus.functions);

  const auto corpus_pool = embed_all(corpus.functions, ck.params, ck.config, 1);
  const auto queries = o.queries.empty()
                           ? sample_queries(corpus_pool, o.n_queries, o.seed)
                           : sample_queries(read_index(o.queries), o.n_queries, o.seed);
  const GroundTruthPolicy policy = policy_from(o.policy);

  std::vector<RankedList> lists;
  for (const auto& q : queries) lists.push_back(query_topk(repo, q, o.k, policy));

  const FpBreakdown breakdown =
      classify_false_positives(lists, graphs.lookup(), ck.params, ck.config, o.tau_sim, o.tau_node);
  write_breakdown_json(breakdown, o.out);
  log_info("FPs: " + std::to_string(breakdown.total()) + " (collision " +
           std::to_string(breakdown.collision) + ", rename " + std::to_string(breakdown.rename) +
           ", other " + std::to_string(breakdown.other) + ")");
  return 0;
}

struct VulnOpts {
  std::string queries, pool, model, out;
  int k = 10;
};

int cmd_vuln(const VulnOpts& o) {
  Checkpoint ck = load_checkpoint(o.model);
  print_manifest(ck.config.seed, {{"cmd", "vuln"},
                                  {"queries", o.queries},
                                  {"pool", o.pool},
                                  {"model", o.model},
                                  {"out", o.out},
                                  {"k", std::to_string(o.k)}});
  Corpus query_corpus = parse_acfg_stream(o.queries);
  if (query_corpus.d_feat != ck.config.d_feat)
    throw DataError("query corpus d_feat does not match the checkpoint");
  Repository pool;
  pool.entries = read_index(o.pool);

  const auto query_pool = embed_all(query_corpus.functions, ck.params, ck.config, 1);
  const auto reports = vuln_search(to_embeddings(query_pool), pool, o.k);

  std::ofstream out(o.out, std::ios::binary);
  if (!out) throw DataError("cannot write " + o.out);
  out << "query,max_similarity,min_similarity,bugs\n";
  for (const auto& r : reports)
    out << r.query.function_name << ',' << fmt17(r.max_similarity) << ','
        << fmt17(r.min_similarity) << ',' << r.confirmed << '\n';
  log_info(std::to_string(reports.size()) + " vulnerability queries");
  return 0;
}

struct LicenseOpts {
  std::string query_lib, manifest, model, truth, out;
};

int cmd_license(const LicenseOpts& o) {
  Checkpoint ck = load_checkpoint(o.model);
  print_manifest(ck.config.seed, {{"cmd", "license"},
                                  {"query_lib", o.query_lib},
                                  {"manifest", o.manifest},
                                  {"model", o.model},
                                  {"truth", o.truth},
                                  {"out", o.out}});
  Corpus lib = parse_acfg_stream(o.query_lib);
  if (lib.d_feat != ck.config.d_feat)
    throw DataError("query library d_feat does not match the checkpoint");
  const auto firmware = load_firmware_manifest(o.manifest);
  const auto queries = to_embeddings(embed_all(lib.functions, ck.params, ck.config, 1));

  const LibraryRanking ranking = rank_target_libraries(o.query_lib, queries, firmware, o.truth);

  std::ofstream out(o.out, std::ios::binary);
  if (!out) throw DataError("cannot write " + o.out);
  out << "library,s_qt,rank,is_truth\n";
  for (const auto& e : ranking.entries)
    out << e.library << ',' << fmt17(e.S_QT) << ',' << e.rank << ','
        << (e.library == o.truth ? 1 : 0) << '\n';
  std::cout << "truth-rank " << (o.truth.empty() ? "(none)" : o.truth) << ' '
            << ranking.truth_rank << '\n';
  return 0;
}

struct ReportOpts {
  std::string pairs, sweep, out, x_label = "x", y_label = "value", title = "chart";
};

int cmd_report(const ReportOpts& o) {
  print_manifest(0, {{"cmd", "report"}, {"pairs", o.pairs}, {"sweep", o.sweep}, {"out", o.out}});
  if (!o.pairs.empty()) {
    write_roc_svg(o.out, PairsCsv::read(o.pairs));
    return 0;
  }
  if (!o.sweep.empty()) {
    // sweep CSV: x,series,value
    std::ifstream in(o.sweep);
    if (!in) throw DataError("cannot open " + o.sweep);
    std::string line;
    if (!std::getline(in, line) || line != "x,series,value")
      throw DataError(o.sweep + ": bad sweep header");
    std::map<std::string, ChartSeries> series;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string x, name, value;
      if (!std::getline(ss, x, ',') || !std::getline(ss, name, ',') || !std::getline(ss, value))
        throw DataError(o.sweep + ": bad sweep row");
      auto& s = series[name];
      s.name = name;
      s.points.emplace_back(std::stod(x), std::stod(value));
    }
    std::vector<ChartSeries> list;
    for (auto& [name, s] : series) list.push_back(std::move(s));
    write_line_chart_svg(o.out, o.title, o.x_label, o.y_label, list);
    return 0;
  }
  throw DataError("report needs --pairs or --sweep");
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"binary-function similarity search and evaluation workbench"};
  app.require_subcommand(1);

  GenOpts gen;
  auto* cmd_gen_p = app.add_subcommand("gen", "generate a synthetic corpus");
  cmd_gen_p->add_option("--spec", gen.spec_path, "corpus spec JSON")->required();
  cmd_gen_p->add_option("--out", gen.out, "output corpus (JSONL)")->required();
  cmd_gen_p->add_option("--seed", gen.seed_override, "override the spec seed");

  TrainOpts train;
  auto* cmd_train_p = app.add_subcommand("train", "train an embedding model");
  cmd_train_p->add_option("--corpus", train.corpus)->required();
  cmd_train_p->add_option("--out", train.out)->required();
  cmd_train_p->add_option("--d-embed", train.d_embed);
  cmd_train_p->add_option("--iterations", train.T, "message-passing rounds");
  cmd_train_p->add_option("--sigma-depth", train.sigma_depth);
  cmd_train_p->add_flag("--use-prev-term", train.use_prev_term);
  cmd_train_p->add_option("--epochs", train.epochs);
  cmd_train_p->add_option("--batch", train.batch);
  cmd_train_p->add_option("--lr", train.lr);
  cmd_train_p->add_option("--seed", train.seed);
  cmd_train_p->add_option("--timing-out", train.timing_out);

  EmbedOpts embed;
  auto* cmd_embed_p = app.add_subcommand("embed", "embed corpus functions");
  cmd_embed_p->add_option("--corpus", embed.corpus)->required();
  cmd_embed_p->add_option("--model", embed.model)->required();
  cmd_embed_p->add_option("--out", embed.out)->required();
  cmd_embed_p->add_option("--threads", embed.threads);
  cmd_embed_p->add_option("--timing-out", embed.timing_out);

  IndexOpts index;
  auto* cmd_index_p = app.add_subcommand("index", "build a search repository");
  cmd_index_p->add_option("--pool", index.pool)->required();
  cmd_index_p->add_option("--out", index.out)->required();
  cmd_index_p->add_option("--protocol", index.protocol, "random|exclude-identical|ratio");
  cmd_index_p->add_option("--ratio", index.ratio);
  cmd_index_p->add_option("--size", index.size, "0 = whole pool");
  cmd_index_p->add_option("--seed", index.seed);
  cmd_index_p->add_option("--queries", index.queries, "query embeddings (.bsdx)");

  QueryOpts query;
  auto* cmd_query_p = app.add_subcommand("query", "top-K search");
  cmd_query_p->add_option("--repo", query.repo)->required();
  cmd_query_p->add_option("--queries", query.queries)->required();
  cmd_query_p->add_option("--out", query.out)->required();
  cmd_query_p->add_option("--k", query.k);
  cmd_query_p->add_option("--policy", query.policy, "name|source");
  cmd_query_p->add_option("--n-queries", query.n_queries, "0 = all");
  cmd_query_p->add_option("--seed", query.seed);
  cmd_query_p->add_option("--timing-out", query.timing_out);

  EvalOpts eval;
  auto* cmd_eval_p = app.add_subcommand("eval", "full metric report");
  cmd_eval_p->add_option("--corpus", eval.corpus)->required();
  cmd_eval_p->add_option("--model", eval.model)->required();
  cmd_eval_p->add_option("--repo", eval.repo, "prebuilt repository index (.bsdx)");
  cmd_eval_p->add_option("--pool", eval.pool, "pool index to build repositories from");
  cmd_eval_p->add_option("--repo-protocol", eval.repo_protocol,
                         "random|exclude-identical|ratio (with --pool)");
  cmd_eval_p->add_option("--ratio", eval.ratio);
  cmd_eval_p->add_option("--repo-size", eval.repo_size, "0 = whole pool");
  cmd_eval_p->add_flag("--fresh-repos", eval.fresh_repos,
                       "build a fresh repository per query (with --pool)");
  cmd_eval_p->add_option("--queries", eval.queries, "query embeddings (.bsdx); default: corpus");
  cmd_eval_p->add_option("--out", eval.out)->required();
  cmd_eval_p->add_option("--k", eval.k);
  cmd_eval_p->add_option("--policy", eval.policy, "name|source");
  cmd_eval_p->add_option("--n-queries", eval.n_queries, "0 = all");
  cmd_eval_p->add_option("--n-pairs", eval.n_pairs);
  cmd_eval_p->add_option("--seed", eval.seed);
  cmd_eval_p->add_option("--rectify", eval.rectify_out, "write rectification deltas CSV");
  cmd_eval_p->add_option("--pairs-out", eval.pairs_out, "write scored pairs CSV");
  cmd_eval_p->add_option("--plots", eval.plots, "comma list: roc,ksweep");
  cmd_eval_p->add_option("--timing-out", eval.timing_out);

  FilterEvalOpts filter;
  auto* cmd_filter_p = app.add_subcommand("filter-eval", "graph-alignment filter effect");
  cmd_filter_p->add_option("--corpus", filter.corpus)->required();
  cmd_filter_p->add_option("--model", filter.model)->required();
  cmd_filter_p->add_option("--repo", filter.repo)->required();
  cmd_filter_p->add_option("--queries", filter.queries);
  cmd_filter_p->add_option("--out", filter.out)->required();
  cmd_filter_p->add_option("--k", filter.k);
  cmd_filter_p->add_option("--alpha", filter.alpha);
  cmd_filter_p->add_option("--tol", filter.tol);
  cmd_filter_p->add_option("--policy", filter.policy);
  cmd_filter_p->add_option("--n-queries", filter.n_queries);
  cmd_filter_p->add_option("--seed", filter.seed);

  CollideOpts collide;
  auto* cmd_collide_p = app.add_subcommand("collide", "classify search false positives");
  cmd_collide_p->add_option("--corpus", collide.corpus)->required();
  cmd_collide_p->add_option("--model", collide.model)->required();
  cmd_collide_p->add_option("--repo", collide.repo)->required();
  cmd_collide_p->add_option("--queries", collide.queries);
  cmd_collide_p->add_option("--out", collide.out)->required();
  cmd_collide_p->add_option("--k", collide.k);
  cmd_collide_p->add_option("--tau-sim", collide.tau_sim);
  cmd_collide_p->add_option("--tau-node", collide.tau_node);
  cmd_collide_p->add_option("--policy", collide.policy);
  cmd_collide_p->add_option("--n-queries", collide.n_queries);
  cmd_collide_p->add_option("--seed", collide.seed);

  VulnOpts vuln;
  auto* cmd_vuln_p = app.add_subcommand("vuln", "vulnerability search");
  cmd_vuln_p->add_option("--queries", vuln.queries, "vulnerable functions (JSONL)")->required();
  cmd_vuln_p->add_option("--pool", vuln.pool, "firmware pool index (.bsdx)")->required();
  cmd_vuln_p->add_option("--model", vuln.model)->required();
  cmd_vuln_p->add_option("--out", vuln.out)->required();
  cmd_vuln_p->add_option("--k", vuln.k);

  LicenseOpts license;
  auto* cmd_license_p = app.add_subcommand("license", "license-violation detection");
  cmd_license_p->add_option("--query-lib", license.query_lib)->required();
  cmd_license_p->add_option("--firmware-manifest", license.manifest)->required();
  cmd_license_p->add_option("--model", license.model)->required();
  cmd_license_p->add_option("--truth", license.truth, "expected matching library name");
  cmd_license_p->add_option("--out", license.out)->required();

  ReportOpts report;
  auto* cmd_report_p = app.add_subcommand("report", "emit SVG charts");
  cmd_report_p->add_option("--pairs", report.pairs, "score,label CSV -> ROC");
  cmd_report_p->add_option("--sweep", report.sweep, "x,series,value CSV -> line chart");
  cmd_report_p->add_option("--out", report.out)->required();
  cmd_report_p->add_option("--title", report.title);
  cmd_report_p->add_option("--x-label", report.x_label);
  cmd_report_p->add_option("--y-label", report.y_label);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n' << app.help();
    return 1;
  }

  try {
    if (cmd_gen_p->parsed()) return cmd_gen(gen);
    if (cmd_train_p->parsed()) return cmd_train(train);
    if (cmd_embed_p->parsed()) return cmd_embed(embed);
    if (cmd_index_p->parsed()) return cmd_index(index);
    if (cmd_query_p->parsed()) return cmd_query(query);
    if (cmd_eval_p->parsed()) return cmd_eval(eval);
    if (cmd_filter_p->parsed()) return cmd_filter_eval(filter);
    if (cmd_collide_p->parsed()) return cmd_collide(collide);
    if (cmd_vuln_p->parsed()) return cmd_vuln(vuln);
    if (cmd_license_p->parsed()) return cmd_license(license);
    if (cmd_report_p->parsed()) return cmd_report(report);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  std::cerr << app.help();
  return 1;
}

int run_command(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_command(args);
}

}  // namespace binsd
