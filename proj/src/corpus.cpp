#include "binsd/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "binsd/rng.hpp"

namespace binsd {

using nlohmann::json;

const char* to_string(TransformKind k) {
  switch (k) {
    case TransformKind::BlockSplit: return "BlockSplit";
    case TransformKind::BlockMerge: return "BlockMerge";
    case TransformKind::FeatureJitter: return "FeatureJitter";
    case TransformKind::FeatureScale: return "FeatureScale";
    case TransformKind::EdgeRewire: return "EdgeRewire";
  }
  return "?";
}

std::optional<TransformKind> parse_transform_kind(const std::string& s) {
  if (s == "BlockSplit") return TransformKind::BlockSplit;
  if (s == "BlockMerge") return TransformKind::BlockMerge;
  if (s == "FeatureJitter") return TransformKind::FeatureJitter;
  if (s == "FeatureScale") return TransformKind::FeatureScale;
  if (s == "EdgeRewire") return TransformKind::EdgeRewire;
  return std::nullopt;
}

TransformProfile named_profile(const std::string& name) {
  using TK = TransformKind;
  TransformProfile p;
  p.name = name;
  if (name == "easy") {
    p.cross_arch = false;
    p.transforms = {{TK::BlockSplit, 0.25}, {TK::BlockMerge, 0.15}, {TK::FeatureJitter, 0.60},
                    {TK::FeatureScale, 0.45}, {TK::EdgeRewire, 0.20}};
  } else if (name == "hard") {
    p.cross_arch = true;
    p.transforms = {{TK::BlockSplit, 0.45}, {TK::BlockMerge, 0.30}, {TK::FeatureJitter, 0.90},
                    {TK::FeatureScale, 0.70}, {TK::EdgeRewire, 0.40}};
  } else if (name == "structural") {
    p.cross_arch = false;
    p.transforms = {{TK::BlockSplit, 0.10}, {TK::EdgeRewire, 0.15}};
  } else if (name == "none") {
    p.cross_arch = false;
    p.transforms = {};
  } else {
    throw DataError("unknown transform profile \"" + name + "\"");
  }
  return p;
}

void check_spec(const CorpusSpec& spec) {
  if (spec.n_sources < 1) throw DataError("n_sources must be >= 1");
  if (spec.variants_per_source < 1) throw DataError("variants_per_source must be >= 1");
  if (spec.node_count_min < 1 || spec.node_count_min > spec.node_count_max)
    throw DataError("node_count_range must satisfy 1 <= min <= max");
  if (spec.d_feat < 1) throw DataError("d_feat must be >= 1");
  if (!(spec.rename_fraction >= 0.0 && spec.rename_fraction <= 1.0))
    throw DataError("rename_fraction must be in [0,1]");
  for (const auto& t : spec.profile.transforms)
    if (!std::isfinite(t.intensity) || t.intensity < 0.0)
      throw DataError("transform intensity must be finite and >= 0");
}

namespace {

TransformProfile profile_from_json(const json& j) {
  if (j.is_string()) return named_profile(j.get<std::string>());
  TransformProfile p;
  p.name = j.value("name", "custom");
  p.cross_arch = j.value("cross_arch", false);
  for (const auto& jt : j.at("transforms")) {
    const auto kind = parse_transform_kind(jt.at("kind").get<std::string>());
    if (!kind) throw DataError("unknown transform kind \"" + jt.at("kind").get<std::string>() + "\"");
    p.transforms.push_back({*kind, jt.at("intensity").get<double>()});
  }
  return p;
}

}  // namespace

CorpusSpec spec_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed corpus spec: ") + e.what());
  }
  try {
    CorpusSpec spec;
    spec.n_sources = j.at("n_sources").get<int>();
    spec.variants_per_source = j.at("variants_per_source").get<int>();
    const auto& range = j.at("node_count_range");
    spec.node_count_min = range.at(0).get<int>();
    spec.node_count_max = range.at(1).get<int>();
    spec.d_feat = j.at("d_feat").get<int>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.rename_fraction = j.value("rename_fraction", 0.0);
    spec.profile = j.contains("transform_profile") ? profile_from_json(j["transform_profile"])
                                                   : named_profile("easy");
    check_spec(spec);
    return spec;
  } catch (const json::exception& e) {
    throw DataError(std::string("bad corpus spec: ") + e.what());
  }
}

CorpusSpec spec_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return spec_from_json_string(text);
}

AttributedCfg generate_source_function(const CorpusSpec& spec, int index) {
  check_spec(spec);
  if (index < 0 || index >= spec.n_sources) throw DataError("source index out of range");
  SplitMix64 rng = SplitMix64(spec.seed).split("source", static_cast<std::uint64_t>(index));

  AttributedCfg g;
  g.function_name = "fn_" + std::to_string(index);
  g.source_id = "src:" + std::to_string(index);
  g.compilation = {Arch::X64, OptLevel::O0, "gcc"};

  const int v = static_cast<int>(rng.uniform_int(spec.node_count_min, spec.node_count_max));
  for (int i = 0; i < v; ++i) {
    BasicBlockNode n;
    n.node_id = i;
    for (int k = 0; k < spec.d_feat; ++k) n.features.push_back(rng.uniform(0.0, 8.0));
    g.nodes.push_back(std::move(n));
  }

  // Spanning arborescence keeps node 0 the entry; extra forward edges give
  // CFG-like branch density around 1.5 * V.
  std::set<std::pair<int, int>> edges;
  for (int i = 1; i < v; ++i)
    edges.insert({static_cast<int>(rng.uniform_int(0, i - 1)), i});
  const int extra = v / 2;
  for (int k = 0; k < extra; ++k) {
    const int a = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(v)));
    const int b = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(v)));
    if (a != b) edges.insert({a, b});
  }
  g.edges.assign(edges.begin(), edges.end());
  return g;
}

double feature_scale_factor(const CompilationTag& tag, double intensity, int component) {
  double arch_coef = 0.0;
  switch (tag.arch) {
    case Arch::X64: arch_coef = 0.0; break;
    case Arch::X86: arch_coef = 0.5; break;
    case Arch::ARM: arch_coef = 1.0; break;
  }
  double opt_coef = 0.0;
  switch (tag.opt_level) {
    case OptLevel::O0: opt_coef = 0.0; break;
    case OptLevel::O1: opt_coef = 0.35; break;
    case OptLevel::O2: opt_coef = 0.7; break;
    case OptLevel::O3: opt_coef = 1.0; break;
  }
  // Per-component patterns: an ISA or optimization change does not scale
  // every feature alike (instruction counts inflate while call counts
  // stay put), so the drift must bend the feature direction, not just
  // its length. x64/O0 stays the identity reference.
  static constexpr double kArchPattern[] = {1.0, -0.6, 0.4, -1.0, 0.7, -0.3, 0.9, -0.8};
  static constexpr double kOptPattern[] = {-0.5, 1.0, -0.9, 0.6, -1.0, 0.8, -0.4, 0.5};
  const int slot = component & 7;
  const double factor = 1.0 + intensity * arch_coef * kArchPattern[slot] +
                        intensity * opt_coef * kOptPattern[slot];
  return std::max(factor, 0.05);
}

namespace {

bool undirected_connected(int v, const std::vector<std::pair<int, int>>& edges) {
  if (v <= 1) return true;
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(v));
  for (const auto& [a, b] : edges) {
    adj[static_cast<std::size_t>(a)].push_back(b);
    adj[static_cast<std::size_t>(b)].push_back(a);
  }
  std::vector<char> seen(static_cast<std::size_t>(v), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int reached = 1;
  while (!stack.empty()) {
    const int cur = stack.back();
    stack.pop_back();
    for (int nxt : adj[static_cast<std::size_t>(cur)]) {
      if (!seen[static_cast<std::size_t>(nxt)]) {
        seen[static_cast<std::size_t>(nxt)] = 1;
        ++reached;
        stack.push_back(nxt);
      }
    }
  }
  return reached == v;
}

void apply_block_split(AttributedCfg& g, double intensity, SplitMix64& rng) {
  const int n_splits = static_cast<int>(intensity * g.node_count());
  for (int s = 0; s < n_splits; ++s) {
    const int u = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(g.node_count())));
    const int w = g.node_count();
    BasicBlockNode tail;
    tail.node_id = w;
    tail.features = g.nodes[static_cast<std::size_t>(u)].features;
    // The block's work is divided between the two halves.
    for (double& x : g.nodes[static_cast<std::size_t>(u)].features) x *= 0.5;
    for (double& x : tail.features) x *= 0.5;
    for (auto& e : g.edges)
      if (e.first == u) e.first = w;
    g.nodes.push_back(std::move(tail));
    g.edges.emplace_back(u, w);
  }
}

void apply_block_merge(AttributedCfg& g, double intensity, SplitMix64& rng) {
  const int n_merges = static_cast<int>(intensity * g.node_count());
  for (int s = 0; s < n_merges; ++s) {
    if (g.node_count() < 2 || g.edges.empty()) return;  // floor at one node
    const auto pick = rng.next_below(g.edges.size());
    const auto [u, v] = g.edges[pick];
    auto& keep = g.nodes[static_cast<std::size_t>(u)];
    const auto& gone = g.nodes[static_cast<std::size_t>(v)];
    for (std::size_t k = 0; k < keep.features.size(); ++k) keep.features[k] += gone.features[k];

    std::set<std::pair<int, int>> rewired;
    for (const auto& [a, b] : g.edges) {
      int na = a == v ? u : a;
      int nb = b == v ? u : b;
      if (na == nb) continue;
      // Close the id gap left by the removed node.
      if (na > v) --na;
      if (nb > v) --nb;
      rewired.insert({na, nb});
    }
    g.nodes.erase(g.nodes.begin() + v);
    for (int i = 0; i < g.node_count(); ++i) g.nodes[static_cast<std::size_t>(i)].node_id = i;
    g.edges.assign(rewired.begin(), rewired.end());
  }
}

void apply_feature_jitter(AttributedCfg& g, double intensity, SplitMix64& rng) {
  for (auto& n : g.nodes)
    for (double& x : n.features) x += intensity * rng.uniform(-1.0, 1.0);
}

void apply_edge_rewire(AttributedCfg& g, double intensity, SplitMix64& rng) {
  const int v = g.node_count();
  if (v < 2) return;
  const int n_moves = static_cast<int>(intensity * static_cast<double>(g.edges.size()));
  for (int s = 0; s < n_moves; ++s) {
    if (g.edges.empty()) return;
    const auto pick = rng.next_below(g.edges.size());
    const auto original = g.edges[pick];
    std::vector<std::pair<int, int>> without = g.edges;
    without.erase(without.begin() + static_cast<std::ptrdiff_t>(pick));
    if (!undirected_connected(v, without)) continue;  // this edge is a bridge, keep it

    bool placed = false;
    for (int attempt = 0; attempt < 10 && !placed; ++attempt) {
      const int a = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(v)));
      const int b = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(v)));
      if (a == b) continue;
      if (std::find(without.begin(), without.end(), std::make_pair(a, b)) != without.end())
        continue;
      without.emplace_back(a, b);
      placed = true;
    }
    if (!placed) without.push_back(original);
    g.edges = std::move(without);
  }
}

}  // namespace

AttributedCfg apply_variant(const AttributedCfg& g, const CompilationTag& tag,
                            const std::vector<VariantTransform>& transforms, std::uint64_t seed) {
  AttributedCfg out = g;
  out.compilation = tag;
  SplitMix64 base(seed);
  for (std::size_t idx = 0; idx < transforms.size(); ++idx) {
    const auto& t = transforms[idx];
    SplitMix64 rng = base.split("transform", idx);
    switch (t.kind) {
      case TransformKind::BlockSplit: apply_block_split(out, t.intensity, rng); break;
      case TransformKind::BlockMerge: apply_block_merge(out, t.intensity, rng); break;
      case TransformKind::FeatureJitter: apply_feature_jitter(out, t.intensity, rng); break;
      case TransformKind::FeatureScale: {
        for (auto& n : out.nodes)
          for (std::size_t k = 0; k < n.features.size(); ++k)
            n.features[k] *= feature_scale_factor(tag, t.intensity, static_cast<int>(k));
        break;
      }
      case TransformKind::EdgeRewire: apply_edge_rewire(out, t.intensity, rng); break;
    }
  }
  return out;
}

namespace {

CompilationTag tag_for_variant(int v, bool cross_arch) {
  if (v == 0) return {Arch::X64, OptLevel::O0, "gcc"};
  static constexpr Arch kArchCycle[] = {Arch::X64, Arch::X86, Arch::ARM};
  static constexpr OptLevel kOptCycle[] = {OptLevel::O1, OptLevel::O2, OptLevel::O3};
  CompilationTag tag;
  tag.arch = cross_arch ? kArchCycle[v % 3] : Arch::X64;
  tag.opt_level = kOptCycle[(v - 1) % 3];
  tag.compiler = (v % 2 == 1) ? "gcc" : "clang";
  return tag;
}

}  // namespace

Corpus generate_corpus(const CorpusSpec& spec) {
  check_spec(spec);
  Corpus corpus;
  corpus.d_feat = spec.d_feat;
  corpus.rng_algorithm = std::string(kRngAlgorithm);
  const SplitMix64 root(spec.seed);

  for (int s = 0; s < spec.n_sources; ++s) {
    AttributedCfg base = generate_source_function(spec, s);
    corpus.functions.push_back(base);
    for (int v = 1; v < spec.variants_per_source; ++v) {
      const std::uint64_t key = static_cast<std::uint64_t>(s) * 65536u + static_cast<std::uint64_t>(v);
      const CompilationTag tag = tag_for_variant(v, spec.profile.cross_arch);
      AttributedCfg variant =
          apply_variant(base, tag, spec.profile.transforms, root.split("variant", key).state());
      SplitMix64 rename_rng = root.split("rename", key);
      if (rename_rng.bernoulli(spec.rename_fraction))
        variant.function_name = base.function_name + "_r" + std::to_string(v);
      corpus.functions.push_back(std::move(variant));
    }
  }
  return corpus;
}

DatasetSplit split_dataset(const std::vector<AttributedCfg>& corpus, double train_frac,
                           std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw DataError("train_frac must be in (0,1)");

  std::vector<std::string> sources;
  std::set<std::string> seen;
  for (const auto& g : corpus)
    if (seen.insert(g.source_id).second) sources.push_back(g.source_id);
  if (sources.size() < 3) throw DataError("split needs >= 3 distinct source_ids");

  SplitMix64 rng = SplitMix64(seed).split("dataset-split");
  shuffle(sources, rng);

  const auto n = sources.size();
  auto n_train = static_cast<std::size_t>(train_frac * static_cast<double>(n));
  n_train = std::max<std::size_t>(1, std::min(n_train, n - 2));
  const std::size_t rem = n - n_train;
  const std::size_t n_val = (rem + 1) / 2;  // remainder goes to validation first

  std::map<std::string, int> bucket;  // 0 train, 1 val, 2 test
  for (std::size_t i = 0; i < n; ++i)
    bucket[sources[i]] = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);

  DatasetSplit split;
  for (const auto& g : corpus) {
    switch (bucket[g.source_id]) {
      case 0: split.train.push_back(g); break;
      case 1: split.validation.push_back(g); break;
      default: split.test.push_back(g); break;
    }
  }
  return split;
}

}  // namespace binsd
