#include "binsd/collision.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

namespace binsd {

using nlohmann::json;

namespace {

double safe_cos(const Vec& a, const Vec& b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

// Mean matched cosine of a one-directional greedy sweep: each vertex of
// `from` grabs its best remaining partner in `to`; surplus counts as 0.
double directed_mean_cosine(const VertexStates& from, const VertexStates& to) {
  std::vector<char> used(to.size(), 0);
  double total = 0.0;
  for (const Vec& mu : from.mu) {
    double best = -2.0;
    std::size_t best_j = to.size();
    for (std::size_t j = 0; j < to.size(); ++j) {
      if (used[j]) continue;
      const double c = safe_cos(mu, to.mu[j]);
      if (c > best) {
        best = c;
        best_j = j;
      }
    }
    if (best_j < to.size()) {
      used[best_j] = 1;
      total += best;
    }
  }
  return total / static_cast<double>(std::max(from.size(), to.size()));
}

}  // namespace

double vertex_state_distance(const VertexStates& a, const VertexStates& b) {
  if (a.size() == 0 || b.size() == 0) throw DataError("vertex state set is empty");
  if (a.mu.front().size() != b.mu.front().size())
    throw DataError("vertex state dimension mismatch");
  const double ab = 1.0 - directed_mean_cosine(a, b);
  const double ba = 1.0 - directed_mean_cosine(b, a);
  return 0.5 * (ab + ba);
}

const char* to_string(CollisionVerdict v) {
  switch (v) {
    case CollisionVerdict::Collision: return "collision";
    case CollisionVerdict::Rename: return "rename";
    case CollisionVerdict::NotCollision: return "other";
  }
  return "?";
}

namespace {

double probe_similarity(const CollisionProbe& fa, const CollisionProbe& fb) {
  const bool za = norm(fa.embedding.vector) == 0.0;
  const bool zb = norm(fb.embedding.vector) == 0.0;
  if (za && zb) return 1.0;  // both readouts cancelled to zero
  if (za || zb) return 0.0;
  return safe_cos(fa.embedding.vector, fb.embedding.vector);
}

}  // namespace

CollisionVerdict detect_collision(const CollisionProbe& fa, const CollisionProbe& fb,
                                  double tau_sim, double tau_node) {
  const double sim = probe_similarity(fa, fb);
  if (sim < tau_sim) return CollisionVerdict::NotCollision;
  const bool same_source = fa.embedding.ref.source_id == fb.embedding.ref.source_id;
  if (!same_source) {
    return vertex_state_distance(fa.states, fb.states) >= tau_node ? CollisionVerdict::Collision
                                                                   : CollisionVerdict::NotCollision;
  }
  if (fa.embedding.ref.function_name != fb.embedding.ref.function_name)
    return CollisionVerdict::Rename;
  return CollisionVerdict::NotCollision;
}

FpBreakdown classify_false_positives(const std::vector<RankedList>& lists,
                                     const GraphLookup& graphs, const ModelParams& params,
                                     const EmbeddingConfig& cfg, double tau_sim, double tau_node) {
  FpBreakdown out;
  // Embeddings are recomputed at most once per distinct function.
  std::map<std::string, CollisionProbe> cache;
  auto probe_for = [&](const FunctionRef& ref) -> const CollisionProbe& {
    std::string key = ref.source_id + '\x1f' + ref.function_name + '\x1f' +
                      to_string(ref.compilation.arch) + '\x1f' +
                      to_string(ref.compilation.opt_level) + '\x1f' + ref.compilation.compiler;
    auto it = cache.find(key);
    if (it == cache.end()) {
      EmbedResult r = embed_function(graphs(ref), params, cfg);
      it = cache.emplace(std::move(key), CollisionProbe{r.embedding, std::move(r.states)}).first;
    }
    return it->second;
  };

  for (const auto& list : lists) {
    const CollisionProbe& q = probe_for(list.query);
    for (const auto& r : list.results) {
      if (r.relevant) continue;
      const CollisionProbe& c = probe_for(r.ref);
      FpBreakdown::Pair pair;
      pair.query = list.query;
      pair.candidate = r.ref;
      pair.similarity = probe_similarity(q, c);
      pair.state_distance = vertex_state_distance(q.states, c.states);
      pair.verdict = detect_collision(q, c, tau_sim, tau_node);
      switch (pair.verdict) {
        case CollisionVerdict::Collision: ++out.collision; break;
        case CollisionVerdict::Rename: ++out.rename; break;
        case CollisionVerdict::NotCollision: ++out.other; break;
      }
      out.pairs.push_back(std::move(pair));
    }
  }
  return out;
}

namespace {

json ref_to_json(const FunctionRef& r) {
  return {{"function_name", r.function_name},
          {"source_id", r.source_id},
          {"arch", to_string(r.compilation.arch)},
          {"opt_level", to_string(r.compilation.opt_level)},
          {"compiler", r.compilation.compiler}};
}

}  // namespace

std::string breakdown_to_json(const FpBreakdown& b) {
  json j;
  j["collision"] = b.collision;
  j["rename"] = b.rename;
  j["other"] = b.other;
  json pairs = json::array();
  for (const auto& p : b.pairs) {
    pairs.push_back({{"query", ref_to_json(p.query)},
                     {"candidate", ref_to_json(p.candidate)},
                     {"similarity", p.similarity},
                     {"state_distance", p.state_distance},
                     {"verdict", to_string(p.verdict)}});
  }
  j["pairs"] = std::move(pairs);
  return j.dump(2);
}

void write_breakdown_json(const FpBreakdown& b, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << breakdown_to_json(b) << '\n';
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace binsd
