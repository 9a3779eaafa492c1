#ifndef BINSD_COLLISION_HPP
#define BINSD_COLLISION_HPP

#include <string>
#include <vector>

#include "binsd/align.hpp"
#include "binsd/embedder.hpp"
#include "binsd/repo.hpp"

namespace binsd {

/// Dissimilarity of two vertex-state multisets in [0, 2]. Greedy matching
/// by descending cosine (per-vertex sweep, evaluated in both directions
/// and averaged); unmatched surplus vertices count as cosine 0. Zero
/// states also count as cosine 0.
double vertex_state_distance(const VertexStates& a, const VertexStates& b);

enum class CollisionVerdict { Collision, Rename, NotCollision };

const char* to_string(CollisionVerdict v);

struct CollisionProbe {
  FunctionEmbedding embedding;  // carries the ref (name, source, tag)
  VertexStates states;
};

/// Collision: graph-level similarity >= tau_sim, vertex-state distance
/// >= tau_node, different sources. Rename: similarity >= tau_sim, same
/// source, different names. Everything else is NotCollision. Two zero
/// embeddings count as similarity 1 (the degenerate readout cancellation);
/// one zero embedding counts as 0.
CollisionVerdict detect_collision(const CollisionProbe& fa, const CollisionProbe& fb,
                                  double tau_sim, double tau_node);

struct FpBreakdown {
  long collision = 0;
  long rename = 0;
  long other = 0;
  struct Pair {
    FunctionRef query;
    FunctionRef candidate;
    double similarity = 0.0;
    double state_distance = 0.0;
    CollisionVerdict verdict = CollisionVerdict::NotCollision;
  };
  std::vector<Pair> pairs;

  long total() const { return collision + rename + other; }
};

/// Classifies every irrelevant top-K entry of every list, re-embedding
/// query and candidate on demand. Exhaustive and exclusive: counts sum
/// to the number of false positives.
FpBreakdown classify_false_positives(const std::vector<RankedList>& lists,
                                     const GraphLookup& graphs, const ModelParams& params,
                                     const EmbeddingConfig& cfg, double tau_sim, double tau_node);

std::string breakdown_to_json(const FpBreakdown& b);
void write_breakdown_json(const FpBreakdown& b, const std::string& path);

}  // namespace binsd

#endif  // BINSD_COLLISION_HPP
