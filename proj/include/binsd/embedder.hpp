#ifndef BINSD_EMBEDDER_HPP
#define BINSD_EMBEDDER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "binsd/acfg.hpp"
#include "binsd/linalg.hpp"

namespace binsd {

/// Hyper-shape of the graph embedder.
///
/// The model iteratively refines per-vertex states: each round a vertex
/// sums its neighbors' states, pushes that sum through a depth-L ReLU
/// chain, adds a linear lift of its own block features (plus optionally
/// a linear carry of its previous state), and squashes with tanh. After
/// T rounds the vertex states are summed and projected to the graph
/// embedding, so a state carries structural information from its T-hop
/// neighborhood.
struct EmbeddingConfig {
  int d_feat = 8;             // block feature dimension (from the corpus)
  int d_embed = 64;           // embedding dimension
  int T = 5;                  // message-passing rounds
  int sigma_depth = 2;        // depth L of the ReLU aggregation chain
  bool use_prev_term = false; // include U * mu_prev in the update
  std::uint64_t seed = 1;     // parameter initialization seed
};

/// All learnable matrices. Shapes follow EmbeddingConfig:
///   W1: d_embed x d_feat    feature lift
///   P[l]: d_embed x d_embed l-th link of the ReLU chain, l = 0..L-1
///   U:  d_embed x d_embed   previous-state carry (zero when disabled)
///   W2: d_embed x d_embed   readout projection
struct ModelParams {
  Mat W1;
  std::vector<Mat> P;
  Mat U;
  Mat W2;

  bool operator==(const ModelParams&) const = default;
};

/// Gradient accumulator with the same shape as ModelParams.
using Gradients = ModelParams;

/// Per-vertex states after the final round; each entry is in (-1, 1).
struct VertexStates {
  std::vector<Vec> mu;  // V rows of d_embed

  std::size_t size() const { return mu.size(); }
};

struct FunctionRef {
  std::string function_name;
  std::string source_id;
  CompilationTag compilation;

  bool operator==(const FunctionRef&) const = default;
};

/// Deterministic cross-run ordering: (source_id, name, arch, opt, compiler).
bool ref_less(const FunctionRef& a, const FunctionRef& b);
FunctionRef ref_of(const AttributedCfg& g);

struct FunctionEmbedding {
  Vec vector;
  FunctionRef ref;
};

struct TrainingPair {
  const AttributedCfg* a = nullptr;
  const AttributedCfg* b = nullptr;
  int label = 1;  // +1 same source, -1 otherwise
};

/// Uniform init in [-1/sqrt(d_embed), +1/sqrt(d_embed)], seeded.
ModelParams init_params(const EmbeddingConfig& cfg);
ModelParams zero_params(const EmbeddingConfig& cfg);

/// Sum of neighbor states of vertex i (undirected neighborhood).
Vec aggregate_neighbors(const VertexStates& states, const AttributedCfg& g, int i);

/// tanh(W1 x + sigma(h) + U mu_prev) with
/// sigma(h) = P[L-1] relu(P[L-2] relu(... P[0] h ...)).
Vec union_update(const Vec& h, const Vec& mu_prev, const FeatureVector& x,
                 const ModelParams& params, const EmbeddingConfig& cfg);

/// h_G = W2 * sum_i mu_i. Summation readout, deliberately collision-prone.
FunctionEmbedding readout(const VertexStates& states, const ModelParams& params);

struct EmbedResult {
  FunctionEmbedding embedding;
  VertexStates states;
};

/// Full forward pass: mu^0 = 0, T synchronous rounds, then readout.
EmbedResult embed_function(const AttributedCfg& g, const ModelParams& params,
                           const EmbeddingConfig& cfg);

/// Standard cosine. Throws DataError on a zero vector or length mismatch.
double cosine_similarity(const Vec& a, const Vec& b);
inline double cosine_similarity(const FunctionEmbedding& a, const FunctionEmbedding& b) {
  return cosine_similarity(a.vector, b.vector);
}

/// (cos(h_A, h_B) - label)^2
double pair_loss(const AttributedCfg& a, const AttributedCfg& b, int label,
                 const ModelParams& params, const EmbeddingConfig& cfg);

/// Exact analytic gradient of pair_loss, reverse accumulation through
/// readout, the T update rounds, and the cosine.
Gradients pair_gradients(const AttributedCfg& a, const AttributedCfg& b, int label,
                         const ModelParams& params, const EmbeddingConfig& cfg);

struct TrainHyper {
  double learning_rate = 1e-3;
  int epochs = 30;
  int batch_size = 16;
  std::uint64_t seed = 1;
};

struct TrainLog {
  std::vector<double> epoch_mean_loss;
  double initial_mean_loss = 0.0;
};

struct TrainResult {
  ModelParams params;
  TrainLog log;
};

/// Minibatch Adam over a fixed pair list; pairs are reshuffled each
/// epoch. Single-threaded and bit-deterministic in (cfg.seed, hyper.seed).
TrainResult train_model(const std::vector<TrainingPair>& pairs, const EmbeddingConfig& cfg,
                        const TrainHyper& hyper);

/// Pair sampler: per function one positive (random co-source variant) and
/// one negative (random other source). Requires >= 2 distinct sources and
/// at least one source with >= 2 variants.
std::vector<TrainingPair> sample_training_pairs(const std::vector<AttributedCfg>& corpus,
                                                std::uint64_t seed);

/// Corpus-level training loop: resamples pairs every epoch with the rule
/// above while keeping one optimizer state across epochs.
TrainResult train_on_corpus(const std::vector<AttributedCfg>& corpus, const EmbeddingConfig& cfg,
                            const TrainHyper& hyper);

/// Untrained structural baseline: the V x V adjacency matrix mean-pooled
/// onto an S x S grid (zero-padded), flattened row-major, L2-normalized
/// unless all-zero.
Vec adjacency_signature(const AttributedCfg& g, int grid);

/// [h ; aux / ||aux||]; zero aux passes through as zeros, empty aux is a no-op.
FunctionEmbedding concat_embedding(const FunctionEmbedding& h, const FeatureVector& aux);

/// Checkpoint round-trip, JSON with row-major float64 matrices.
inline constexpr int kCheckpointFormatVersion = 1;
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const EmbeddingConfig& cfg);
struct Checkpoint {
  ModelParams params;
  EmbeddingConfig config;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace binsd

#endif  // BINSD_EMBEDDER_HPP
