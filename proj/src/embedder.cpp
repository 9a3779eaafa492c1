#include "binsd/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <tuple>

#include <json.hpp>

#include "binsd/rng.hpp"

namespace binsd {

using nlohmann::json;

bool ref_less(const FunctionRef& a, const FunctionRef& b) {
  return std::tie(a.source_id, a.function_name, a.compilation.arch, a.compilation.opt_level,
                  a.compilation.compiler) <
         std::tie(b.source_id, b.function_name, b.compilation.arch, b.compilation.opt_level,
                  b.compilation.compiler);
}

FunctionRef ref_of(const AttributedCfg& g) {
  return {g.function_name, g.source_id, g.compilation};
}

namespace {

Mat random_mat(std::size_t rows, std::size_t cols, double bound, SplitMix64& rng) {
  Mat m(rows, cols);
  for (double& x : m.data()) x = rng.uniform(-bound, bound);
  return m;
}

void check_shapes(const ModelParams& p, const EmbeddingConfig& cfg) {
  const auto d = static_cast<std::size_t>(cfg.d_embed);
  const auto f = static_cast<std::size_t>(cfg.d_feat);
  if (p.W1.rows() != d || p.W1.cols() != f) throw DataError("W1 shape mismatch");
  if (static_cast<int>(p.P.size()) != cfg.sigma_depth) throw DataError("sigma chain depth mismatch");
  for (const Mat& m : p.P)
    if (m.rows() != d || m.cols() != d) throw DataError("P shape mismatch");
  if (p.U.rows() != d || p.U.cols() != d) throw DataError("U shape mismatch");
  if (p.W2.rows() != d || p.W2.cols() != d) throw DataError("W2 shape mismatch");
}

}  // namespace

ModelParams init_params(const EmbeddingConfig& cfg) {
  SplitMix64 rng(cfg.seed);
  rng = rng.split("init-params");
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.d_embed));
  const auto d = static_cast<std::size_t>(cfg.d_embed);
  ModelParams p;
  p.W1 = random_mat(d, static_cast<std::size_t>(cfg.d_feat), bound, rng);
  for (int l = 0; l < cfg.sigma_depth; ++l) p.P.push_back(random_mat(d, d, bound, rng));
  p.U = cfg.use_prev_term ? random_mat(d, d, bound, rng) : Mat(d, d);
  p.W2 = random_mat(d, d, bound, rng);
  return p;
}

ModelParams zero_params(const EmbeddingConfig& cfg) {
  const auto d = static_cast<std::size_t>(cfg.d_embed);
  ModelParams p;
  p.W1 = Mat(d, static_cast<std::size_t>(cfg.d_feat));
  p.P.assign(static_cast<std::size_t>(cfg.sigma_depth), Mat(d, d));
  p.U = Mat(d, d);
  p.W2 = Mat(d, d);
  return p;
}

Vec aggregate_neighbors(const VertexStates& states, const AttributedCfg& g, int i) {
  if (i < 0 || i >= g.node_count()) throw DataError("vertex id out of range");
  if (states.size() != static_cast<std::size_t>(g.node_count()))
    throw DataError("vertex states do not match graph");
  const auto adj = g.neighbors();
  Vec h(states.mu.empty() ? 0 : states.mu[0].size(), 0.0);
  for (int r : adj[static_cast<std::size_t>(i)]) add_to(h, states.mu[static_cast<std::size_t>(r)]);
  return h;
}

namespace {

// sigma(h) = P[L-1] relu(P[L-2] relu(... P[0] h ...)); returns every link's
// pre-activation so the backward pass can reuse them.
std::vector<Vec> sigma_chain(const Vec& h, const ModelParams& params) {
  std::vector<Vec> v;
  v.reserve(params.P.size());
  v.push_back(matvec(params.P[0], h));
  for (std::size_t l = 1; l < params.P.size(); ++l) {
    Vec r = v.back();
    for (double& x : r) x = std::max(x, 0.0);
    v.push_back(matvec(params.P[l], r));
  }
  return v;
}

Vec union_update_impl(const Vec& h, const Vec& mu_prev, const FeatureVector& x,
                      const ModelParams& params, const EmbeddingConfig& cfg) {
  Vec pre = matvec(params.W1, x);
  add_to(pre, sigma_chain(h, params).back());
  if (cfg.use_prev_term) add_to(pre, matvec(params.U, mu_prev));
  for (double& e : pre) e = std::tanh(e);
  return pre;
}

}  // namespace

Vec union_update(const Vec& h, const Vec& mu_prev, const FeatureVector& x,
                 const ModelParams& params, const EmbeddingConfig& cfg) {
  check_shapes(params, cfg);
  if (h.size() != static_cast<std::size_t>(cfg.d_embed) ||
      mu_prev.size() != static_cast<std::size_t>(cfg.d_embed) ||
      x.size() != static_cast<std::size_t>(cfg.d_feat))
    throw DataError("union_update input shape mismatch");
  return union_update_impl(h, mu_prev, x, params, cfg);
}

FunctionEmbedding readout(const VertexStates& states, const ModelParams& params) {
  if (states.mu.empty()) throw DataError("readout on empty graph");
  Vec sum(states.mu[0].size(), 0.0);
  for (const Vec& mu : states.mu) add_to(sum, mu);
  FunctionEmbedding e;
  e.vector = matvec(params.W2, sum);
  return e;
}

namespace {

// All per-round states; [t][i] is vertex i after round t, [0] is the zero init.
std::vector<std::vector<Vec>> forward_states(const AttributedCfg& g, const ModelParams& params,
                                             const EmbeddingConfig& cfg,
                                             const std::vector<std::vector<int>>& adj) {
  const auto vcount = static_cast<std::size_t>(g.node_count());
  const auto d = static_cast<std::size_t>(cfg.d_embed);
  std::vector<std::vector<Vec>> mus(static_cast<std::size_t>(cfg.T) + 1,
                                    std::vector<Vec>(vcount, Vec(d, 0.0)));
  for (int t = 1; t <= cfg.T; ++t) {
    const auto& prev = mus[static_cast<std::size_t>(t - 1)];
    auto& cur = mus[static_cast<std::size_t>(t)];
    for (std::size_t i = 0; i < vcount; ++i) {
      Vec h(d, 0.0);
      for (int r : adj[i]) add_to(h, prev[static_cast<std::size_t>(r)]);
      cur[i] = union_update_impl(h, prev[i], g.nodes[i].features, params, cfg);
    }
  }
  return mus;
}

}  // namespace

EmbedResult embed_function(const AttributedCfg& g, const ModelParams& params,
                           const EmbeddingConfig& cfg) {
  check_shapes(params, cfg);
  if (g.node_count() < 1) throw DataError("cannot embed an empty graph");
  for (const auto& n : g.nodes)
    if (n.features.size() != static_cast<std::size_t>(cfg.d_feat))
      throw DataError("graph feature dimension does not match model");

  const auto adj = g.neighbors();
  auto mus = forward_states(g, params, cfg, adj);

  EmbedResult result;
  result.states.mu = std::move(mus.back());
  result.embedding = readout(result.states, params);
  result.embedding.ref = ref_of(g);
  return result;
}

double cosine_similarity(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw DataError("cosine dimension mismatch");
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw DataError("cosine of zero vector");
  // Exactly parallel or antiparallel inputs get exact results; sqrt noise
  // in the norms would otherwise leave 1.0 unreachable.
  bool parallel = true, antiparallel = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    parallel &= a[i] == b[i];
    antiparallel &= a[i] == -b[i];
  }
  if (parallel) return 1.0;
  if (antiparallel) return -1.0;
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

double pair_loss(const AttributedCfg& a, const AttributedCfg& b, int label,
                 const ModelParams& params, const EmbeddingConfig& cfg) {
  const double c = cosine_similarity(embed_function(a, params, cfg).embedding,
                                     embed_function(b, params, cfg).embedding);
  const double diff = c - static_cast<double>(label);
  return diff * diff;
}

namespace {

// Reverse accumulation through readout and the T rounds for one graph.
// g_embed is dLoss/dh_G; gradients are accumulated into grads.
void backward_graph(const AttributedCfg& g, const ModelParams& params, const EmbeddingConfig& cfg,
                    const std::vector<std::vector<int>>& adj,
                    const std::vector<std::vector<Vec>>& mus, const Vec& g_embed,
                    Gradients& grads) {
  const auto vcount = static_cast<std::size_t>(g.node_count());
  const auto d = static_cast<std::size_t>(cfg.d_embed);
  const std::size_t depth = params.P.size();

  Vec sum(d, 0.0);
  for (const Vec& mu : mus.back()) add_to(sum, mu);
  add_outer(grads.W2, g_embed, sum);
  const Vec g_sum = matvec_t(params.W2, g_embed);

  // dLoss/dmu for the round currently being unwound; readout feeds every
  // vertex the same upstream gradient.
  std::vector<Vec> g_mu(vcount, g_sum);

  for (int t = cfg.T; t >= 1; --t) {
    const auto& prev = mus[static_cast<std::size_t>(t - 1)];
    const auto& cur = mus[static_cast<std::size_t>(t)];
    std::vector<Vec> g_mu_prev(vcount, Vec(d, 0.0));

    for (std::size_t i = 0; i < vcount; ++i) {
      Vec h(d, 0.0);
      for (int r : adj[i]) add_to(h, prev[static_cast<std::size_t>(r)]);
      const auto chain = sigma_chain(h, params);

      // tanh: d/dpre = 1 - mu^2
      Vec g_pre(d);
      for (std::size_t k = 0; k < d; ++k) g_pre[k] = g_mu[i][k] * (1.0 - cur[i][k] * cur[i][k]);

      add_outer(grads.W1, g_pre, g.nodes[i].features);
      if (cfg.use_prev_term) {
        add_outer(grads.U, g_pre, prev[i]);
        add_to(g_mu_prev[i], matvec_t(params.U, g_pre));
      }

      Vec g_v = g_pre;
      for (std::size_t l = depth; l-- > 1;) {
        Vec r = chain[l - 1];
        for (double& x : r) x = std::max(x, 0.0);
        add_outer(grads.P[l], g_v, r);
        Vec g_r = matvec_t(params.P[l], g_v);
        for (std::size_t k = 0; k < d; ++k) g_r[k] = chain[l - 1][k] > 0.0 ? g_r[k] : 0.0;
        g_v = std::move(g_r);
      }
      add_outer(grads.P[0], g_v, h);
      const Vec g_h = matvec_t(params.P[0], g_v);
      for (int r : adj[i]) add_to(g_mu_prev[static_cast<std::size_t>(r)], g_h);
    }
    g_mu = std::move(g_mu_prev);
  }
}

}  // namespace

namespace {

struct PairBackprop {
  Gradients grads;
  double loss = 0.0;
};

PairBackprop pair_backprop(const AttributedCfg& a, const AttributedCfg& b, int label,
                           const ModelParams& params, const EmbeddingConfig& cfg);

}  // namespace

Gradients pair_gradients(const AttributedCfg& a, const AttributedCfg& b, int label,
                         const ModelParams& params, const EmbeddingConfig& cfg) {
  return pair_backprop(a, b, label, params, cfg).grads;
}

namespace {

PairBackprop pair_backprop(const AttributedCfg& a, const AttributedCfg& b, int label,
                           const ModelParams& params, const EmbeddingConfig& cfg) {
  check_shapes(params, cfg);
  const auto adj_a = a.neighbors();
  const auto adj_b = b.neighbors();
  const auto mus_a = forward_states(a, params, cfg, adj_a);
  const auto mus_b = forward_states(b, params, cfg, adj_b);

  auto readout_of = [&](const std::vector<Vec>& last) {
    Vec sum(static_cast<std::size_t>(cfg.d_embed), 0.0);
    for (const Vec& mu : last) add_to(sum, mu);
    return matvec(params.W2, sum);
  };
  const Vec ha = readout_of(mus_a.back());
  const Vec hb = readout_of(mus_b.back());

  const double na = norm(ha);
  const double nb = norm(hb);
  if (na == 0.0 || nb == 0.0) throw DataError("cosine of zero vector");
  // Bitwise-equal readouts give cosine exactly 1, matching cosine_similarity;
  // a +1 pair at that point is stationary and gets exactly zero gradients.
  const double c = ha == hb ? 1.0 : dot(ha, hb) / (na * nb);
  const double dloss_dc = 2.0 * (c - static_cast<double>(label));

  const auto d = static_cast<std::size_t>(cfg.d_embed);
  Vec g_ha(d), g_hb(d);
  for (std::size_t k = 0; k < d; ++k) {
    g_ha[k] = dloss_dc * (hb[k] / (na * nb) - c * ha[k] / (na * na));
    g_hb[k] = dloss_dc * (ha[k] / (na * nb) - c * hb[k] / (nb * nb));
  }

  PairBackprop out;
  out.grads = zero_params(cfg);
  out.loss = (c - static_cast<double>(label)) * (c - static_cast<double>(label));
  backward_graph(a, params, cfg, adj_a, mus_a, g_ha, out.grads);
  backward_graph(b, params, cfg, adj_b, mus_b, g_hb, out.grads);
  return out;
}

}  // namespace

namespace {

struct AdamState {
  ModelParams m;
  ModelParams v;
  long step = 0;
};

void adam_update_mat(Mat& theta, const Mat& grad, Mat& m, Mat& v, double lr, long step) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  auto& td = theta.data();
  const auto& gd = grad.data();
  auto& md = m.data();
  auto& vd = v.data();
  for (std::size_t k = 0; k < td.size(); ++k) {
    md[k] = beta1 * md[k] + (1.0 - beta1) * gd[k];
    vd[k] = beta2 * vd[k] + (1.0 - beta2) * gd[k] * gd[k];
    td[k] -= lr * (md[k] / bc1) / (std::sqrt(vd[k] / bc2) + eps);
  }
}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& st, double lr,
               bool update_u) {
  ++st.step;
  adam_update_mat(params.W1, grads.W1, st.m.W1, st.v.W1, lr, st.step);
  for (std::size_t l = 0; l < params.P.size(); ++l)
    adam_update_mat(params.P[l], grads.P[l], st.m.P[l], st.v.P[l], lr, st.step);
  if (update_u) adam_update_mat(params.U, grads.U, st.m.U, st.v.U, lr, st.step);
  adam_update_mat(params.W2, grads.W2, st.m.W2, st.v.W2, lr, st.step);
}

void accumulate(Gradients& into, const Gradients& g) {
  auto acc = [](Mat& a, const Mat& b) {
    for (std::size_t k = 0; k < a.data().size(); ++k) a.data()[k] += b.data()[k];
  };
  acc(into.W1, g.W1);
  for (std::size_t l = 0; l < into.P.size(); ++l) acc(into.P[l], g.P[l]);
  acc(into.U, g.U);
  acc(into.W2, g.W2);
}

void scale(Gradients& g, double s) {
  auto sc = [s](Mat& a) {
    for (double& x : a.data()) x *= s;
  };
  sc(g.W1);
  for (Mat& p : g.P) sc(p);
  sc(g.U);
  sc(g.W2);
}

void check_pairs(const std::vector<TrainingPair>& pairs) {
  if (pairs.empty()) throw DataError("training needs a nonempty pair list");
  bool pos = false, neg = false;
  for (const auto& p : pairs) (p.label > 0 ? pos : neg) = true;
  if (!pos || !neg) throw DataError("training needs both +1 and -1 pairs");
}

double mean_loss(const std::vector<TrainingPair>& pairs, const ModelParams& params,
                 const EmbeddingConfig& cfg) {
  double total = 0.0;
  for (const auto& p : pairs) total += pair_loss(*p.a, *p.b, p.label, params, cfg);
  return total / static_cast<double>(pairs.size());
}

// One pass over `pairs` in shuffled order; returns the epoch mean loss.
double run_epoch(std::vector<std::size_t>& order, const std::vector<TrainingPair>& pairs,
                 ModelParams& params, const EmbeddingConfig& cfg, const TrainHyper& hyper,
                 AdamState& st, SplitMix64& shuffle_rng) {
  shuffle(order, shuffle_rng);
  const std::size_t bs = hyper.batch_size < 1 ? 1 : static_cast<std::size_t>(hyper.batch_size);
  double total = 0.0;
  for (std::size_t start = 0; start < order.size(); start += bs) {
    const std::size_t end = std::min(order.size(), start + bs);
    Gradients batch = zero_params(cfg);
    for (std::size_t k = start; k < end; ++k) {
      const TrainingPair& p = pairs[order[k]];
      PairBackprop bp = pair_backprop(*p.a, *p.b, p.label, params, cfg);
      total += bp.loss;
      accumulate(batch, bp.grads);
    }
    scale(batch, 1.0 / static_cast<double>(end - start));
    adam_step(params, batch, st, hyper.learning_rate, cfg.use_prev_term);
  }
  return total / static_cast<double>(order.size());
}

}  // namespace

TrainResult train_model(const std::vector<TrainingPair>& pairs, const EmbeddingConfig& cfg,
                        const TrainHyper& hyper) {
  check_pairs(pairs);
  TrainResult result;
  result.params = init_params(cfg);
  result.log.initial_mean_loss = mean_loss(pairs, result.params, cfg);

  AdamState st{zero_params(cfg), zero_params(cfg), 0};
  SplitMix64 rng(hyper.seed);
  SplitMix64 shuffle_rng = rng.split("epoch-shuffle");
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int e = 0; e < hyper.epochs; ++e)
    result.log.epoch_mean_loss.push_back(
        run_epoch(order, pairs, result.params, cfg, hyper, st, shuffle_rng));
  return result;
}

std::vector<TrainingPair> sample_training_pairs(const std::vector<AttributedCfg>& corpus,
                                                std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_source;
  for (std::size_t i = 0; i < corpus.size(); ++i) by_source[corpus[i].source_id].push_back(i);
  if (by_source.size() < 2) throw DataError("pair sampling needs >= 2 distinct sources");

  std::vector<std::string> sources;
  for (const auto& [s, _] : by_source) sources.push_back(s);

  SplitMix64 rng = SplitMix64(seed).split("pair-sampling");
  std::vector<TrainingPair> pairs;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& mine = by_source[corpus[i].source_id];
    if (mine.size() >= 2) {
      std::size_t j = i;
      while (j == i) j = mine[rng.next_below(mine.size())];
      pairs.push_back({&corpus[i], &corpus[j], +1});
    }
    std::string other = corpus[i].source_id;
    while (other == corpus[i].source_id) other = sources[rng.next_below(sources.size())];
    const auto& theirs = by_source[other];
    pairs.push_back({&corpus[i], &corpus[theirs[rng.next_below(theirs.size())]], -1});
  }
  bool has_pos = false;
  for (const auto& p : pairs) has_pos |= p.label > 0;
  if (!has_pos) throw DataError("pair sampling needs a source with >= 2 variants");
  return pairs;
}

TrainResult train_on_corpus(const std::vector<AttributedCfg>& corpus, const EmbeddingConfig& cfg,
                            const TrainHyper& hyper) {
  TrainResult result;
  result.params = init_params(cfg);

  SplitMix64 rng(hyper.seed);
  SplitMix64 shuffle_rng = rng.split("epoch-shuffle");
  AdamState st{zero_params(cfg), zero_params(cfg), 0};

  for (int e = 0; e < hyper.epochs; ++e) {
    auto pairs = sample_training_pairs(corpus, rng.split("epoch-pairs", static_cast<std::uint64_t>(e)).state());
    check_pairs(pairs);
    if (e == 0) result.log.initial_mean_loss = mean_loss(pairs, result.params, cfg);
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    result.log.epoch_mean_loss.push_back(
        run_epoch(order, pairs, result.params, cfg, hyper, st, shuffle_rng));
  }
  return result;
}

Vec adjacency_signature(const AttributedCfg& g, int grid) {
  if (grid < 1) throw DataError("signature grid must be >= 1");
  const int v = g.node_count();
  const auto s = static_cast<std::size_t>(grid);
  // Pool the V x V 0/1 adjacency onto an S x S grid; block size rounds up
  // so the padded matrix covers all vertices.
  const int bs = (v + grid - 1) / grid;
  Vec sig(s * s, 0.0);
  for (const auto& [from, to] : g.edges) {
    const auto cell_r = static_cast<std::size_t>(from / bs);
    const auto cell_c = static_cast<std::size_t>(to / bs);
    sig[cell_r * s + cell_c] += 1.0;
  }
  const double denom = static_cast<double>(bs) * static_cast<double>(bs);
  for (double& x : sig) x /= denom;
  const double n = norm(sig);
  if (n > 0.0)
    for (double& x : sig) x /= n;
  return sig;
}

FunctionEmbedding concat_embedding(const FunctionEmbedding& h, const FeatureVector& aux) {
  for (double x : aux)
    if (!std::isfinite(x)) throw DataError("non-finite auxiliary feature");
  FunctionEmbedding out = h;
  const double n = norm(aux);
  for (double x : aux) out.vector.push_back(n > 0.0 ? x / n : 0.0);
  return out;
}

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const EmbeddingConfig& cfg) {
  check_shapes(params, cfg);
  json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["config"] = {{"d_feat", cfg.d_feat},       {"d_embed", cfg.d_embed},
                 {"T", cfg.T},                 {"sigma_depth", cfg.sigma_depth},
                 {"use_prev_term", cfg.use_prev_term}, {"seed", cfg.seed}};
  json mats = json::object();
  auto put = [&mats](const std::string& name, const Mat& m) {
    mats[name] = {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
  };
  put("W1", params.W1);
  for (std::size_t l = 0; l < params.P.size(); ++l) put("P" + std::to_string(l + 1), params.P[l]);
  put("U", params.U);
  put("W2", params.W2);
  j["matrices"] = std::move(mats);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(path + ": malformed checkpoint: " + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion)
      throw DataError("unsupported checkpoint format_version");
    Checkpoint ck;
    const auto& c = j.at("config");
    ck.config.d_feat = c.at("d_feat").get<int>();
    ck.config.d_embed = c.at("d_embed").get<int>();
    ck.config.T = c.at("T").get<int>();
    ck.config.sigma_depth = c.at("sigma_depth").get<int>();
    ck.config.use_prev_term = c.at("use_prev_term").get<bool>();
    ck.config.seed = c.at("seed").get<std::uint64_t>();

    auto get = [&j](const std::string& name) {
      const auto& m = j.at("matrices").at(name);
      Mat out(m.at("rows").get<std::size_t>(), m.at("cols").get<std::size_t>());
      std::vector<double> data = m.at("data").get<std::vector<double>>();
      if (data.size() != out.rows() * out.cols())
        throw DataError("matrix " + name + " data length mismatch");
      out.data() = std::move(data);
      return out;
    };
    ck.params.W1 = get("W1");
    for (int l = 1; l <= ck.config.sigma_depth; ++l) ck.params.P.push_back(get("P" + std::to_string(l)));
    ck.params.U = get("U");
    ck.params.W2 = get("W2");
    check_shapes(ck.params, ck.config);
    return ck;
  } catch (const json::exception& e) {
    throw DataError(path + ": bad checkpoint: " + e.what());
  }
}

}  // namespace binsd
