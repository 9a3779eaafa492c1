#ifndef BINSD_TESTS_HELPERS_HPP
#define BINSD_TESTS_HELPERS_HPP

// Shared builders and independent oracles. Everything here is coded
// straight from the definitions, independent of the library's
// implementation paths, so it can serve as the reference side of the
// dual-route checks.

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "binsd/acfg.hpp"
#include "binsd/embedder.hpp"
#include "binsd/metrics.hpp"
#include "binsd/repo.hpp"
#include "binsd/rng.hpp"

namespace binsd::testing {

inline AttributedCfg make_graph(std::string name, std::string source,
                                std::vector<FeatureVector> features,
                                std::vector<std::pair<int, int>> edges,
                                CompilationTag tag = {Arch::X64, OptLevel::O0, "gcc"}) {
  AttributedCfg g;
  g.function_name = std::move(name);
  g.source_id = std::move(source);
  g.compilation = tag;
  for (std::size_t i = 0; i < features.size(); ++i)
    g.nodes.push_back({static_cast<int>(i), std::move(features[i])});
  g.edges = std::move(edges);
  return g;
}

inline AttributedCfg random_graph(SplitMix64& rng, int min_v, int max_v, int d_feat,
                                  const std::string& source = "src:test") {
  const int v = static_cast<int>(rng.uniform_int(min_v, max_v));
  std::vector<FeatureVector> features;
  for (int i = 0; i < v; ++i) {
    FeatureVector f;
    for (int k = 0; k < d_feat; ++k) f.push_back(rng.uniform(-2.0, 2.0));
    features.push_back(std::move(f));
  }
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i < v; ++i) edges.emplace_back(static_cast<int>(rng.next_below(i)), i);
  for (int k = 0; k < v / 2; ++k) {
    const int a = static_cast<int>(rng.next_below(v));
    const int b = static_cast<int>(rng.next_below(v));
    if (a != b && std::find(edges.begin(), edges.end(), std::make_pair(a, b)) == edges.end())
      edges.emplace_back(a, b);
  }
  return make_graph("fn_test", source, std::move(features), std::move(edges));
}

// ---- embedder oracle: the recurrence restated line by line ---------------

inline Vec oracle_sigma(const Vec& h, const ModelParams& p) {
  Vec v = matvec(p.P[0], h);
  for (std::size_t l = 1; l < p.P.size(); ++l) {
    Vec r = v;
    for (double& x : r) x = x > 0.0 ? x : 0.0;
    v = matvec(p.P[l], r);
  }
  return v;
}

inline Vec oracle_embed(const AttributedCfg& g, const ModelParams& p, const EmbeddingConfig& cfg) {
  const auto vcount = static_cast<std::size_t>(g.node_count());
  const auto d = static_cast<std::size_t>(cfg.d_embed);
  std::vector<Vec> mu(vcount, Vec(d, 0.0));
  const auto adj = g.neighbors();
  for (int t = 0; t < cfg.T; ++t) {
    std::vector<Vec> next(vcount, Vec(d, 0.0));
    for (std::size_t i = 0; i < vcount; ++i) {
      Vec h(d, 0.0);
      for (int r : adj[i])
        for (std::size_t k = 0; k < d; ++k) h[k] += mu[static_cast<std::size_t>(r)][k];
      Vec pre = matvec(p.W1, g.nodes[i].features);
      const Vec s = oracle_sigma(h, p);
      for (std::size_t k = 0; k < d; ++k) pre[k] += s[k];
      if (cfg.use_prev_term) {
        const Vec carry = matvec(p.U, mu[i]);
        for (std::size_t k = 0; k < d; ++k) pre[k] += carry[k];
      }
      for (std::size_t k = 0; k < d; ++k) next[i][k] = std::tanh(pre[k]);
    }
    mu = std::move(next);
  }
  Vec sum(d, 0.0);
  for (const Vec& m : mu)
    for (std::size_t k = 0; k < d; ++k) sum[k] += m[k];
  return matvec(p.W2, sum);
}

// ---- finite differences ---------------------------------------------------

template <typename LossFn>
double central_diff(double& slot, double step, const LossFn& loss) {
  const double saved = slot;
  slot = saved + step;
  const double hi = loss();
  slot = saved - step;
  const double lo = loss();
  slot = saved;
  return (hi - lo) / (2.0 * step);
}

struct GradCheckStats {
  long checked = 0;
  double worst_rel_err = 0.0;
};

// Central finite differences across every parameter entry of a pair loss.
inline GradCheckStats finite_difference_check(const AttributedCfg& a, const AttributedCfg& b,
                                              int label, ModelParams params,
                                              const EmbeddingConfig& cfg, double step,
                                              double grad_floor) {
  const Gradients analytic = pair_gradients(a, b, label, params, cfg);
  const auto loss = [&] { return pair_loss(a, b, label, params, cfg); };

  GradCheckStats stats;
  auto check_mat = [&](Mat& live, const Mat& grad) {
    for (std::size_t k = 0; k < live.data().size(); ++k) {
      const double g = grad.data()[k];
      if (std::abs(g) <= grad_floor) continue;
      const double fd = central_diff(live.data()[k], step, loss);
      const double rel = std::abs(fd - g) / std::max(std::abs(g), std::abs(fd));
      stats.worst_rel_err = std::max(stats.worst_rel_err, rel);
      ++stats.checked;
    }
  };
  check_mat(params.W1, analytic.W1);
  for (std::size_t l = 0; l < params.P.size(); ++l) check_mat(params.P[l], analytic.P[l]);
  if (cfg.use_prev_term) check_mat(params.U, analytic.U);
  check_mat(params.W2, analytic.W2);
  return stats;
}

// ---- brute-force ranking metric oracles ------------------------------------

inline double oracle_precision_at_k(const RankedList& l, int k) {
  const int shown = std::min<int>(k, static_cast<int>(l.results.size()));
  if (shown == 0) return 0.0;
  int hits = 0;
  for (int j = 0; j < shown; ++j) hits += l.results[static_cast<std::size_t>(j)].relevant;
  return static_cast<double>(hits) / shown;
}

inline double oracle_recall_at_k(const RankedList& l, int k) {
  const int shown = std::min<int>(k, static_cast<int>(l.results.size()));
  int hits = 0;
  for (int j = 0; j < shown; ++j) hits += l.results[static_cast<std::size_t>(j)].relevant;
  const long denom = l.total_relevant_in_repo < 1 ? 1 : l.total_relevant_in_repo;
  return static_cast<double>(hits) / static_cast<double>(denom);
}

inline double oracle_f1_at_k(const RankedList& l, int k) {
  const double p = oracle_precision_at_k(l, k);
  const double r = oracle_recall_at_k(l, k);
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

inline double oracle_ap_at_k(const RankedList& l, int k) {
  const int shown = std::min<int>(k, static_cast<int>(l.results.size()));
  double ap = 0.0;
  int hits = 0;
  for (int j = 0; j < shown; ++j) {
    if (l.results[static_cast<std::size_t>(j)].relevant) {
      ++hits;
      ap += static_cast<double>(hits) / (j + 1);
    }
  }
  const long denom = std::min<long>(l.total_relevant_in_repo, k);
  return ap / static_cast<double>(denom);
}

inline double oracle_rr_at_k(const RankedList& l, int k) {
  const int shown = std::min<int>(k, static_cast<int>(l.results.size()));
  for (int j = 0; j < shown; ++j)
    if (l.results[static_cast<std::size_t>(j)].relevant) return 1.0 / (j + 1);
  return 0.0;
}

inline double oracle_ndcg_at_k(const RankedList& l, int k) {
  const int shown = std::min<int>(k, static_cast<int>(l.results.size()));
  double dcg = 0.0;
  for (int j = 0; j < shown; ++j)
    if (l.results[static_cast<std::size_t>(j)].relevant)
      dcg += 1.0 / std::log2(static_cast<double>(j + 2));
  double idcg = 0.0;
  const long ideal = std::min<long>(l.total_relevant_in_repo, k);
  for (long j = 1; j <= ideal; ++j) idcg += 1.0 / std::log2(static_cast<double>(j + 1));
  return dcg / idcg;
}

/// Trapezoidal ROC integration: sweep thresholds descending over distinct
/// scores, integrate TPR over FPR.
inline double oracle_trapezoid_auc(const PairScoreSet& s) {
  std::vector<std::pair<double, int>> sorted = s.items;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  long n_pos = 0, n_neg = 0;
  for (const auto& [score, label] : sorted) (label > 0 ? n_pos : n_neg) += 1;

  double auc = 0.0;
  double prev_fpr = 0.0, prev_tpr = 0.0;
  long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].first == sorted[i].first) {
      (sorted[j].second > 0 ? tp : fp) += 1;
      ++j;
    }
    const double fpr = static_cast<double>(fp) / static_cast<double>(n_neg);
    const double tpr = static_cast<double>(tp) / static_cast<double>(n_pos);
    auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    prev_fpr = fpr;
    prev_tpr = tpr;
    i = j;
  }
  return auc;
}

/// Random ranked-list instance generator used by the oracle-equivalence
/// sweeps: repo <= max_repo entries, relevance planted at random, scores
/// descending with occasional exact ties.
inline RankedList random_ranked_list(SplitMix64& rng, int max_repo, int k) {
  const int repo = static_cast<int>(rng.uniform_int(1, max_repo));
  RankedList l;
  l.query = {"q", "src:q", {Arch::X64, OptLevel::O0, "gcc"}};
  l.K = k;
  long relevant_in_repo = 0;
  std::vector<RankedResult> all;
  double score = 1.0;
  for (int i = 0; i < repo; ++i) {
    if (rng.next_below(4) != 0) score -= rng.next_double() * 0.05;  // ties 1 in 4
    RankedResult r;
    r.ref = {"fn_" + std::to_string(i), "src:" + std::to_string(i),
             {Arch::X64, OptLevel::O0, "gcc"}};
    r.score = score;
    r.relevant = rng.bernoulli(0.3);
    relevant_in_repo += r.relevant;
    all.push_back(std::move(r));
  }
  // Some relevant entries may live beyond the returned prefix.
  relevant_in_repo += static_cast<long>(rng.next_below(3));
  l.total_relevant_in_repo = relevant_in_repo;
  const int shown = std::min(repo, k);
  l.results.assign(all.begin(), all.begin() + shown);
  return l;
}

}  // namespace binsd::testing

#endif  // BINSD_TESTS_HELPERS_HPP
