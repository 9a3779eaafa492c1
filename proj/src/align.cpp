#include "binsd/align.hpp"

#include <algorithm>
#include <cmath>

#include "binsd/metrics.hpp"

namespace binsd {

namespace {

// Features are compared in integer micro-units: round to 6 decimals, then
// ask for agreement within tol. Integer units avoid the one-ulp drift of
// re-materializing the rounded decimals as doubles.
long long micro_units(double x) { return std::llround(x * 1e6); }

bool blocks_identical(const FeatureVector& a, const FeatureVector& b, double tol) {
  const long long tol_units = std::llround(tol * 1e6);
  for (std::size_t k = 0; k < a.size(); ++k)
    if (std::llabs(micro_units(a[k]) - micro_units(b[k])) > tol_units) return false;
  return true;
}

}  // namespace

int match_identical_blocks(const AttributedCfg& q, const AttributedCfg& c, double tol) {
  if (!q.nodes.empty() && !c.nodes.empty() &&
      q.nodes.front().features.size() != c.nodes.front().features.size())
    throw DataError("block matching requires equal feature dimensions");

  std::vector<char> used(c.nodes.size(), 0);
  int matched = 0;
  for (const auto& qn : q.nodes) {
    for (std::size_t j = 0; j < c.nodes.size(); ++j) {
      if (used[j]) continue;
      if (blocks_identical(qn.features, c.nodes[j].features, tol)) {
        used[j] = 1;
        ++matched;
        break;
      }
    }
  }
  return matched;
}

namespace {

bool survives(const AttributedCfg& query_graph, const FunctionRef& candidate,
              const GraphLookup& graphs, double alpha, double tol) {
  const AttributedCfg& cg = graphs(candidate);
  const int need = std::max(
      1, static_cast<int>(std::ceil(alpha * static_cast<double>(query_graph.node_count()))));
  return match_identical_blocks(query_graph, cg, tol) >= need;
}

}  // namespace

RankedList filter_ranked_list(const RankedList& list, const GraphLookup& graphs, double alpha,
                              double tol, const std::vector<RankedResult>& fallback) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DataError("alpha must be in [0,1]");
  const AttributedCfg& qg = graphs(list.query);

  RankedList out;
  out.query = list.query;
  out.K = list.K;
  out.total_relevant_in_repo = list.total_relevant_in_repo;

  for (const auto& r : list.results)
    if (survives(qg, r.ref, graphs, alpha, tol)) out.results.push_back(r);

  const auto want = static_cast<std::size_t>(list.K);
  for (const auto& f : fallback) {
    if (out.results.size() >= want) break;
    // Entries already present (replacements from an earlier pass) are skipped
    // so re-filtering is a no-op.
    const bool present = std::any_of(list.results.begin(), list.results.end(),
                                     [&](const RankedResult& r) { return r.ref == f.ref; });
    if (present) continue;
    if (survives(qg, f.ref, graphs, alpha, tol)) out.results.push_back(f);
  }
  if (out.results.size() > want) out.results.resize(want);
  return out;
}

RankedList filter_full_ranking(const RankedList& full, int K, const GraphLookup& graphs,
                               double alpha, double tol) {
  RankedList top;
  top.query = full.query;
  top.K = K;
  top.total_relevant_in_repo = full.total_relevant_in_repo;
  const auto keep = std::min<std::size_t>(full.results.size(), static_cast<std::size_t>(K));
  top.results.assign(full.results.begin(), full.results.begin() + static_cast<std::ptrdiff_t>(keep));
  std::vector<RankedResult> fallback(full.results.begin() + static_cast<std::ptrdiff_t>(keep),
                                     full.results.end());
  return filter_ranked_list(top, graphs, alpha, tol, fallback);
}

FilterEffect evaluate_filter_effect(const std::vector<RankedList>& before,
                                    const std::vector<RankedList>& after, int K) {
  if (before.size() != after.size()) throw DataError("filter effect query sets differ");
  if (before.empty()) throw DataError("empty query set");

  FilterEffect effect;
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (!(before[i].query == after[i].query)) throw DataError("filter effect query sets differ");
    const auto pb = precision_recall_f1_at_k({before[i]}, K);
    const auto pa = precision_recall_f1_at_k({after[i]}, K);
    effect.per_query.push_back({before[i].query, pb.precision, pa.precision, pb.recall, pa.recall});
    effect.delta_precision += pa.precision - pb.precision;
    effect.delta_recall += pa.recall - pb.recall;
  }
  effect.delta_precision /= static_cast<double>(before.size());
  effect.delta_recall /= static_cast<double>(before.size());
  return effect;
}

}  // namespace binsd
