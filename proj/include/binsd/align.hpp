#ifndef BINSD_ALIGN_HPP
#define BINSD_ALIGN_HPP

#include <functional>
#include <string>
#include <vector>

#include "binsd/repo.hpp"

namespace binsd {

/// Resolves a ranked-list entry to its graph. Must throw DataError (or
/// return by value) for every ref the caller can produce.
using GraphLookup = std::function<const AttributedCfg&(const FunctionRef&)>;

/// Greedy one-to-one matching of "identical" basic blocks: two blocks
/// match when every feature component agrees within tol after rounding
/// to 6 decimals. Each block is used at most once.
int match_identical_blocks(const AttributedCfg& q, const AttributedCfg& c, double tol);

/// Keeps a candidate iff it shares at least max(1, ceil(alpha * V_q))
/// identical blocks with the query. Removed candidates are replaced from
/// the fallback remainder (next-best scores, same survival rule) until K
/// results or the fallback is exhausted. Survivor order is preserved.
/// Re-filtering a filtered list with the same (alpha, tol) is a no-op.
RankedList filter_ranked_list(const RankedList& list, const GraphLookup& graphs, double alpha,
                              double tol, const std::vector<RankedResult>& fallback);

/// Splits a full ranking into its top-K list and the fallback remainder,
/// then applies the filter.
RankedList filter_full_ranking(const RankedList& full, int K, const GraphLookup& graphs,
                               double alpha, double tol);

struct FilterEffect {
  double delta_precision = 0.0;  // macro-averaged, after - before
  double delta_recall = 0.0;
  struct PerQuery {
    FunctionRef query;
    double precision_before = 0.0, precision_after = 0.0;
    double recall_before = 0.0, recall_after = 0.0;
  };
  std::vector<PerQuery> per_query;
};

FilterEffect evaluate_filter_effect(const std::vector<RankedList>& before,
                                    const std::vector<RankedList>& after, int K);

}  // namespace binsd

#endif  // BINSD_ALIGN_HPP
