#ifndef BINSD_METRICS_HPP
#define BINSD_METRICS_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "binsd/repo.hpp"

namespace binsd {

/// Scored similarity pairs with +/-1 labels, the input of AUC and ACC.
struct PairScoreSet {
  std::vector<std::pair<double, int>> items;  // (score, label)
};

/// Probability that a random positive outscores a random negative, ties
/// counted 1/2 (rank-sum formulation). Requires both labels present.
double roc_auc(const PairScoreSet& s);

struct ThresholdAccuracy {
  double accuracy = 0.0;
  double threshold = 0.0;  // smallest threshold achieving the maximum
};

/// Scans candidate thresholds (midpoints between adjacent distinct
/// scores, plus the all-positive and all-negative sentinels); predicts
/// +1 iff score >= threshold.
ThresholdAccuracy accuracy_at_best_threshold(const PairScoreSet& s);

struct PrecisionRecallF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Macro-averages over queries. Per query: precision = hits / |results|,
/// recall = hits / max(1, total relevant in the whole repository),
/// f1 = 2pr/(p+r) (0 when p+r = 0).
PrecisionRecallF1 precision_recall_f1_at_k(const std::vector<RankedList>& lists, int K);

/// Fraction of queries whose first result is relevant.
double rank1(const std::vector<RankedList>& lists);

/// A mean over queries with total_relevant > 0; excluded counts the rest.
struct ExcludingMean {
  double value = 0.0;
  long n_excluded = 0;
};

/// AP@K = sum over relevant ranks j<=K of precision@j, normalized by
/// min(total relevant, K).
ExcludingMean map_at_k(const std::vector<RankedList>& lists, int K);

/// Reciprocal rank of the first relevant result within top-K, else 0.
ExcludingMean mrr_at_k(const std::vector<RankedList>& lists, int K);

/// Binary gains: DCG = sum over relevant ranks j of 1/log2(j+1); ideal
/// DCG uses min(total relevant, K) hits.
ExcludingMean ndcg_at_k(const std::vector<RankedList>& lists, int K);

struct MetricReport {
  double auc = 0.0;
  double acc = 0.0;
  double threshold = 0.0;
  double precision_k = 0.0;
  double recall_k = 0.0;
  double f1_k = 0.0;
  double rank1 = 0.0;
  double map_k = 0.0;
  double mrr_k = 0.0;
  double ndcg_k = 0.0;
  int K = 0;
  long n_queries = 0;
  long n_excluded = 0;  // zero-relevant queries skipped by MAP/MRR/NDCG
};

/// Runs every metric over the same inputs and assembles the report.
MetricReport aggregate_report(const std::vector<RankedList>& lists, const PairScoreSet& pairs,
                              int K);

/// CSV: header "metric,value,n_queries,n_excluded,K", one row per metric,
/// '.' decimal separator, shortest round-trip float formatting.
void write_report_csv(const MetricReport& report, std::ostream& out);
void write_report_csv(const MetricReport& report, const std::string& path);
MetricReport read_report_csv(const std::string& path);

}  // namespace binsd

#endif  // BINSD_METRICS_HPP
