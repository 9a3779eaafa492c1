#include "binsd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace binsd {

namespace {

void check_both_labels(const PairScoreSet& s) {
  bool pos = false, neg = false;
  for (const auto& [score, label] : s.items) (label > 0 ? pos : neg) = true;
  if (!pos || !neg) throw DataError("pair score set needs both labels");
}

void check_lists(const std::vector<RankedList>& lists) {
  if (lists.empty()) throw DataError("empty query set");
}

long hits_in_topk(const RankedList& list, int K) {
  long hits = 0;
  const auto upto = std::min<std::size_t>(list.results.size(), static_cast<std::size_t>(K));
  for (std::size_t j = 0; j < upto; ++j) hits += list.results[j].relevant ? 1 : 0;
  return hits;
}

}  // namespace

double roc_auc(const PairScoreSet& s) {
  check_both_labels(s);
  std::vector<std::pair<double, int>> sorted = s.items;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  // Average ranks over tie groups, then the Mann-Whitney U statistic.
  double rank_sum_pos = 0.0;
  long n_pos = 0, n_neg = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].first == sorted[i].first) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k)
      if (sorted[k].second > 0) rank_sum_pos += avg_rank;
    i = j;
  }
  for (const auto& [score, label] : s.items) (label > 0 ? n_pos : n_neg) += 1;
  const double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

ThresholdAccuracy accuracy_at_best_threshold(const PairScoreSet& s) {
  check_both_labels(s);
  std::vector<std::pair<double, int>> sorted = s.items;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<double> distinct;
  for (const auto& [score, label] : sorted)
    if (distinct.empty() || distinct.back() != score) distinct.push_back(score);

  std::vector<double> candidates;
  candidates.push_back(distinct.front());  // predicts all +1
  for (std::size_t k = 0; k + 1 < distinct.size(); ++k)
    candidates.push_back(0.5 * (distinct[k] + distinct[k + 1]));
  candidates.push_back(distinct.back() + 1.0);  // predicts all -1

  const double total = static_cast<double>(sorted.size());
  // pos_below[i] = positives among the first i items (scores ascending).
  std::vector<long> pos_prefix(sorted.size() + 1, 0);
  for (std::size_t k = 0; k < sorted.size(); ++k)
    pos_prefix[k + 1] = pos_prefix[k] + (sorted[k].second > 0 ? 1 : 0);
  const long total_pos = pos_prefix.back();

  ThresholdAccuracy best{-1.0, 0.0};
  for (double theta : candidates) {
    // First index with score >= theta.
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), theta,
                                     [](const auto& item, double t) { return item.first < t; });
    const auto below = static_cast<std::size_t>(lo - sorted.begin());
    const long pos_below = pos_prefix[below];
    const long correct_neg = static_cast<long>(below) - pos_below;        // predicted -1, are -1
    const long correct_pos = total_pos - pos_below;                       // predicted +1, are +1
    const double acc = static_cast<double>(correct_neg + correct_pos) / total;
    if (acc > best.accuracy) best = {acc, theta};
  }
  return best;
}

PrecisionRecallF1 precision_recall_f1_at_k(const std::vector<RankedList>& lists, int K) {
  check_lists(lists);
  PrecisionRecallF1 out;
  for (const auto& list : lists) {
    if (list.K < K) throw DataError("ranked list built with a smaller K");
    const auto shown = std::min<std::size_t>(list.results.size(), static_cast<std::size_t>(K));
    const long hits = hits_in_topk(list, K);
    const double p = shown == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(shown);
    const double r =
        static_cast<double>(hits) / static_cast<double>(std::max<long>(1, list.total_relevant_in_repo));
    const double f = (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    out.precision += p;
    out.recall += r;
    out.f1 += f;
  }
  const auto n = static_cast<double>(lists.size());
  out.precision /= n;
  out.recall /= n;
  out.f1 /= n;
  return out;
}

double rank1(const std::vector<RankedList>& lists) {
  check_lists(lists);
  long hits = 0;
  for (const auto& list : lists)
    hits += (!list.results.empty() && list.results.front().relevant) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(lists.size());
}

ExcludingMean map_at_k(const std::vector<RankedList>& lists, int K) {
  check_lists(lists);
  ExcludingMean out;
  long counted = 0;
  for (const auto& list : lists) {
    if (list.total_relevant_in_repo == 0) {
      ++out.n_excluded;
      continue;
    }
    const auto upto = std::min<std::size_t>(list.results.size(), static_cast<std::size_t>(K));
    double ap = 0.0;
    long hits = 0;
    for (std::size_t j = 0; j < upto; ++j) {
      if (list.results[j].relevant) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(j + 1);
      }
    }
    ap /= static_cast<double>(std::min<long>(list.total_relevant_in_repo, K));
    out.value += ap;
    ++counted;
  }
  if (counted == 0) throw DataError("every query was excluded");
  out.value /= static_cast<double>(counted);
  return out;
}

ExcludingMean mrr_at_k(const std::vector<RankedList>& lists, int K) {
  check_lists(lists);
  ExcludingMean out;
  long counted = 0;
  for (const auto& list : lists) {
    if (list.total_relevant_in_repo == 0) {
      ++out.n_excluded;
      continue;
    }
    const auto upto = std::min<std::size_t>(list.results.size(), static_cast<std::size_t>(K));
    double rr = 0.0;
    for (std::size_t j = 0; j < upto; ++j) {
      if (list.results[j].relevant) {
        rr = 1.0 / static_cast<double>(j + 1);
        break;
      }
    }
    out.value += rr;
    ++counted;
  }
  if (counted == 0) throw DataError("every query was excluded");
  out.value /= static_cast<double>(counted);
  return out;
}

ExcludingMean ndcg_at_k(const std::vector<RankedList>& lists, int K) {
  check_lists(lists);
  ExcludingMean out;
  long counted = 0;
  for (const auto& list : lists) {
    if (list.total_relevant_in_repo == 0) {
      ++out.n_excluded;
      continue;
    }
    const auto upto = std::min<std::size_t>(list.results.size(), static_cast<std::size_t>(K));
    double dcg = 0.0;
    for (std::size_t j = 0; j < upto; ++j)
      if (list.results[j].relevant) dcg += 1.0 / std::log2(static_cast<double>(j + 2));
    const long ideal_hits = std::min<long>(list.total_relevant_in_repo, K);
    double idcg = 0.0;
    for (long j = 1; j <= ideal_hits; ++j) idcg += 1.0 / std::log2(static_cast<double>(j + 1));
    out.value += dcg / idcg;
    ++counted;
  }
  if (counted == 0) throw DataError("every query was excluded");
  out.value /= static_cast<double>(counted);
  return out;
}

MetricReport aggregate_report(const std::vector<RankedList>& lists, const PairScoreSet& pairs,
                              int K) {
  MetricReport r;
  r.K = K;
  r.n_queries = static_cast<long>(lists.size());
  r.auc = roc_auc(pairs);
  const auto ta = accuracy_at_best_threshold(pairs);
  r.acc = ta.accuracy;
  r.threshold = ta.threshold;
  const auto prf = precision_recall_f1_at_k(lists, K);
  r.precision_k = prf.precision;
  r.recall_k = prf.recall;
  r.f1_k = prf.f1;
  r.rank1 = rank1(lists);
  const auto map = map_at_k(lists, K);
  const auto mrr = mrr_at_k(lists, K);
  const auto ndcg = ndcg_at_k(lists, K);
  r.map_k = map.value;
  r.mrr_k = mrr.value;
  r.ndcg_k = ndcg.value;
  r.n_excluded = map.n_excluded;
  return r;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_report_csv(const MetricReport& report, std::ostream& out) {
  out << "metric,value,n_queries,n_excluded,K\n";
  const std::pair<const char*, double> rows[] = {
      {"auc", report.auc},           {"acc", report.acc},
      {"threshold", report.threshold}, {"precision_k", report.precision_k},
      {"recall_k", report.recall_k}, {"f1_k", report.f1_k},
      {"rank1", report.rank1},       {"map_k", report.map_k},
      {"mrr_k", report.mrr_k},       {"ndcg_k", report.ndcg_k},
  };
  for (const auto& [name, value] : rows)
    out << name << ',' << fmt_double(value) << ',' << report.n_queries << ','
        << report.n_excluded << ',' << report.K << '\n';
}

void write_report_csv(const MetricReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  write_report_csv(report, out);
  if (!out) throw DataError("write failed: " + path);
}

MetricReport read_report_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "metric,value,n_queries,n_excluded,K")
    throw DataError(path + ": bad report header");
  MetricReport r;
  std::map<std::string, double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string name, value, nq, nx, k;
    if (!std::getline(ss, name, ',') || !std::getline(ss, value, ',') ||
        !std::getline(ss, nq, ',') || !std::getline(ss, nx, ',') || !std::getline(ss, k, ','))
      throw DataError(path + ": bad report row");
    values[name] = std::stod(value);
    r.n_queries = std::stol(nq);
    r.n_excluded = std::stol(nx);
    r.K = std::stoi(k);
  }
  auto need = [&](const char* name) {
    auto it = values.find(name);
    if (it == values.end()) throw DataError(path + ": missing metric " + name);
    return it->second;
  };
  r.auc = need("auc");
  r.acc = need("acc");
  r.threshold = need("threshold");
  r.precision_k = need("precision_k");
  r.recall_k = need("recall_k");
  r.f1_k = need("f1_k");
  r.rank1 = need("rank1");
  r.map_k = need("map_k");
  r.mrr_k = need("mrr_k");
  r.ndcg_k = need("ndcg_k");
  return r;
}

}  // namespace binsd
