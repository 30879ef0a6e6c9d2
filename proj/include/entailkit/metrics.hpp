#pragma once

#include <algorithm>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "entailkit/trainstrat.hpp"

namespace entailkit {

// Deterministic averaging: pairwise summation bounds float drift regardless
// of query count.
inline double pairwise_sum(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
  if (hi - lo <= 8) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += v[i];
    return s;
  }
  std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(v, lo, mid) + pairwise_sum(v, mid, hi);
}

inline double pairwise_mean(const std::vector<double>& v) {
  if (v.empty()) throw ValidationError("pairwise_mean: empty input");
  return pairwise_sum(v, 0, v.size()) / static_cast<double>(v.size());
}

enum class RunDirection { TEXT_RETRIEVAL, IMAGE_RETRIEVAL };

// Per query image: candidate ids ordered by descending score.
struct RankedRun {
  std::map<std::string, std::vector<std::string>> ranked;  // query -> ordered ids
  RunDirection direction = RunDirection::TEXT_RETRIEVAL;

  void validate(const RetrievalCorpus& corpus) const {
    for (const auto& [q, ids] : ranked) {
      std::set<std::string> seen;
      for (const auto& id : ids) {
        if (!seen.insert(id).second)
          throw ValidationError("RankedRun: duplicate id " + id + " for query " + q);
        bool known = direction == RunDirection::TEXT_RETRIEVAL ? corpus.captions.count(id) != 0
                                                               : corpus.images.count(id) != 0;
        if (!known) throw ValidationError("RankedRun: unknown id " + id);
      }
    }
  }
};

// Fraction of queries with at least one gold item in the top k.
inline double recall_at_k(const RankedRun& run,
                          const std::map<std::string, std::vector<std::string>>& gold,
                          std::size_t k, std::ostream* warn = nullptr) {
  if (k < 1) throw ValidationError("recall_at_k: k must be >= 1");
  std::vector<double> hits;
  for (const auto& [query, ranked] : run.ranked) {
    std::size_t kk = k;
    if (kk > ranked.size()) {
      if (warn) *warn << "recall_at_k: k=" << k << " clamped to list length " << ranked.size()
                      << " for query " << query << "\n";
      kk = ranked.size();
    }
    auto git = gold.find(query);
    bool hit = false;
    if (git != gold.end())
      for (std::size_t i = 0; i < kk && !hit; ++i)
        hit = std::find(git->second.begin(), git->second.end(), ranked[i]) != git->second.end();
    hits.push_back(hit ? 1.0 : 0.0);
  }
  return pairwise_mean(hits);
}

// Entailment relation source: gold labels, the synthetic oracle, classifier
// verdicts or human labels all plug in through this predicate.
using EntailRelation = std::function<bool(const std::string& query, const std::string& item)>;

// Entail@K: per query the mean over ranks 1..K of the indicator "item is gold
// or entailed", then the mean over queries.
inline double entail_at_k(const RankedRun& run,
                          const std::map<std::string, std::vector<std::string>>& gold,
                          const EntailRelation& entailed, std::size_t k) {
  if (k < 1) throw ValidationError("entail_at_k: k must be >= 1");
  std::vector<double> per_query;
  for (const auto& [query, ranked] : run.ranked) {
    std::size_t kk = std::min(k, ranked.size());
    std::vector<double> e;
    auto git = gold.find(query);
    for (std::size_t i = 0; i < kk; ++i) {
      bool is_gold = git != gold.end() &&
                     std::find(git->second.begin(), git->second.end(), ranked[i]) !=
                         git->second.end();
      e.push_back(is_gold || entailed(query, ranked[i]) ? 1.0 : 0.0);
    }
    per_query.push_back(e.empty() ? 0.0 : pairwise_sum(e, 0, e.size()) / static_cast<double>(k));
  }
  return pairwise_mean(per_query);
}

// ---- classification metrics ----

inline double f_beta(double precision, double recall, double beta = 0.5) {
  double b2 = beta * beta;
  double denom = b2 * precision + recall;
  if (denom == 0.0) return 0.0;
  return (1.0 + b2) * precision * recall / denom;
}

struct ClassificationMetrics {
  double accuracy = 0.0, precision = 0.0, recall = 0.0, f_beta = 0.0;
  bool zero_division = false;  // precision or recall had an empty denominator
};

// ENTAIL (1) is the positive class.
inline ClassificationMetrics classification_metrics(const std::vector<int>& predictions,
                                                    const std::vector<int>& labels,
                                                    double beta = 0.5) {
  if (predictions.empty() || predictions.size() != labels.size())
    throw ValidationError("classification_metrics: empty or misaligned inputs");
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == 1)
      labels[i] == 1 ? ++tp : ++fp;
    else
      labels[i] == 1 ? ++fn : ++tn;
  }
  ClassificationMetrics m;
  m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(predictions.size());
  if (tp + fp == 0)
    m.zero_division = true;
  else
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn == 0)
    m.zero_division = true;
  else
    m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  m.f_beta = f_beta(m.precision, m.recall, beta);
  return m;
}

// ---- Fleiss' kappa ----

// rating_matrix: items x categories, each cell the number of raters who put
// the item in that category. Every row must sum to the same rater count n>=2.
inline double fleiss_kappa(const std::vector<std::vector<std::size_t>>& rating_matrix) {
  if (rating_matrix.empty()) throw ValidationError("fleiss_kappa: no items");
  std::size_t categories = rating_matrix[0].size();
  std::size_t n = 0;
  for (const auto& row : rating_matrix) {
    if (row.size() != categories) throw ValidationError("fleiss_kappa: ragged matrix");
    std::size_t s = 0;
    for (auto c : row) s += c;
    if (n == 0) n = s;
    if (s != n) throw ValidationError("fleiss_kappa: unequal rater counts");
  }
  if (n < 2) throw ValidationError("fleiss_kappa: need at least 2 raters");
  std::size_t items = rating_matrix.size();
  std::vector<double> p_item(items);
  std::vector<double> p_cat(categories, 0.0);
  for (std::size_t i = 0; i < items; ++i) {
    double agree = 0.0;
    for (std::size_t c = 0; c < categories; ++c) {
      double cnt = static_cast<double>(rating_matrix[i][c]);
      agree += cnt * (cnt - 1.0);
      p_cat[c] += cnt;
    }
    p_item[i] = agree / (static_cast<double>(n) * (n - 1.0));
  }
  for (auto& v : p_cat) v /= static_cast<double>(items * n);
  double p_bar = pairwise_mean(p_item);
  double p_e = 0.0;
  for (double v : p_cat) p_e += v * v;
  if (p_e >= 1.0) {
    // all mass in one category: agreement is either perfect or undefined
    if (p_bar >= 1.0) return 1.0;
    throw ValidationError("fleiss_kappa: degenerate category distribution");
  }
  return (p_bar - p_e) / (1.0 - p_e);
}

// ---- reports ----

inline std::uint64_t fnv1a64_bytes(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline constexpr const char* kReportSchema = "ENTAILKIT-REPORT-1";

struct MetricsReport {
  std::map<std::string, double> metrics;
  std::string corpus_hash, config_hash;
  std::uint64_t seed = 0;
};

}  // namespace entailkit
