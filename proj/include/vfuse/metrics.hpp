#pragma once

// Ranking metrics (AP, P@k) and evaluation reports.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace vfuse {

struct RankedItem {
  std::string video_id;
  double score = 0.0;
  bool relevant = false;
};

// Items sorted by descending score; equal scores are ordered by ascending video id.
class ScoredRanking {
 public:
  ScoredRanking() = default;
  // Throws DataError on size mismatch, repeated ids or non-finite scores.
  ScoredRanking(std::span<const std::string> video_ids, std::span<const double> scores,
                const std::vector<bool>& relevance);
  static ScoredRanking from_items(std::vector<RankedItem> items);

  const std::vector<RankedItem>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  std::size_t num_relevant() const;
  // Relevance flags in rank order.
  std::vector<bool> relevance() const;

 private:
  std::vector<RankedItem> items_;
};

// (1/R) * sum over relevant ranks k of (relevant in top k) / k.
// Throws DegenerateLabelsError when nothing is relevant.
double average_precision(const ScoredRanking& ranking);
double average_precision(const std::vector<bool>& relevance_in_rank_order);

// Relevant items in the top min(k, n), divided by k.
double precision_at(const ScoredRanking& ranking, std::size_t k);

struct EvalReport {
  double ap = 0.0;
  double p10 = 0.0;
  double p100 = 0.0;
  std::size_t num_positives = 0;
  std::string run_id;
  ScoredRanking ranking;
};

EvalReport evaluate(std::span<const std::string> video_ids, std::span<const double> scores,
                    const std::vector<bool>& relevance, std::string run_id = {});

// {ap, p10, p100, num_positives, run_id}; the ranking is not serialised.
nlohmann::json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

// Fast AP for repeated evaluation over a fixed item set: ties are broken by a
// precomputed id order instead of string comparison. Not thread-safe; use one
// instance per worker.
class APEvaluator {
 public:
  APEvaluator(std::span<const std::string> video_ids, const std::vector<bool>& relevance);
  double operator()(std::span<const double> scores) const;
  std::size_t num_relevant() const { return num_relevant_; }

 private:
  std::vector<std::size_t> id_rank_;
  std::vector<bool> relevance_;
  std::size_t num_relevant_ = 0;
  mutable std::vector<std::size_t> order_;
};

// One row of a results grid: a label and per-column AP on val and test.
struct TableRow {
  std::string label;
  std::vector<double> val;
  std::vector<double> test;
};

struct ResultTable {
  std::vector<std::string> columns;
  std::vector<TableRow> rows;
  // Column whose test value orders the rows (descending); defaults to the last.
  int sort_column = -1;
};

// Aligned text grid. Rows are sorted by descending test AP of the sort column;
// within each row the best value of each split is marked with '*'. A missing
// value (NaN) renders as '-'.
std::string emit_table(ResultTable table);
ResultTable parse_table(std::string_view text);

}  // namespace vfuse
