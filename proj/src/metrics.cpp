#include "vfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "vfuse/error.hpp"
#include "vfuse/textio.hpp"

namespace vfuse {

namespace {

bool rank_before(const RankedItem& a, const RankedItem& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.video_id < b.video_id;
}

}  // namespace

ScoredRanking::ScoredRanking(std::span<const std::string> video_ids, std::span<const double> scores,
                             const std::vector<bool>& relevance) {
  if (video_ids.size() != scores.size() || video_ids.size() != relevance.size()) {
    throw DataError("ranking: ids, scores and labels differ in length");
  }
  items_.reserve(video_ids.size());
  for (std::size_t i = 0; i < video_ids.size(); ++i) {
    items_.push_back({video_ids[i], scores[i], relevance[i]});
  }
  *this = from_items(std::move(items_));
}

ScoredRanking ScoredRanking::from_items(std::vector<RankedItem> items) {
  for (const auto& it : items) {
    if (!std::isfinite(it.score)) throw DataError("ranking: non-finite score for " + it.video_id);
  }
  std::sort(items.begin(), items.end(), rank_before);
  for (std::size_t i = 1; i < items.size(); ++i) {
    if (items[i].video_id == items[i - 1].video_id) {
      throw DataError("ranking: duplicate video id " + items[i].video_id);
    }
  }
  // Equal ids can only be adjacent when their scores match; catch the rest too.
  std::set<std::string_view> seen;
  for (const auto& it : items) {
    if (!seen.insert(it.video_id).second) throw DataError("ranking: duplicate video id " + it.video_id);
  }
  ScoredRanking r;
  r.items_ = std::move(items);
  return r;
}

std::size_t ScoredRanking::num_relevant() const {
  return static_cast<std::size_t>(std::count_if(items_.begin(), items_.end(), [](const auto& i) { return i.relevant; }));
}

std::vector<bool> ScoredRanking::relevance() const {
  std::vector<bool> out;
  out.reserve(items_.size());
  for (const auto& i : items_) out.push_back(i.relevant);
  return out;
}

double average_precision(const std::vector<bool>& relevance_in_rank_order) {
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < relevance_in_rank_order.size(); ++i) {
    if (relevance_in_rank_order[i]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  if (hits == 0) throw DegenerateLabelsError("average precision undefined: no relevant items");
  return sum / static_cast<double>(hits);
}

double average_precision(const ScoredRanking& ranking) { return average_precision(ranking.relevance()); }

double precision_at(const ScoredRanking& ranking, std::size_t k) {
  if (k == 0) throw ConfigError("precision_at: k must be at least 1");
  const std::size_t top = std::min(k, ranking.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < top; ++i) hits += ranking.items()[i].relevant ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(k);
}

EvalReport evaluate(std::span<const std::string> video_ids, std::span<const double> scores,
                    const std::vector<bool>& relevance, std::string run_id) {
  EvalReport r;
  r.ranking = ScoredRanking(video_ids, scores, relevance);
  r.num_positives = r.ranking.num_relevant();
  r.ap = average_precision(r.ranking);
  r.p10 = precision_at(r.ranking, 10);
  r.p100 = precision_at(r.ranking, 100);
  r.run_id = std::move(run_id);
  return r;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json j;
  j["ap"] = report.ap;
  j["p10"] = report.p10;
  j["p100"] = report.p100;
  j["num_positives"] = report.num_positives;
  j["run_id"] = report.run_id;
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.ap = j.at("ap").get<double>();
    r.p10 = j.at("p10").get<double>();
    r.p100 = j.at("p100").get<double>();
    r.num_positives = j.at("num_positives").get<std::size_t>();
    r.run_id = j.at("run_id").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("report: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

APEvaluator::APEvaluator(std::span<const std::string> video_ids, const std::vector<bool>& relevance)
    : id_rank_(video_ids.size()), relevance_(relevance), order_(video_ids.size()) {
  if (video_ids.size() != relevance.size()) throw DataError("APEvaluator: ids and labels differ in length");
  std::vector<std::size_t> by_id(video_ids.size());
  std::iota(by_id.begin(), by_id.end(), std::size_t{0});
  std::sort(by_id.begin(), by_id.end(), [&](std::size_t a, std::size_t b) { return video_ids[a] < video_ids[b]; });
  for (std::size_t r = 0; r < by_id.size(); ++r) id_rank_[by_id[r]] = r;
  num_relevant_ = static_cast<std::size_t>(std::count(relevance_.begin(), relevance_.end(), true));
  if (num_relevant_ == 0) throw DegenerateLabelsError("average precision undefined: no relevant items");
}

double APEvaluator::operator()(std::span<const double> scores) const {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return id_rank_[a] < id_rank_[b];
  });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < order_.size() && hits < num_relevant_; ++i) {
    if (relevance_[order_[i]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(num_relevant_);
}

// ---------------------------------------------------------------------------

namespace {

std::string cell(double v, bool best) {
  if (std::isnan(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%.3f", best ? "*" : "", v);
  return buf;
}

std::vector<bool> best_flags(const std::vector<double>& values) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : values) {
    if (!std::isnan(v)) mx = std::max(mx, v);
  }
  std::vector<bool> flags(values.size(), false);
  // Compare at display precision so that visually tied cells are all marked.
  char a[32], b[32];
  std::snprintf(b, sizeof(b), "%.3f", mx);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isnan(values[i])) continue;
    std::snprintf(a, sizeof(a), "%.3f", values[i]);
    flags[i] = std::string_view(a) == std::string_view(b);
  }
  return flags;
}

}  // namespace

std::string emit_table(ResultTable table) {
  const std::size_t nc = table.columns.size();
  if (nc == 0) throw ConfigError("emit_table: no columns");
  for (const auto& r : table.rows) {
    if (r.val.size() != nc || r.test.size() != nc) throw ConfigError("emit_table: row " + r.label + " width mismatch");
    if (r.label.empty() || r.label.find_first_of(" \t\n") != std::string::npos) {
      throw ConfigError("emit_table: row label must be a non-empty token");
    }
  }
  const std::size_t sort_col = table.sort_column < 0 ? nc - 1 : static_cast<std::size_t>(table.sort_column);
  if (sort_col >= nc) throw ConfigError("emit_table: sort column out of range");
  std::stable_sort(table.rows.begin(), table.rows.end(), [&](const TableRow& a, const TableRow& b) {
    const double x = a.test[sort_col], y = b.test[sort_col];
    if (std::isnan(x) != std::isnan(y)) return std::isnan(y);
    return x > y;
  });

  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{"label"};
  for (const auto& c : table.columns) header.push_back("val:" + c);
  for (const auto& c : table.columns) header.push_back("test:" + c);
  grid.push_back(header);
  for (const auto& r : table.rows) {
    std::vector<std::string> line{r.label};
    const auto bv = best_flags(r.val), bt = best_flags(r.test);
    for (std::size_t i = 0; i < nc; ++i) line.push_back(cell(r.val[i], bv[i]));
    for (std::size_t i = 0; i < nc; ++i) line.push_back(cell(r.test[i], bt[i]));
    grid.push_back(std::move(line));
  }
  std::vector<std::size_t> width(grid[0].size(), 0);
  for (const auto& line : grid) {
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
  }
  std::string out;
  for (const auto& line : grid) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i == 0) {
        out += line[i] + std::string(width[i] - line[i].size(), ' ');
      } else {
        out += "  " + std::string(width[i] - line[i].size(), ' ') + line[i];
      }
    }
    out.push_back('\n');
  }
  return out;
}

ResultTable parse_table(std::string_view text) {
  const auto ls = textio::lines(text);
  if (ls.empty()) throw DataError("table: empty");
  auto tokens = [](std::string_view line) {
    std::vector<std::string> t;
    std::istringstream in{std::string(line)};
    std::string s;
    while (in >> s) t.push_back(s);
    return t;
  };
  const auto header = tokens(ls[0]);
  if (header.size() < 3 || header[0] != "label" || (header.size() - 1) % 2 != 0) {
    throw DataError("table: malformed header");
  }
  ResultTable table;
  const std::size_t nc = (header.size() - 1) / 2;
  for (std::size_t i = 0; i < nc; ++i) {
    const std::string& h = header[1 + i];
    if (h.rfind("val:", 0) != 0 || header[1 + nc + i] != "test:" + h.substr(4)) {
      throw DataError("table: malformed header column " + h);
    }
    table.columns.push_back(h.substr(4));
  }
  auto value = [](std::string s) {
    if (s == "-") return std::numeric_limits<double>::quiet_NaN();
    if (!s.empty() && s[0] == '*') s.erase(0, 1);
    return textio::parse_real(s, "table");
  };
  for (std::size_t l = 1; l < ls.size(); ++l) {
    const auto t = tokens(ls[l]);
    if (t.empty()) continue;
    if (t.size() != header.size()) throw DataError("table: row width mismatch at line " + std::to_string(l + 1));
    TableRow row{t[0], {}, {}};
    for (std::size_t i = 0; i < nc; ++i) row.val.push_back(value(t[1 + i]));
    for (std::size_t i = 0; i < nc; ++i) row.test.push_back(value(t[1 + nc + i]));
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace vfuse
