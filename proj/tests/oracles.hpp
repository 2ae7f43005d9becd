#pragma once

// Independent reference implementations used as test oracles.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

namespace oracle {

// Indices ordered by descending score, ties by ascending id.
inline std::vector<std::size_t> rank_order(const std::vector<std::string>& ids, const std::vector<double>& scores) {
  std::vector<std::size_t> idx(ids.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  // Selection sort: deliberately unlike the library's sort.
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::size_t best = i;
    for (std::size_t j = i + 1; j < idx.size(); ++j) {
      const std::size_t a = idx[j], b = idx[best];
      if (scores[a] > scores[b] || (scores[a] == scores[b] && ids[a] < ids[b])) best = j;
    }
    std::swap(idx[i], idx[best]);
  }
  return idx;
}

// AP straight from the definition: mean over relevant ranks of precision at that rank.
inline double average_precision(const std::vector<bool>& rel_in_rank_order) {
  double sum = 0.0;
  std::size_t r = 0;
  for (std::size_t k = 1; k <= rel_in_rank_order.size(); ++k) {
    if (!rel_in_rank_order[k - 1]) continue;
    std::size_t hits = 0;
    for (std::size_t j = 0; j < k; ++j) hits += rel_in_rank_order[j] ? 1 : 0;
    sum += static_cast<double>(hits) / static_cast<double>(k);
    ++r;
  }
  return sum / static_cast<double>(r);
}

inline double precision_at(const std::vector<bool>& rel_in_rank_order, std::size_t k) {
  std::size_t hits = 0;
  for (std::size_t j = 0; j < k && j < rel_in_rank_order.size(); ++j) hits += rel_in_rank_order[j] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(k);
}

inline std::vector<bool> relevance_in_order(const std::vector<std::string>& ids, const std::vector<double>& scores,
                                            const std::vector<bool>& rel) {
  std::vector<bool> out;
  for (std::size_t i : rank_order(ids, scores)) out.push_back(rel[i]);
  return out;
}

inline std::vector<std::string> make_ids(std::size_t n, const std::string& prefix = "v") {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) {
    std::string num = std::to_string(i);
    ids.push_back(prefix + std::string(4 - std::min<std::size_t>(4, num.size()), '0') + num);
  }
  return ids;
}

}  // namespace oracle
