#include <algorithm>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "vfuse/error.hpp"
#include "vfuse/fuse.hpp"
#include "vfuse/metrics.hpp"

using namespace vfuse;

namespace {

ScoreMatrix random_matrix(std::size_t n, std::size_t m, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  ScoreMatrix s;
  s.video_ids = oracle::make_ids(n);
  for (std::size_t c = 0; c < m; ++c) s.columns.push_back({"f" + std::to_string(c), "violence"});
  s.values = RowMatrix(n, m);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) s.values.row(r)[c] = nd(gen);
  return s;
}

double oracle_ap(const ScoreMatrix& s, const std::vector<double>& w, const std::vector<bool>& labels) {
  std::vector<double> fused(s.video_ids.size(), 0.0);
  for (std::size_t r = 0; r < fused.size(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < w.size(); ++c) {
      if (w[c] != 0.0) acc += w[c] * s.values.row(r)[c];
    }
    fused[r] = acc;
  }
  return oracle::average_precision(oracle::relevance_in_order(s.video_ids, fused, labels));
}

// Coordinate ascent written out from the definition; columns are already in key order.
std::vector<double> oracle_ascent(const ScoreMatrix& s, const std::vector<bool>& labels, const FusionConfig& c) {
  std::vector<double> w(s.columns.size(), c.init_weight);
  double cur = oracle_ap(s, w, labels);
  for (int round = 0; round < c.max_rounds; ++round) {
    const double start = cur;
    for (std::size_t i = 0; i < w.size(); ++i) {
      double others = 0.0;
      for (std::size_t j = 0; j < w.size(); ++j) others += j != i ? w[j] : 0.0;
      const double keep = w[i];
      double best = keep, best_ap = cur;
      for (double g : c.weight_grid) {
        if (g == keep || (g == 0.0 && others == 0.0)) continue;
        w[i] = g;
        const double a = oracle_ap(s, w, labels);
        if (a > best_ap) best = g, best_ap = a;
      }
      w[i] = best;
      cur = best_ap;
    }
    if (cur - start < c.tolerance) break;
  }
  return w;
}

std::vector<bool> labels_for(std::size_t n, std::size_t every) {
  std::vector<bool> l(n);
  for (std::size_t i = 0; i < n; ++i) l[i] = i % every == 0;
  return l;
}

}  // namespace

TEST_SUITE("fuse") {
  TEST_CASE("weighted sum examples") {
    ScoreMatrix s;
    s.video_ids = {"a", "b"};
    s.columns = {{"f", "x"}, {"g", "x"}};
    s.values = RowMatrix(2, 2);
    s.values.row(0)[0] = 1, s.values.row(0)[1] = 3;
    s.values.row(1)[0] = -2, s.values.row(1)[1] = 4;
    const auto avg = fuse_scores(average_fusion(s.columns), s);
    CHECK(avg == std::vector<double>{2.0, 1.0});
    FusionModel m{{{{"g", "x"}, 2.0}, {{"f", "x"}, 0.5}}, FusionMode::learn, 0};
    const auto f = fuse_scores(m, s);
    CHECK(f[0] == doctest::Approx(6.5));
    CHECK(f[1] == doctest::Approx(7.0));
    FusionModel missing{{{{"f", "x"}, 1.0}}, FusionMode::avg, 0};
    CHECK_THROWS_AS(fuse_scores(missing, s), DataError);
  }

  TEST_CASE("scaling all weights leaves the ranking unchanged") {
    std::mt19937_64 gen(2);
    const ScoreMatrix s = random_matrix(40, 4, gen);
    const auto labels = labels_for(40, 5);
    FusionModel m = average_fusion(s.columns);
    const double base = evaluate(s.video_ids, fuse_scores(m, s), labels).ap;
    for (auto& e : m.entries) e.weight *= 4.0;
    CHECK(evaluate(s.video_ids, fuse_scores(m, s), labels).ap == base);
  }

  TEST_CASE("single classifier keeps its AP") {
    std::mt19937_64 gen(3);
    const ScoreMatrix s = random_matrix(30, 1, gen);
    const auto labels = labels_for(30, 4);
    const FusionModel m = learn_weights(s, labels);
    CHECK(m.entries[0].weight > 0.0);
    CHECK(m.val_ap_achieved == doctest::Approx(evaluate(s.video_ids, s.column(0), labels).ap));
  }

  TEST_CASE("perfect classifier among random ones reaches AP 1") {
    std::mt19937_64 gen(4);
    ScoreMatrix s = random_matrix(60, 4, gen);
    const auto labels = labels_for(60, 6);
    for (std::size_t r = 0; r < 60; ++r) s.values.row(r)[2] = labels[r] ? 10.0 : -10.0;
    const FusionModel m = learn_weights(s, labels);
    CHECK(m.val_ap_achieved == 1.0);
    CHECK(evaluate(s.video_ids, fuse_scores(m, s), labels).ap == 1.0);
  }

  TEST_CASE("coordinate ascent matches the oracle and never loses to uniform weights") {
    std::mt19937_64 gen(5);
    FusionConfig c;
    c.weight_grid = {0, 0.5, 1, 1.5, 2};
    c.init_weight = 1.0;
    c.tolerance = 0.0;
    for (int t = 0; t < 20; ++t) {
      const std::size_t m = 2 + gen() % 3;
      const ScoreMatrix s = random_matrix(30, m, gen);
      auto labels = labels_for(30, 3 + gen() % 4);
      CoordinateAscentTrace trace;
      const FusionModel model = learn_weights(s, labels, c, &trace);
      CHECK(model.weights() == oracle_ascent(s, labels, c));
      const double uniform = oracle_ap(s, std::vector<double>(m, 1.0), labels);
      CHECK(model.val_ap_achieved >= uniform);
      CHECK(model.val_ap_achieved == doctest::Approx(oracle_ap(s, model.weights(), labels)).epsilon(1e-12));
      for (std::size_t i = 1; i < trace.accepted_aps.size(); ++i) CHECK(trace.accepted_aps[i] > trace.accepted_aps[i - 1]);
      // Exhaustive search over the grid bounds the result from above.
      double best = 0.0;
      std::vector<std::size_t> idx(m, 0);
      while (true) {
        std::vector<double> w(m);
        for (std::size_t i = 0; i < m; ++i) w[i] = c.weight_grid[idx[i]];
        if (std::any_of(w.begin(), w.end(), [](double v) { return v > 0.0; })) best = std::max(best, oracle_ap(s, w, labels));
        std::size_t k = 0;
        while (k < m && ++idx[k] == c.weight_grid.size()) idx[k++] = 0;
        if (k == m) break;
      }
      CHECK(model.val_ap_achieved <= best + 1e-15);
    }
  }

  TEST_CASE("learned weights are deterministic") {
    std::mt19937_64 gen(6);
    const ScoreMatrix s = random_matrix(50, 5, gen);
    const auto labels = labels_for(50, 7);
    CHECK(learn_weights(s, labels).weights() == learn_weights(s, labels).weights());
  }

  TEST_CASE("degenerate labels and bad configs") {
    std::mt19937_64 gen(7);
    const ScoreMatrix s = random_matrix(10, 2, gen);
    CHECK_THROWS_AS(learn_weights(s, std::vector<bool>(10, false)), DegenerateLabelsError);
    CHECK_THROWS_AS(learn_weights(s, std::vector<bool>(10, true)), DegenerateLabelsError);
    FusionConfig c;
    c.weight_grid = {0.5, 1.0};
    CHECK_THROWS_AS(learn_weights(s, labels_for(10, 2), c), ConfigError);
    c.weight_grid = {0, 1};
    c.init_weight = 0.7;
    CHECK_THROWS_AS(learn_weights(s, labels_for(10, 2), c), ConfigError);
  }

  TEST_CASE("assembling the classifier bank") {
    std::vector<std::string> all;
    for (int i = 0; i < 14; ++i) all.push_back("feat" + std::to_string(i));
    std::vector<std::string> names;
    for (int i = 0; i < 10; ++i) names.push_back("s" + std::to_string(i));
    const SubclassVocabulary vocab(names);
    CHECK(assemble_bank(all, all, SubclassMode::none, vocab).size() == 14);
    CHECK(assemble_bank(all, all, SubclassMode::learn, vocab).size() == 140);
    CHECK(assemble_bank(all, all, SubclassMode::avg, vocab, true).size() == 154);
    CHECK(assemble_bank({"feat3"}, all, SubclassMode::avg, vocab).size() == 10);
    CHECK_THROWS_AS(assemble_bank({"nope"}, all, SubclassMode::none, vocab), ConfigError);
    CHECK_THROWS_AS(assemble_bank({}, all, SubclassMode::none, vocab), ConfigError);
  }

  TEST_CASE("fusion file round-trips") {
    FusionModel m{{{{"mfcc_b", "fire"}, 1.5}, {{"vnet_v", "blood"}, 0.0}}, FusionMode::learn, 0.73125};
    const std::string text = format_fusion(m);
    const FusionModel back = parse_fusion(text);
    CHECK(back.mode == FusionMode::learn);
    CHECK(back.val_ap_achieved == m.val_ap_achieved);
    CHECK(back.weights() == m.weights());
    CHECK(format_fusion(back) == text);
    CHECK_THROWS_AS(parse_fusion("#mode=learn #val_ap=0.5\nf\tc\t0\n"), DataError);
    CHECK_THROWS_AS(parse_fusion("#mode=odd #val_ap=0.5\nf\tc\t1\n"), DataError);
  }
}
