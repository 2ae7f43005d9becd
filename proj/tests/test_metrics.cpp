#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "vfuse/error.hpp"
#include "vfuse/metrics.hpp"

using namespace vfuse;

TEST_SUITE("metrics") {
  TEST_CASE("average precision of a fixed relevance pattern") {
    CHECK(average_precision(std::vector<bool>{true, false, true, false}) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-15));
    CHECK(average_precision(std::vector<bool>{true, true, false, false}) == 1.0);
    for (std::size_t n = 1; n <= 12; ++n) {
      std::vector<bool> rel(n, false);
      rel[n - 1] = true;
      CHECK(average_precision(rel) == doctest::Approx(1.0 / static_cast<double>(n)).epsilon(1e-15));
    }
  }

  TEST_CASE("no relevant items is a degenerate-labels error") {
    CHECK_THROWS_AS(average_precision(std::vector<bool>{false, false}), DegenerateLabelsError);
    const auto ids = oracle::make_ids(3);
    CHECK_THROWS_AS(evaluate(ids, std::vector<double>{1, 2, 3}, {false, false, false}), DegenerateLabelsError);
  }

  TEST_CASE("reversed perfect ranking matches the closed form") {
    for (std::size_t n = 2; n <= 10; ++n) {
      for (std::size_t r = 1; r < n; ++r) {
        std::vector<bool> rel(n, false);
        for (std::size_t i = n - r; i < n; ++i) rel[i] = true;
        double expected = 0.0;
        for (std::size_t i = 1; i <= r; ++i) expected += static_cast<double>(i) / static_cast<double>(n - r + i);
        expected /= static_cast<double>(r);
        CHECK(std::abs(average_precision(rel) - expected) < 1e-12);
      }
    }
  }

  TEST_CASE("precision at k") {
    const auto ids = oracle::make_ids(200);
    std::vector<double> scores(200);
    std::vector<bool> rel(200, false);
    for (std::size_t i = 0; i < 200; ++i) scores[i] = 200.0 - static_cast<double>(i);
    for (std::size_t i = 0; i < 100; ++i) rel[i] = i % 20 < 11;  // 55 in the top 100
    const ScoredRanking ranking(ids, scores, rel);
    CHECK(precision_at(ranking, 100) == doctest::Approx(0.55));
    std::vector<bool> top(12, true);
    const auto ids12 = oracle::make_ids(12);
    std::vector<double> s12(12, 0.0);
    CHECK(precision_at(ScoredRanking(ids12, s12, top), 10) == 1.0);
    // Short list: missing slots count as non-relevant.
    const auto ids3 = oracle::make_ids(3);
    CHECK(precision_at(ScoredRanking(ids3, std::vector<double>{3, 2, 1}, {true, true, true}), 10) == doctest::Approx(0.3));
  }

  TEST_CASE("ties are broken by ascending id") {
    const std::vector<std::string> ids = {"c", "a", "b"};
    const ScoredRanking r(ids, std::vector<double>{1, 1, 1}, {false, true, false});
    REQUIRE(r.size() == 3);
    CHECK(r.items()[0].video_id == "a");
    CHECK(r.items()[1].video_id == "b");
    CHECK(r.items()[2].video_id == "c");
  }

  TEST_CASE("ranking rejects repeated ids and non-finite scores") {
    const std::vector<std::string> dup = {"a", "a"};
    CHECK_THROWS_AS(ScoredRanking(dup, std::vector<double>{1, 2}, {true, false}), DataError);
    const std::vector<std::string> ids = {"a", "b"};
    CHECK_THROWS_AS(ScoredRanking(ids, std::vector<double>{1, std::nan("")}, {true, false}), DataError);
  }

  TEST_CASE("metrics match the brute-force oracle on random instances") {
    std::mt19937_64 gen(7);
    for (int t = 0; t < 500; ++t) {
      const std::size_t n = 1 + gen() % 20;
      const auto ids = oracle::make_ids(n);
      std::vector<double> scores(n);
      std::vector<bool> rel(n);
      bool any = false;
      for (std::size_t i = 0; i < n; ++i) {
        scores[i] = static_cast<double>(gen() % 5);  // many ties
        rel[i] = gen() % 3 == 0;
        any = any || rel[i];
      }
      if (!any) rel[gen() % n] = true;
      const auto order = oracle::relevance_in_order(ids, scores, rel);
      const EvalReport rep = evaluate(ids, scores, rel);
      CHECK(std::abs(rep.ap - oracle::average_precision(order)) < 1e-12);
      CHECK(std::abs(rep.p10 - oracle::precision_at(order, 10)) < 1e-12);
      CHECK(std::abs(rep.p100 - oracle::precision_at(order, 100)) < 1e-12);
      const APEvaluator fast(ids, rel);
      CHECK(std::abs(fast(scores) - rep.ap) < 1e-12);
    }
  }

  TEST_CASE("AP is invariant under strictly increasing transforms") {
    std::mt19937_64 gen(11);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 50; ++t) {
      const std::size_t n = 30;
      const auto ids = oracle::make_ids(n);
      std::vector<double> s(n), e(n), a(n);
      std::vector<bool> rel(n);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = nd(gen);
        e[i] = std::exp(s[i]);
        a[i] = 3.0 * s[i] + 7.0;
        rel[i] = i % 4 == 0;
      }
      const auto r0 = evaluate(ids, s, rel), r1 = evaluate(ids, e, rel), r2 = evaluate(ids, a, rel);
      CHECK(r0.ap == r1.ap);
      CHECK(r0.ap == r2.ap);
      CHECK(r0.p10 == r1.p10);
      CHECK(r0.p100 == r2.p100);
    }
  }

  TEST_CASE("report JSON round-trips") {
    const auto ids = oracle::make_ids(5);
    const EvalReport r = evaluate(ids, std::vector<double>{0.1, 0.9, 0.3, 0.2, 0.5}, {true, false, true, false, false}, "run-x");
    const EvalReport back = report_from_json(to_json(r));
    CHECK(back.ap == r.ap);
    CHECK(back.p10 == r.p10);
    CHECK(back.p100 == r.p100);
    CHECK(back.num_positives == 2);
    CHECK(back.run_id == "run-x");
  }

  TEST_CASE("result table sorts by test value and re-parses") {
    ResultTable t;
    t.columns = {"avg", "learn"};
    t.rows = {{"low", {0.5, 0.6}, {0.1, 0.2}}, {"high", {0.4, 0.7}, {0.25, 0.3}}};
    const std::string text = emit_table(t);
    const ResultTable back = parse_table(text);
    REQUIRE(back.rows.size() == 2);
    CHECK(back.rows[0].label == "high");
    CHECK(back.rows[0].test[1] == doctest::Approx(0.3));
    CHECK(back.rows[1].val[0] == doctest::Approx(0.5));
    CHECK(text.find("*0.700") != std::string::npos);
    CHECK(back.columns == t.columns);

    ResultTable one;
    one.columns = {"fused"};
    one.rows = {{"only", {0.123456}, {std::numeric_limits<double>::quiet_NaN()}}};
    const ResultTable b1 = parse_table(emit_table(one));
    REQUIRE(b1.rows.size() == 1);
    CHECK(b1.rows[0].val[0] == doctest::Approx(0.123));
    CHECK(std::isnan(b1.rows[0].test[0]));
  }
}
