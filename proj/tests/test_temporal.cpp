#include <algorithm>
#include <random>

#include "doctest.h"
#include "vfuse/error.hpp"
#include "vfuse/temporal.hpp"

using namespace vfuse;

namespace {

FrameScoreSeries series(std::vector<double> scores, std::string id = "v") {
  FrameScoreSeries s;
  s.video_id = std::move(id);
  for (std::size_t i = 0; i < scores.size(); ++i) s.times.push_back(0.5 * static_cast<double>(i));
  s.scores = std::move(scores);
  return s;
}

// Truncated centred moving average, written out directly.
std::vector<double> oracle_smooth(const std::vector<double>& x, int w) {
  const int h = w / 2, n = static_cast<int>(x.size());
  std::vector<double> out;
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    int c = 0;
    for (int j = i - h; j <= i + h; ++j) {
      if (j >= 0 && j < n) {
        s += x[j];
        ++c;
      }
    }
    out.push_back(s / c);
  }
  return out;
}

}  // namespace

TEST_SUITE("temporal") {
  TEST_CASE("window of one is the identity") {
    const auto s = series({0.3, -1.0, 2.5, 0.0});
    CHECK(smooth(s, 1).scores == s.scores);
    CHECK(video_score(s, 1) == 2.5);
  }

  TEST_CASE("edge windows average only existing frames") {
    const auto out = smooth(series({0, 3, 0}), 3).scores;
    CHECK(out[0] == doctest::Approx(1.5));
    CHECK(out[1] == doctest::Approx(1.0));
    CHECK(out[2] == doctest::Approx(1.5));
  }

  TEST_CASE("constant series is unchanged") {
    for (int w : {1, 3, 5, 7, 21}) {
      const auto out = smooth(series(std::vector<double>(9, 0.7)), w).scores;
      for (double v : out) CHECK(v == doctest::Approx(0.7).epsilon(1e-15));
    }
  }

  TEST_CASE("max response examples") {
    CHECK(max_response(series({0.1, 0.9, 0.2})) == 0.9);
    CHECK(max_response(series({-3})) == -3.0);
    CHECK_THROWS_AS(max_response(series({})), DataError);
  }

  TEST_CASE("smoothing and video score match the oracle") {
    std::mt19937_64 gen(4);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 200; ++t) {
      const std::size_t n = 1 + gen() % 30;
      const int w = 1 + 2 * static_cast<int>(gen() % 6);
      std::vector<double> x(n);
      for (double& v : x) v = nd(gen);
      const auto ref = oracle_smooth(x, w);
      const auto got = smooth(series(x), w).scores;
      REQUIRE(got.size() == ref.size());
      for (std::size_t i = 0; i < n; ++i) CHECK(got[i] == doctest::Approx(ref[i]).epsilon(1e-12));
      const double vs = video_score(series(x), w);
      CHECK(vs == doctest::Approx(*std::max_element(ref.begin(), ref.end())).epsilon(1e-12));
      CHECK(vs <= *std::max_element(x.begin(), x.end()) + 1e-12);
      std::vector<double> shifted(x);
      for (double& v : shifted) v += 4.25;
      CHECK(video_score(series(shifted), w) == doctest::Approx(vs + 4.25).epsilon(1e-12));
    }
  }

  TEST_CASE("invalid inputs") {
    CHECK_THROWS_AS(smooth(series({1, 2}), 2), ConfigError);
    CHECK_THROWS_AS(smooth(series({1, 2}), 0), ConfigError);
    auto bad = series({1, 2});
    bad.times = {1.0, 0.5};
    CHECK_THROWS_AS(bad.validate(), DataError);
    auto nan = series({1, std::nan("")});
    CHECK_THROWS_AS(nan.validate(), DataError);
  }

  TEST_CASE("frame-score file round-trips") {
    const std::vector<FrameScoreSeries> in = {series({0.25, -1e-9, 3}, "a"), series({7}, "b")};
    const std::string text = format_frame_scores(in);
    const auto back = parse_frame_scores(text);
    REQUIRE(back.size() == 2);
    CHECK(back[0].video_id == "a");
    CHECK(back[0].scores == in[0].scores);
    CHECK(back[0].times == in[0].times);
    CHECK(back[1].scores == in[1].scores);
    CHECK(format_frame_scores(back) == text);
  }
}
