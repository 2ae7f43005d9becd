#include "doctest.h"
#include "small_corpus.hpp"
#include "vfuse/error.hpp"
#include "vfuse/experiment.hpp"

using namespace vfuse;

namespace {

ExperimentSettings small_settings() {
  ExperimentSettings s;
  s.seed = 7;
  s.train.iterations = 3;
  s.train.epochs = 10;
  s.train.pool_size = 100;
  s.train.lambda_grid = {1e-2, 1e-1};
  s.window = 3;
  return s;
}

const SyntheticCorpus& corpus() {
  static const SyntheticCorpus c = generate(testcfg::small(3));
  return c;
}

}  // namespace

TEST_SUITE("experiment") {
  TEST_CASE("feature presets") {
    CHECK(table3_rows().size() == 13);
    CHECK(feature_preset("table3-row1").size() == 8);
    CHECK(feature_preset("table3-row4").size() == 14);
    CHECK_THROWS_AS(feature_preset("table3-row14"), ConfigError);
    CHECK_THROWS_AS(feature_preset("row1"), ConfigError);
  }

  TEST_CASE("one holistic classifier fused alone keeps its own ranking") {
    Experiment e(small_settings(), corpus());
    RunSpec spec;
    spec.name = "single";
    spec.features = {"img_v"};
    spec.holistic_fusion = FusionMode::avg;
    const RunResult r = e.run(spec);
    REQUIRE(r.keys.size() == 1);
    const KeyScores& ks = e.scores(r.keys[0]);
    CHECK(r.test.ap == evaluate(e.test_ids(), ks.test, e.violence_labels(e.test_ids())).ap);
    CHECK(r.val.ap == evaluate(e.val_ids(), ks.val, e.violence_labels(e.val_ids())).ap);
  }

  TEST_CASE("learned fusion is at least as good as averaging on val") {
    Experiment e(small_settings(), corpus());
    RunSpec spec;
    spec.features = {"img_f", "img_v", "aud_b", "aud_fv"};
    for (SubclassMode mode : {SubclassMode::none, SubclassMode::learn}) {
      spec.subclass_mode = mode;
      spec.holistic_fusion = FusionMode::learn;
      const RunResult learned = e.run(spec);
      RunSpec avg = spec;
      avg.subclass_mode = mode == SubclassMode::none ? SubclassMode::none : SubclassMode::avg;
      avg.holistic_fusion = FusionMode::avg;
      const RunResult averaged = e.run(avg);
      CHECK(learned.val.ap >= averaged.val.ap);
      CHECK(learned.fusion.val_ap_achieved == learned.val.ap);
    }
  }

  TEST_CASE("scores are z-normalized on val") {
    Experiment e(small_settings(), corpus());
    const KeyScores& ks = e.scores({"aud_b", "a"});
    double mean = 0.0, var = 0.0;
    for (double v : ks.val) mean += v;
    mean /= static_cast<double>(ks.val.size());
    for (double v : ks.val) var += (v - mean) * (v - mean);
    var /= static_cast<double>(ks.val.size());
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(var == doctest::Approx(1.0));
  }

  TEST_CASE("training is reproducible across instances and worker counts") {
    ExperimentSettings one = small_settings(), two = small_settings();
    two.workers = 2;
    Experiment a(one, corpus()), b(two, corpus());
    const std::vector<ClassifierKey> keys = {{"img_v", "a"}, {"img_v", "b"}, {"aud_b", "violence"}};
    a.train(keys);
    b.train(keys);
    for (const auto& k : keys) CHECK(format_model(a.model(k)) == format_model(b.model(k)));
  }

  TEST_CASE("score matrix file round-trips") {
    Experiment e(small_settings(), corpus());
    const ScoreMatrix m = e.score_matrix({{"img_v", "violence"}, {"img_f", "c"}}, Split::test);
    const std::string text = format_score_matrix(m);
    const ScoreMatrix back = parse_score_matrix(text);
    CHECK(back.columns == m.columns);
    CHECK(back.video_ids == m.video_ids);
    CHECK(back.values.data() == m.values.data());
    CHECK(format_score_matrix(back) == text);
    CHECK_THROWS_AS(parse_score_matrix("id\tf/c\n"), DataError);
  }

  TEST_CASE("run configuration JSON") {
    ExperimentSettings s;
    apply_json(nlohmann::json{{"seed", 5}, {"window", 3}, {"train", {{"iterations", 4}}}}, s);
    CHECK(s.seed == 5);
    CHECK(s.window == 3);
    CHECK(s.train.iterations == 4);
    CHECK_THROWS_AS(apply_json(nlohmann::json{{"window", 4}}, s), ConfigError);
    CHECK_THROWS_AS(apply_json(nlohmann::json{{"seed", "x"}}, s), ConfigError);
    RunSpec spec;
    apply_json(nlohmann::json{{"features", "table3-row8"}, {"subclass_mode", "learn"}}, spec);
    CHECK(spec.features.size() == 6);
    CHECK(spec.fusion_mode() == FusionMode::learn);
    CHECK_THROWS_AS(apply_json(nlohmann::json{{"subclass_mode", "maybe"}}, spec), ConfigError);
  }
}
