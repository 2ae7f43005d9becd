#pragma once

// End-to-end runs over a corpus directory: encode features, train the
// classifier bank on the train split, normalize and fuse scores on val, and
// evaluate on val and test.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "vfuse/corpus.hpp"
#include "vfuse/encode.hpp"
#include "vfuse/fuse.hpp"
#include "vfuse/learn.hpp"
#include "vfuse/metrics.hpp"
#include "vfuse/synth.hpp"
#include "vfuse/temporal.hpp"

namespace vfuse {

// Settings shared by every run over one corpus; trained models are cached per key under them.
struct ExperimentSettings {
  std::filesystem::path corpus_dir;
  TrainConfig train;
  int window = kDefaultWindow;
  std::uint64_t seed = 42;
  std::size_t workers = 1;
  std::size_t max_codebook_sample = 500000;

  void validate() const;
};

struct RunSpec {
  std::string name;
  std::vector<std::string> features;
  SubclassMode subclass_mode = SubclassMode::none;
  // Fusion of the holistic bank when subclass_mode is none.
  FusionMode holistic_fusion = FusionMode::learn;
  // Adds the holistic violence classifier to a subclass bank.
  bool include_holistic = false;
  FusionConfig fusion;

  FusionMode fusion_mode() const;
  void validate() const;
};

struct RunConfig {
  ExperimentSettings settings;
  RunSpec spec;
};

// Feature subsets of the thirteen fusion settings, rows 1..13.
const std::vector<std::vector<std::string>>& table3_rows();
// "table3-row<N>" -> that row's features; throws ConfigError otherwise.
std::vector<std::string> feature_preset(const std::string& name);

// Reads `train`, `fusion`, `window`, `seed`, `workers`, `max_codebook_sample`
// and `corpus` into settings, and `name`, `features` (a list or a preset name),
// `subclass_mode`, `holistic_fusion`, `include_holistic` into the spec.
// Each reads only its own keys, so one object can carry both; absent keys keep
// the given values and malformed values throw ConfigError.
void apply_json(const nlohmann::json& j, ExperimentSettings& settings);
void apply_json(const nlohmann::json& j, RunSpec& spec);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
FusionConfig fusion_config_from_json(const nlohmann::json& j, FusionConfig base = {});
nlohmann::json to_json(const ExperimentSettings& settings);
nlohmann::json to_json(const RunSpec& spec);

struct RunResult {
  RunSpec spec;
  std::vector<ClassifierKey> keys;
  FusionModel fusion;
  CoordinateAscentTrace trace;  // empty for average fusion
  EvalReport val;
  EvalReport test;
};

nlohmann::json to_json(const RunResult& result);

// Per-key scores on the val and test videos, z-normalized with val statistics.
struct KeyScores {
  std::vector<double> val;
  std::vector<double> test;
};

class Experiment {
 public:
  explicit Experiment(ExperimentSettings settings);
  // Works on a generated corpus held in memory; settings.corpus_dir is ignored.
  Experiment(ExperimentSettings settings, const SyntheticCorpus& synthetic);

  const ExperimentSettings& settings() const { return settings_; }
  const Corpus& corpus() const { return corpus_; }
  const std::vector<FeatureRecipe>& catalog() const { return catalog_; }
  std::vector<std::string> feature_names() const;
  const FeatureRecipe& recipe(const std::string& feature) const;
  const std::vector<std::string>& val_ids() const { return val_ids_; }
  const std::vector<std::string>& test_ids() const { return test_ids_; }

  // bow: Codebook; fv: GmmModel. Fitted on train-split descriptors on first use.
  const std::variant<Codebook, GmmModel>& codebook(const std::string& feature);
  // Loaded (raw/avgpool) or encoded (bow/fv) table for every video.
  const FeatureTable& feature(const std::string& feature);

  // Negative Bootstrap ensemble for a key, trained on first use.
  const EnsembleModel& model(const ClassifierKey& key);
  void set_model(EnsembleModel model);
  // Trains all missing keys, in parallel over `workers` threads.
  void train(const std::vector<ClassifierKey>& keys);

  // Raw video-level scores (frame-level features: smoothed maximum).
  std::vector<double> video_scores(const ClassifierKey& key, const std::vector<std::string>& ids);
  const KeyScores& scores(const ClassifierKey& key);
  ScoreMatrix score_matrix(const std::vector<ClassifierKey>& keys, Split split);

  std::vector<bool> violence_labels(const std::vector<std::string>& ids) const;

  RunResult run(const RunSpec& spec);

 private:
  EnsembleModel train_key(const ClassifierKey& key);

  void init_ids();

  ExperimentSettings settings_;
  Corpus corpus_;
  std::vector<FeatureRecipe> catalog_;
  std::vector<std::string> train_ids_;
  std::vector<std::string> val_ids_;
  std::vector<std::string> test_ids_;
  std::map<std::string, DescriptorSet> descriptors_;
  std::map<std::string, std::variant<Codebook, GmmModel>> codebooks_;
  std::map<std::string, FeatureTable> features_;
  std::map<ClassifierKey, EnsembleModel> models_;
  std::map<ClassifierKey, KeyScores> scores_;
};

RunResult run_experiment(const RunConfig& config);

// Score matrix file: `video_id<TAB>feature/class ...` header, then one row per video.
std::string format_score_matrix(const ScoreMatrix& scores);
ScoreMatrix parse_score_matrix(std::string_view text);

}  // namespace vfuse
