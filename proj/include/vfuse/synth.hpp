#pragma once

// Synthetic labeled corpora with subclass structure and a controllable
// dev/test shift in subclass occurrence.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "vfuse/corpus.hpp"
#include "vfuse/encode.hpp"

namespace vfuse {

enum class SourceKind { frame, descriptor };

// A raw signal from which one or more features are derived: per-frame vectors
// (image-like) or sets of local descriptors (audio/motion-like).
struct SourceConfig {
  std::string name;
  Modality modality = Modality::image;
  SourceKind kind = SourceKind::frame;
  std::size_t dim = 16;
  // Per subclass, in [0,1]: how strongly the subclass shows up in this source.
  std::vector<double> informativeness;
  // Descriptor sources only: descriptors per video, inclusive range.
  std::size_t descriptors_min = 20;
  std::size_t descriptors_max = 40;
  // Per-source noise level; negative uses the corpus-wide noise_sigma.
  double noise_sigma = -1.0;

  double noise(double global) const { return noise_sigma < 0.0 ? global : noise_sigma; }
};

struct PairBoost {
  std::string first;
  std::string second;
  double probability = 0.0;  // chance that `second` is switched on when `first` is
};

struct GeneratorConfig {
  std::string name = "custom";
  std::size_t num_dev = 1000;
  std::size_t num_test = 1000;
  double violence_prevalence_dev = 0.044;
  double violence_prevalence_test = 0.048;
  SubclassVocabulary vocab;
  std::vector<double> occurrence_dev;
  std::vector<double> occurrence_test;
  std::vector<SourceConfig> sources;
  std::vector<FeatureRecipe> features;
  double noise_sigma = 1.0;
  // Amplitude of a fully informative subclass prototype in frame sources.
  double signal_scale = 1.0;
  // Descriptor sources: chance that a descriptor of an active video comes from a
  // subclass centre (times informativeness), and the norm of those centres.
  double descriptor_signal_rate = 0.3;
  double descriptor_center_scale = 2.5;
  std::size_t frames_min = 8;
  std::size_t frames_max = 16;
  double frame_interval = 0.5;
  std::size_t num_movies = 50;
  // Non-violent videos that show a weakened subclass pattern (hard negatives).
  double confuser_rate = 0.0;
  double confuser_strength = 0.5;
  std::vector<PairBoost> pair_boosts;
  double split_fraction = 0.7;
  std::uint64_t seed = 0;

  // Throws ConfigError on out-of-range rates, unknown sources or inconsistent dims.
  void validate() const;
};

nlohmann::json to_json(const GeneratorConfig& config);
GeneratorConfig generator_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const FeatureRecipe& recipe);
FeatureRecipe recipe_from_json(const nlohmann::json& j);

// Feature catalog of a corpus directory: the `features` array of manifest.json.
std::vector<FeatureRecipe> load_catalog(const std::filesystem::path& corpus_dir);

// Named presets: "matched-v1" (identical dev/test occurrence), "divergent-v1"
// (shifted occurrence; audio and motion sources carry only the subclasses that
// are rare in dev and common in test) and "imbalanced-v1" (a single-subclass
// 95:5 problem with hard negatives). Throws ConfigError for other names.
GeneratorConfig preset(const std::string& name, std::uint64_t seed = 42);
std::vector<std::string> preset_names();

// Ground truth kept alongside the generated files.
struct SyntheticTruth {
  // Active segment per violent (or confuser) video: [first, last] frame indices.
  std::map<std::string, std::pair<std::size_t, std::size_t>> segments;
  std::map<std::string, std::string> confuser_subclass;
};

struct SyntheticCorpus {
  GeneratorConfig config;
  Corpus corpus;
  std::vector<FeatureRecipe> catalog;
  std::map<std::string, FeatureTable> features;      // raw and avgpool features
  std::map<std::string, DescriptorSet> descriptors;  // by source name
  SyntheticTruth truth;
};

// Deterministic per seed. Each video draws its labels and signals from its own
// random stream derived from (seed, video index).
SyntheticCorpus generate(const GeneratorConfig& config);

// Unit prototypes for a source: one per subclass, pairwise |cos| < 0.2.
RowMatrix make_prototypes(std::size_t count, std::size_t dim, std::uint64_t seed, double max_abs_cos = 0.2);

// Writes videos.tsv, annotations.tsv, vocab.txt, splits.tsv, features/*.tsv,
// descriptors/*.tsv and manifest.json (generator constants plus feature catalog).
void write_synthetic(const std::filesystem::path& dir, const SyntheticCorpus& synthetic);

}  // namespace vfuse
