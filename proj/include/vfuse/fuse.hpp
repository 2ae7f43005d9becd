#pragma once

// Late fusion of normalised base-classifier scores: uniform weighting, or
// weights learned by coordinate ascent directly on validation AP.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "vfuse/corpus.hpp"
#include "vfuse/learn.hpp"
#include "vfuse/matrix.hpp"

namespace vfuse {

enum class FusionMode { avg, learn };
// none: one holistic violence classifier per feature; avg/learn: one classifier
// per feature x subclass, fused uniformly or with learned weights.
enum class SubclassMode { none, avg, learn };

std::string_view to_string(FusionMode m);
std::string_view to_string(SubclassMode m);
FusionMode parse_fusion_mode(std::string_view s);
SubclassMode parse_subclass_mode(std::string_view s);

struct FusionEntry {
  ClassifierKey key;
  double weight = 0.0;
};

struct FusionModel {
  std::vector<FusionEntry> entries;
  FusionMode mode = FusionMode::avg;
  double val_ap_achieved = 0.0;

  // Weights nonnegative, at least one positive, keys distinct.
  void validate() const;
  std::vector<double> weights() const;
};

struct FusionConfig {
  std::vector<double> weight_grid = default_grid();
  int max_rounds = 20;
  double tolerance = 1e-6;
  // Starting weight of every coordinate; must be on the grid.
  double init_weight = 0.1;

  static std::vector<double> default_grid();  // 0, 0.1, ..., 2.0
  void validate() const;
};

// Base-classifier scores: one row per video, one column per classifier.
struct ScoreMatrix {
  std::vector<std::string> video_ids;
  std::vector<ClassifierKey> columns;
  RowMatrix values;  // video_ids.size() x columns.size()

  std::vector<double> column(std::size_t c) const;
  void validate() const;
};

// fused(v) = sum_i weight_i * score_i(v), summed in entry order. Columns are
// matched to entries by key; a missing or extra column is a DataError.
std::vector<double> fuse_scores(const FusionModel& model, const ScoreMatrix& scores);

// Equal weights 1/n in sorted key order.
FusionModel average_fusion(std::vector<ClassifierKey> keys);

struct CoordinateAscentTrace {
  // Validation AP at the start and after every accepted weight change.
  std::vector<double> accepted_aps;
  std::size_t evaluations = 0;
  int rounds = 0;
};

// Starts from uniform weights and sweeps the coordinates in sorted key order;
// each coordinate takes the grid value with the highest validation AP while the
// others stay fixed (a tie keeps the current value). Stops once a full round
// gains less than the tolerance, or after max_rounds.
// Throws DegenerateLabelsError when the labels are all of one class.
FusionModel learn_weights(const ScoreMatrix& val_scores, const std::vector<bool>& val_labels,
                          const FusionConfig& config = {}, CoordinateAscentTrace* trace = nullptr);

// Classifier keys for a feature subset: (feature, violence) per feature for
// SubclassMode::none, (feature, subclass) per pair otherwise (plus the
// holistic key per feature when `include_holistic`). Throws ConfigError for a
// feature not in `available`.
std::vector<ClassifierKey> assemble_bank(const std::vector<std::string>& features,
                                         const std::vector<std::string>& available, SubclassMode mode,
                                         const SubclassVocabulary& vocab, bool include_holistic = false);

// `#mode=<avg|learn> #val_ap=<ap>` then `feature<TAB>class<TAB>weight` per entry.
std::string format_fusion(const FusionModel& model);
FusionModel parse_fusion(std::string_view text);

}  // namespace vfuse
