#include "vfuse/fuse.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "vfuse/error.hpp"
#include "vfuse/metrics.hpp"
#include "vfuse/textio.hpp"

namespace vfuse {

std::string_view to_string(FusionMode m) { return m == FusionMode::avg ? "avg" : "learn"; }

std::string_view to_string(SubclassMode m) {
  switch (m) {
    case SubclassMode::none: return "none";
    case SubclassMode::avg: return "avg";
    case SubclassMode::learn: return "learn";
  }
  return "?";
}

FusionMode parse_fusion_mode(std::string_view s) {
  if (s == "avg") return FusionMode::avg;
  if (s == "learn") return FusionMode::learn;
  throw ConfigError("unknown fusion mode '" + std::string(s) + "'");
}

SubclassMode parse_subclass_mode(std::string_view s) {
  if (s == "none" || s == "w/o-subclass") return SubclassMode::none;
  if (s == "avg") return SubclassMode::avg;
  if (s == "learn") return SubclassMode::learn;
  throw ConfigError("unknown subclass mode '" + std::string(s) + "'");
}

void FusionModel::validate() const {
  if (entries.empty()) throw DataError("fusion model: no entries");
  std::set<ClassifierKey> keys;
  bool positive = false;
  for (const auto& e : entries) {
    if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) throw DataError("fusion model: weight of " + e.key.str() + " is negative");
    positive = positive || e.weight > 0.0;
    if (!keys.insert(e.key).second) throw DataError("fusion model: duplicate key " + e.key.str());
  }
  if (!positive) throw DataError("fusion model: all weights are zero");
}

std::vector<double> FusionModel::weights() const {
  std::vector<double> w;
  w.reserve(entries.size());
  for (const auto& e : entries) w.push_back(e.weight);
  return w;
}

std::vector<double> FusionConfig::default_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 20; ++i) g.push_back(i / 10.0);
  return g;
}

void FusionConfig::validate() const {
  if (weight_grid.empty()) throw ConfigError("fusion: weight grid is empty");
  for (double g : weight_grid) {
    if (!(g >= 0.0) || !std::isfinite(g)) throw ConfigError("fusion: grid values must be nonnegative");
  }
  auto on_grid = [&](double v) { return std::find(weight_grid.begin(), weight_grid.end(), v) != weight_grid.end(); };
  if (!on_grid(0.0)) throw ConfigError("fusion: weight grid must contain 0");
  if (!(init_weight > 0.0) || !on_grid(init_weight)) {
    throw ConfigError("fusion: initial weight must be positive and on the grid");
  }
  if (max_rounds < 1) throw ConfigError("fusion: max_rounds must be at least 1");
  if (!(tolerance >= 0.0)) throw ConfigError("fusion: tolerance must be nonnegative");
}

std::vector<double> ScoreMatrix::column(std::size_t c) const {
  std::vector<double> out(values.rows());
  for (std::size_t r = 0; r < values.rows(); ++r) out[r] = values.row(r)[c];
  return out;
}

void ScoreMatrix::validate() const {
  if (values.rows() != video_ids.size() || values.cols() != columns.size()) {
    throw DataError("score matrix: shape does not match ids and columns");
  }
  std::set<ClassifierKey> keys(columns.begin(), columns.end());
  if (keys.size() != columns.size()) throw DataError("score matrix: duplicate column key");
  for (double v : values.data()) {
    if (!std::isfinite(v)) throw DataError("score matrix: non-finite score");
  }
}

namespace {

// Column index of each entry, in entry order.
std::vector<std::size_t> align(const FusionModel& model, const ScoreMatrix& scores) {
  if (model.entries.size() != scores.columns.size()) {
    throw DataError("fuse: model has " + std::to_string(model.entries.size()) + " entries but matrix has " +
                    std::to_string(scores.columns.size()) + " columns");
  }
  std::map<ClassifierKey, std::size_t> col;
  for (std::size_t c = 0; c < scores.columns.size(); ++c) col.emplace(scores.columns[c], c);
  std::vector<std::size_t> idx;
  for (const auto& e : model.entries) {
    auto it = col.find(e.key);
    if (it == col.end()) throw DataError("fuse: no score column for " + e.key.str());
    idx.push_back(it->second);
  }
  return idx;
}

void fuse_into(const std::vector<double>& weights, const std::vector<std::size_t>& cols, const RowMatrix& values,
               std::vector<double>& out) {
  out.assign(values.rows(), 0.0);
  for (std::size_t r = 0; r < values.rows(); ++r) {
    auto row = values.row(r);
    double s = 0.0;
    for (std::size_t e = 0; e < cols.size(); ++e) {
      if (weights[e] != 0.0) s += weights[e] * row[cols[e]];
    }
    out[r] = s;
  }
}

}  // namespace

std::vector<double> fuse_scores(const FusionModel& model, const ScoreMatrix& scores) {
  scores.validate();
  const auto cols = align(model, scores);
  std::vector<double> out;
  fuse_into(model.weights(), cols, scores.values, out);
  return out;
}

FusionModel average_fusion(std::vector<ClassifierKey> keys) {
  if (keys.empty()) throw ConfigError("average_fusion: no classifiers");
  std::sort(keys.begin(), keys.end());
  FusionModel m;
  m.mode = FusionMode::avg;
  const double w = 1.0 / static_cast<double>(keys.size());
  for (auto& k : keys) m.entries.push_back({std::move(k), w});
  m.validate();
  return m;
}

FusionModel learn_weights(const ScoreMatrix& val_scores, const std::vector<bool>& val_labels,
                          const FusionConfig& config, CoordinateAscentTrace* trace) {
  config.validate();
  val_scores.validate();
  if (val_labels.size() != val_scores.video_ids.size()) throw DataError("learn_weights: labels do not match videos");
  const auto positives = std::count(val_labels.begin(), val_labels.end(), true);
  if (positives == 0 || positives == static_cast<long>(val_labels.size())) {
    throw DegenerateLabelsError("learn_weights: validation labels are all of one class");
  }
  if (val_scores.columns.empty()) throw ConfigError("learn_weights: no classifiers");

  std::vector<ClassifierKey> keys = val_scores.columns;
  std::sort(keys.begin(), keys.end());
  FusionModel model;
  model.mode = FusionMode::learn;
  for (const auto& k : keys) model.entries.push_back({k, config.init_weight});
  const auto cols = align(model, val_scores);
  std::vector<double> w = model.weights();

  const APEvaluator ap(val_scores.video_ids, val_labels);
  std::vector<double> fused;
  auto evaluate = [&](const std::vector<double>& weights) {
    fuse_into(weights, cols, val_scores.values, fused);
    return ap(fused);
  };

  CoordinateAscentTrace local;
  CoordinateAscentTrace& tr = trace ? *trace : local;
  tr = {};
  double current = evaluate(w);
  ++tr.evaluations;
  tr.accepted_aps.push_back(current);

  const std::size_t m = w.size();
  for (int round = 0; round < config.max_rounds; ++round) {
    ++tr.rounds;
    const double round_start = current;
    for (std::size_t i = 0; i < m; ++i) {
      bool others_positive = false;
      for (std::size_t j = 0; j < m && !others_positive; ++j) others_positive = j != i && w[j] > 0.0;
      const double keep = w[i];
      double best_value = keep;
      double best_ap = current;
      for (double g : config.weight_grid) {
        if (g == keep) continue;
        if (g == 0.0 && !others_positive) continue;
        w[i] = g;
        const double a = evaluate(w);
        ++tr.evaluations;
        if (a > best_ap) {
          best_ap = a;
          best_value = g;
        }
      }
      w[i] = best_value;
      if (best_value != keep) {
        current = best_ap;
        tr.accepted_aps.push_back(current);
      }
    }
    if (current - round_start < config.tolerance) break;
  }

  for (std::size_t i = 0; i < m; ++i) model.entries[i].weight = w[i];
  model.val_ap_achieved = current;
  model.validate();
  return model;
}

std::vector<ClassifierKey> assemble_bank(const std::vector<std::string>& features,
                                         const std::vector<std::string>& available, SubclassMode mode,
                                         const SubclassVocabulary& vocab, bool include_holistic) {
  if (features.empty()) throw ConfigError("assemble_bank: empty feature subset");
  std::vector<ClassifierKey> keys;
  std::set<std::string> seen;
  for (const auto& f : features) {
    if (std::find(available.begin(), available.end(), f) == available.end()) {
      throw ConfigError("assemble_bank: unknown feature '" + f + "'");
    }
    if (!seen.insert(f).second) throw ConfigError("assemble_bank: feature '" + f + "' listed twice");
    if (mode == SubclassMode::none || include_holistic) keys.push_back({f, std::string(kViolenceClass)});
    if (mode != SubclassMode::none) {
      if (vocab.empty()) throw ConfigError("assemble_bank: subclass mode needs a non-empty vocabulary");
      for (const auto& s : vocab.names()) keys.push_back({f, s});
    }
  }
  return keys;
}

std::string format_fusion(const FusionModel& model) {
  model.validate();
  std::string out = "#mode=" + std::string(to_string(model.mode)) + " #val_ap=" +
                    textio::format_real(model.val_ap_achieved) + "\n";
  for (const auto& e : model.entries) {
    out += e.key.feature + "\t" + e.key.class_name + "\t" + textio::format_real(e.weight) + "\n";
  }
  return out;
}

FusionModel parse_fusion(std::string_view text) {
  const auto ls = textio::lines(text);
  if (ls.empty()) throw DataError("fusion: empty file");
  const auto header = textio::parse_header(ls[0]);
  if (!header.count("mode") || !header.count("val_ap")) throw DataError("fusion: missing #mode or #val_ap header");
  FusionModel m;
  try {
    m.mode = parse_fusion_mode(header.at("mode"));
  } catch (const ConfigError& e) {
    throw DataError(std::string("fusion: ") + e.what());
  }
  m.val_ap_achieved = textio::parse_real(header.at("val_ap"), "fusion");
  for (std::size_t i = 1; i < ls.size(); ++i) {
    if (textio::trim(ls[i]).empty()) continue;
    const auto cols = textio::split(ls[i], '\t');
    if (cols.size() != 3) throw DataError("fusion: expected feature<TAB>class<TAB>weight at line " + std::to_string(i + 1));
    m.entries.push_back({{std::string(cols[0]), std::string(cols[1])}, textio::parse_real(cols[2], "fusion")});
  }
  m.validate();
  return m;
}

}  // namespace vfuse
