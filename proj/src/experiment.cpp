#include "vfuse/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <set>
#include <thread>

#include "vfuse/error.hpp"
#include "vfuse/random.hpp"
#include "vfuse/synth.hpp"
#include "vfuse/textio.hpp"

namespace vfuse {

using nlohmann::json;

void ExperimentSettings::validate() const {
  train.validate();
  if (window < 1 || window % 2 == 0) throw ConfigError("window must be a positive odd integer");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  if (max_codebook_sample < 1) throw ConfigError("max_codebook_sample must be positive");
}

FusionMode RunSpec::fusion_mode() const {
  switch (subclass_mode) {
    case SubclassMode::none: return holistic_fusion;
    case SubclassMode::avg: return FusionMode::avg;
    case SubclassMode::learn: return FusionMode::learn;
  }
  return FusionMode::avg;
}

void RunSpec::validate() const {
  if (features.empty()) throw ConfigError("run " + name + ": empty feature subset");
  fusion.validate();
}

const std::vector<std::vector<std::string>>& table3_rows() {
  static const std::vector<std::vector<std::string>> rows = [] {
    const std::vector<std::string> image = {"vnet_f", "vnet_v", "gnet_f", "gnet_v", "g4k_f", "g4k_v"};
    auto with = [&](std::vector<std::string> base, std::initializer_list<const char*> extra) {
      for (const char* e : extra) base.emplace_back(e);
      return base;
    };
    return std::vector<std::vector<std::string>>{
        with(image, {"mfcc_b", "mfcc_fv"}),
        {"g4k_f", "g4k_v", "mfcc_b", "mfcc_fv", "mbh_b", "hog_b", "hof_b"},
        {"g4k_f", "g4k_v", "mfcc_b", "mfcc_fv"},
        with(image, {"mfcc_b", "mfcc_fv", "mbh_b", "mbh_fv", "hog_b", "hog_fv", "hof_b", "hof_fv"}),
        with(image, {"mfcc_b", "mbh_b", "hog_b", "hof_b"}),
        with(image, {"mbh_b", "hog_b", "hof_b"}),
        with(image, {"mfcc_b"}),
        image,
        with(image, {"mbh_b", "mbh_fv", "hog_b", "hog_fv", "hof_b", "hof_fv"}),
        with(image, {"mbh_fv", "hog_fv", "hof_fv"}),
        {"mfcc_b", "mfcc_fv", "mbh_b", "mbh_fv", "hog_b", "hog_fv", "hof_b", "hof_fv"},
        {"mfcc_b", "mfcc_fv"},
        {"mbh_b", "mbh_fv", "hog_b", "hog_fv", "hof_b", "hof_fv"},
    };
  }();
  return rows;
}

std::vector<std::string> feature_preset(const std::string& name) {
  const std::string prefix = "table3-row";
  if (name.rfind(prefix, 0) == 0) {
    const std::string num = name.substr(prefix.size());
    if (!num.empty() && num.size() <= 2 && std::all_of(num.begin(), num.end(), ::isdigit)) {
      const int row = std::stoi(num);
      if (row >= 1 && row <= static_cast<int>(table3_rows().size())) return table3_rows()[row - 1];
    }
  }
  throw ConfigError("unknown feature preset '" + name + "'");
}

// ---------------------------------------------------------------------------

namespace {

template <typename F>
void guarded(const std::string& context, F&& f) {
  try {
    f();
  } catch (const json::exception& e) {
    throw ConfigError(context + ": " + e.what());
  }
}

void require_object(const json& j, const std::string& context) {
  if (!j.is_object()) throw ConfigError(context + ": expected a JSON object");
}

}  // namespace

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  require_object(j, "train config");
  guarded("train config", [&] {
    for (const auto& [key, v] : j.items()) {
      if (key == "iterations") c.iterations = v.get<int>();
      else if (key == "pool_size") c.pool_size = v.get<std::size_t>();
      else if (key == "selected_per_iter") c.selected_per_iter = v.get<std::size_t>();
      else if (key == "lambda_grid") c.lambda_grid = v.get<std::vector<double>>();
      else if (key == "epochs") c.epochs = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else throw ConfigError("train config: unknown key '" + key + "'");
    }
  });
  c.validate();
  return c;
}

FusionConfig fusion_config_from_json(const json& j, FusionConfig c) {
  require_object(j, "fusion config");
  guarded("fusion config", [&] {
    for (const auto& [key, v] : j.items()) {
      if (key == "weight_grid") c.weight_grid = v.get<std::vector<double>>();
      else if (key == "max_rounds") c.max_rounds = v.get<int>();
      else if (key == "tolerance") c.tolerance = v.get<double>();
      else if (key == "init_weight") c.init_weight = v.get<double>();
      else throw ConfigError("fusion config: unknown key '" + key + "'");
    }
  });
  c.validate();
  return c;
}

void apply_json(const json& j, ExperimentSettings& s) {
  require_object(j, "config");
  guarded("config", [&] {
    if (j.contains("corpus")) s.corpus_dir = j.at("corpus").get<std::string>();
    if (j.contains("train")) s.train = train_config_from_json(j.at("train"), s.train);
    if (j.contains("window")) s.window = j.at("window").get<int>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("workers")) s.workers = j.at("workers").get<std::size_t>();
    if (j.contains("max_codebook_sample")) s.max_codebook_sample = j.at("max_codebook_sample").get<std::size_t>();
  });
  s.validate();
}

void apply_json(const json& j, RunSpec& r) {
  require_object(j, "run");
  guarded("run", [&] {
    if (j.contains("name")) r.name = j.at("name").get<std::string>();
    if (j.contains("features")) {
      const auto& f = j.at("features");
      r.features = f.is_string() ? feature_preset(f.get<std::string>()) : f.get<std::vector<std::string>>();
    }
    if (j.contains("subclass_mode")) r.subclass_mode = parse_subclass_mode(j.at("subclass_mode").get<std::string>());
    if (j.contains("holistic_fusion")) r.holistic_fusion = parse_fusion_mode(j.at("holistic_fusion").get<std::string>());
    if (j.contains("include_holistic")) r.include_holistic = j.at("include_holistic").get<bool>();
    if (j.contains("fusion")) r.fusion = fusion_config_from_json(j.at("fusion"), r.fusion);
  });
}

json to_json(const ExperimentSettings& s) {
  return json{{"corpus", s.corpus_dir.string()},
              {"train",
               {{"iterations", s.train.iterations},
                {"pool_size", s.train.pool_size},
                {"selected_per_iter", s.train.selected_per_iter},
                {"lambda_grid", s.train.lambda_grid},
                {"epochs", s.train.epochs}}},
              {"window", s.window},
              {"seed", s.seed},
              {"max_codebook_sample", s.max_codebook_sample}};
}

json to_json(const RunSpec& r) {
  return json{{"name", r.name},
              {"features", r.features},
              {"subclass_mode", std::string(to_string(r.subclass_mode))},
              {"holistic_fusion", std::string(to_string(r.holistic_fusion))},
              {"include_holistic", r.include_holistic},
              {"fusion",
               {{"weight_grid", r.fusion.weight_grid},
                {"max_rounds", r.fusion.max_rounds},
                {"tolerance", r.fusion.tolerance},
                {"init_weight", r.fusion.init_weight}}}};
}

json to_json(const RunResult& r) {
  json weights = json::array();
  for (const auto& e : r.fusion.entries) weights.push_back({{"key", e.key.str()}, {"weight", e.weight}});
  auto summary = [](const EvalReport& e) {
    return json{{"ap", e.ap}, {"p10", e.p10}, {"p100", e.p100}, {"num_positives", e.num_positives}};
  };
  return json{{"spec", to_json(r.spec)},
              {"fusion_mode", std::string(to_string(r.fusion.mode))},
              {"weights", weights},
              {"val_ap_achieved", r.fusion.val_ap_achieved},
              {"accepted_aps", r.trace.accepted_aps},
              {"rounds", r.trace.rounds},
              {"val", summary(r.val)},
              {"test", summary(r.test)}};
}

// ---------------------------------------------------------------------------

namespace {

// Per-video scores from a table: the video row, or the smoothed maximum over frames.
std::vector<double> table_video_scores(const FeatureTable& table, const EnsembleModel& model,
                                       const std::vector<std::string>& ids, int window,
                                       const std::map<std::string, const VideoRecord*, std::less<>>& videos) {
  std::vector<double> out;
  out.reserve(ids.size());
  const bool frame = table.spec().level == Level::frame;
  std::vector<RowView> rows;
  for (const auto& id : ids) {
    const auto idx = table.rows_for_video(id);
    if (idx.empty()) throw DataError("feature " + table.spec().name + ": no rows for video " + id);
    rows.clear();
    for (std::size_t i : idx) rows.push_back(table.row(i));
    const auto s = score_rows(model, rows);
    if (!frame) {
      out.push_back(s.front());
      continue;
    }
    FrameScoreSeries series;
    series.video_id = id;
    series.scores = s;
    const VideoRecord* v = nullptr;
    if (auto it = videos.find(id); it != videos.end()) v = it->second;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const long f = table.key(idx[k]).frame;
      const bool timed = v && static_cast<std::size_t>(f) < v->frame_times.size();
      series.times.push_back(timed ? v->frame_times[static_cast<std::size_t>(f)] : static_cast<double>(f));
    }
    out.push_back(video_score(series, window));
  }
  return out;
}

}  // namespace

Experiment::Experiment(ExperimentSettings settings) : settings_(std::move(settings)) {
  settings_.validate();
  corpus_ = load_corpus(settings_.corpus_dir);
  if (!corpus_.split) throw DataError(settings_.corpus_dir.string() + ": no splits.tsv");
  catalog_ = load_catalog(settings_.corpus_dir);
  init_ids();
}

Experiment::Experiment(ExperimentSettings settings, const SyntheticCorpus& synthetic)
    : settings_(std::move(settings)),
      corpus_(synthetic.corpus),
      catalog_(synthetic.catalog),
      descriptors_(synthetic.descriptors),
      features_(synthetic.features) {
  settings_.validate();
  if (!corpus_.split) throw DataError("synthetic corpus has no split");
  init_ids();
}

void Experiment::init_ids() {
  train_ids_ = corpus_.split->train_ids;
  val_ids_ = corpus_.split->val_ids;
  test_ids_ = corpus_.ids(Split::test);
}

std::vector<std::string> Experiment::feature_names() const {
  std::vector<std::string> out;
  for (const auto& r : catalog_) out.push_back(r.spec.name);
  return out;
}

const FeatureRecipe& Experiment::recipe(const std::string& feature) const {
  for (const auto& r : catalog_) {
    if (r.spec.name == feature) return r;
  }
  throw ConfigError("unknown feature '" + feature + "'");
}

const std::variant<Codebook, GmmModel>& Experiment::codebook(const std::string& feature) {
  if (auto it = codebooks_.find(feature); it != codebooks_.end()) return it->second;
  const FeatureRecipe& r = recipe(feature);
  if (r.spec.encoding != Encoding::bow && r.spec.encoding != Encoding::fv) {
    throw ConfigError("feature " + feature + " has no codebook");
  }
  auto dit = descriptors_.find(r.source);
  if (dit == descriptors_.end()) {
    dit = descriptors_.emplace(r.source, load_descriptors(settings_.corpus_dir / r.file())).first;
  }
  const DescriptorSet& set = dit->second;
  validate_dims(r.spec, r.components, set.descriptor_dim);
  const RowMatrix sample = sample_descriptors(set, train_ids_, settings_.max_codebook_sample,
                                              derive_seed(settings_.seed, "codebook/sample/" + feature));
  const std::uint64_t seed = derive_seed(settings_.seed, "codebook/init/" + feature);
  std::variant<Codebook, GmmModel> cb;
  if (r.spec.encoding == Encoding::bow) cb = fit_codebook(sample, r.components, seed);
  else cb = fit_gmm(sample, r.components, seed);
  return codebooks_.emplace(feature, std::move(cb)).first->second;
}

const FeatureTable& Experiment::feature(const std::string& feature) {
  if (auto it = features_.find(feature); it != features_.end()) return it->second;
  const FeatureRecipe& r = recipe(feature);
  if (r.spec.encoding == Encoding::raw || r.spec.encoding == Encoding::avgpool) {
    return features_.emplace(feature, load_features(settings_.corpus_dir / r.file(), r.spec)).first->second;
  }
  const auto& cb = codebook(feature);
  const DescriptorSet& set = descriptors_.at(r.source);
  FeatureTable table(r.spec);
  std::vector<std::string> ids;
  for (const auto& v : corpus_.videos) ids.push_back(v.id);
  std::sort(ids.begin(), ids.end());
  for (const auto& id : ids) {
    auto it = set.per_video.find(id);
    if (it == set.per_video.end()) throw DataError("descriptors " + r.source + ": no entry for video " + id);
    if (const auto* c = std::get_if<Codebook>(&cb)) table.add({id, -1}, encode_bow(it->second, *c));
    else table.add({id, -1}, encode_fv(it->second, std::get<GmmModel>(cb)));
  }
  return features_.emplace(feature, std::move(table)).first->second;
}

EnsembleModel Experiment::train_key(const ClassifierKey& key) {
  const FeatureTable& table = features_.at(key.feature);
  if (key.class_name != kViolenceClass && !corpus_.vocab.index_of(key.class_name)) {
    throw ConfigError("unknown class '" + key.class_name + "'");
  }
  std::vector<RowView> positives, pool;
  for (const auto& id : train_ids_) {
    auto& dst = corpus_.labels.has(id, key.class_name) ? positives : pool;
    for (std::size_t i : table.rows_for_video(id)) dst.push_back(table.row(i));
  }
  if (positives.empty()) throw DegenerateLabelsError("train " + key.str() + ": no positive training videos");

  std::map<std::string, const VideoRecord*, std::less<>> videos;
  for (const auto& v : corpus_.videos) videos.emplace(v.id, &v);
  std::vector<bool> val_labels;
  for (const auto& id : val_ids_) val_labels.push_back(corpus_.labels.has(id, key.class_name));
  HeldOutScorer held_out;
  std::unique_ptr<APEvaluator> ap;
  if (std::count(val_labels.begin(), val_labels.end(), true) > 0) {
    ap = std::make_unique<APEvaluator>(val_ids_, val_labels);
    held_out = [&](const EnsembleModel& m) {
      return (*ap)(table_video_scores(table, m, val_ids_, settings_.window, videos));
    };
  }
  TrainConfig config = settings_.train;
  config.seed = derive_seed(settings_.seed, "train/" + key.str());
  try {
    return negative_bootstrap(positives, pool, config, key, held_out);
  } catch (const DataError& e) {
    throw DataError("train " + key.str() + ": " + e.what());
  }
}

const EnsembleModel& Experiment::model(const ClassifierKey& key) {
  train({key});
  return models_.at(key);
}

void Experiment::set_model(EnsembleModel model) {
  model.validate();
  const FeatureTable& table = feature(model.key.feature);
  if (model.dim() != table.spec().dim) throw DataError("model " + model.key.str() + ": dimension differs from feature");
  scores_.erase(model.key);
  const ClassifierKey key = model.key;
  models_.insert_or_assign(key, std::move(model));
}

void Experiment::train(const std::vector<ClassifierKey>& keys) {
  std::vector<ClassifierKey> todo;
  std::set<ClassifierKey> seen;
  for (const auto& k : keys) {
    if (models_.count(k) || !seen.insert(k).second) continue;
    feature(k.feature);
    todo.push_back(k);
  }
  if (todo.empty()) return;
  std::vector<std::optional<EnsembleModel>> results(todo.size());
  std::vector<std::exception_ptr> errors(todo.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < todo.size(); i = next++) {
      try {
        results[i] = train_key(todo[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min(settings_.workers, todo.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (std::size_t i = 0; i < todo.size(); ++i) models_.emplace(todo[i], std::move(*results[i]));
}

std::vector<double> Experiment::video_scores(const ClassifierKey& key, const std::vector<std::string>& ids) {
  const EnsembleModel& m = model(key);
  std::map<std::string, const VideoRecord*, std::less<>> videos;
  for (const auto& v : corpus_.videos) videos.emplace(v.id, &v);
  return table_video_scores(feature(key.feature), m, ids, settings_.window, videos);
}

const KeyScores& Experiment::scores(const ClassifierKey& key) {
  if (auto it = scores_.find(key); it != scores_.end()) return it->second;
  const auto val = video_scores(key, val_ids_);
  const auto test = video_scores(key, test_ids_);
  const ScoreNormalizer n = ScoreNormalizer::fit(val);
  return scores_.emplace(key, KeyScores{n.apply(val), n.apply(test)}).first->second;
}

ScoreMatrix Experiment::score_matrix(const std::vector<ClassifierKey>& keys, Split split) {
  train(keys);
  ScoreMatrix m;
  m.video_ids = split == Split::dev ? val_ids_ : test_ids_;
  m.columns = keys;
  m.values = RowMatrix(m.video_ids.size(), keys.size());
  for (std::size_t c = 0; c < keys.size(); ++c) {
    const KeyScores& s = scores(keys[c]);
    const auto& col = split == Split::dev ? s.val : s.test;
    for (std::size_t r = 0; r < col.size(); ++r) m.values.row(r)[c] = col[r];
  }
  return m;
}

std::vector<bool> Experiment::violence_labels(const std::vector<std::string>& ids) const {
  std::vector<bool> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(corpus_.labels.violence(id));
  return out;
}

RunResult Experiment::run(const RunSpec& spec) {
  spec.validate();
  RunResult result;
  result.spec = spec;
  result.keys = assemble_bank(spec.features, feature_names(), spec.subclass_mode, corpus_.vocab, spec.include_holistic);
  const ScoreMatrix val = score_matrix(result.keys, Split::dev);
  const ScoreMatrix test = score_matrix(result.keys, Split::test);
  const auto val_labels = violence_labels(val_ids_);
  if (spec.fusion_mode() == FusionMode::learn) {
    result.fusion = learn_weights(val, val_labels, spec.fusion, &result.trace);
  } else {
    result.fusion = average_fusion(result.keys);
    result.fusion.val_ap_achieved = evaluate(val.video_ids, fuse_scores(result.fusion, val), val_labels).ap;
  }
  result.val = evaluate(val.video_ids, fuse_scores(result.fusion, val), val_labels, spec.name + "/val");
  result.test = evaluate(test.video_ids, fuse_scores(result.fusion, test), violence_labels(test_ids_), spec.name + "/test");
  return result;
}

RunResult run_experiment(const RunConfig& config) {
  Experiment e(config.settings);
  return e.run(config.spec);
}

// ---------------------------------------------------------------------------

std::string format_score_matrix(const ScoreMatrix& scores) {
  scores.validate();
  std::string out = "video_id";
  for (const auto& c : scores.columns) out += "\t" + c.str();
  out += "\n";
  for (std::size_t r = 0; r < scores.video_ids.size(); ++r) {
    out += scores.video_ids[r];
    for (double v : scores.values.row(r)) out += "\t" + textio::format_real(v);
    out += "\n";
  }
  return out;
}

ScoreMatrix parse_score_matrix(std::string_view text) {
  const auto ls = textio::lines(text);
  if (ls.empty()) throw DataError("score matrix: empty file");
  const auto header = textio::split(ls[0], '\t');
  if (header.empty() || header[0] != "video_id") throw DataError("score matrix: header must start with video_id");
  ScoreMatrix m;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const auto slash = header[c].find('/');
    if (slash == std::string_view::npos) throw DataError("score matrix: column '" + std::string(header[c]) + "' is not feature/class");
    m.columns.push_back({std::string(header[c].substr(0, slash)), std::string(header[c].substr(slash + 1))});
  }
  m.values = RowMatrix(m.columns.size());
  std::vector<double> row(m.columns.size());
  for (std::size_t i = 1; i < ls.size(); ++i) {
    if (textio::trim(ls[i]).empty()) continue;
    const auto cols = textio::split(ls[i], '\t');
    if (cols.size() != header.size()) throw DataError("score matrix: wrong column count at line " + std::to_string(i + 1));
    m.video_ids.emplace_back(cols[0]);
    for (std::size_t c = 1; c < cols.size(); ++c) row[c - 1] = textio::parse_real(cols[c], "score matrix");
    m.values.append(row);
  }
  m.validate();
  return m;
}

}  // namespace vfuse
