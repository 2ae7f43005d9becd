// vfuse command-line tool.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vfuse/corpus.hpp"
#include "vfuse/encode.hpp"
#include "vfuse/error.hpp"
#include "vfuse/experiment.hpp"
#include "vfuse/fuse.hpp"
#include "vfuse/learn.hpp"
#include "vfuse/metrics.hpp"
#include "vfuse/synth.hpp"
#include "vfuse/textio.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vfuse;

namespace {

struct Common {
  std::uint64_t seed = 42;
  std::string config;
  std::string out = ".";
  std::size_t workers = 1;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* workers_opt = nullptr;
};

void add_common(CLI::App* cmd, Common& c) {
  c.seed_opt = cmd->add_option("--seed", c.seed, "Root seed")->capture_default_str();
  cmd->add_option("--config", c.config, "JSON configuration file");
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
  c.workers_opt = cmd->add_option("--workers", c.workers, "Worker threads")->capture_default_str();
}

json read_config(const Common& c) {
  if (c.config.empty()) return json::object();
  std::string text;
  try {
    text = textio::read_file(c.config);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  try {
    json j = json::parse(text);
    if (!j.is_object()) throw ConfigError(c.config + ": expected a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw ConfigError(c.config + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path());
  textio::write_file_atomic(path, j.dump(2) + "\n");
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  textio::write_file_atomic(path, text);
}

const std::set<std::string> kRunKeys = {"corpus", "train", "window", "seed", "workers", "max_codebook_sample",
                                        "name", "features", "subclass_mode", "holistic_fusion", "include_holistic",
                                        "fusion", "rows", "runs"};

// Settings from the config file with --corpus, --seed and --workers applied on top.
ExperimentSettings settings_from(const Common& c, const json& j, const std::string& corpus) {
  for (const auto& [key, _] : j.items()) {
    if (!kRunKeys.count(key)) throw ConfigError("config: unknown key '" + key + "'");
  }
  ExperimentSettings s;
  apply_json(j, s);
  if (!corpus.empty()) s.corpus_dir = corpus;
  if (s.corpus_dir.empty()) throw ConfigError("no corpus directory: pass --corpus or set \"corpus\"");
  if (*c.seed_opt || !j.contains("seed")) s.seed = c.seed;
  if (*c.workers_opt || !j.contains("workers")) s.workers = c.workers;
  s.validate();
  return s;
}

RunSpec spec_from(const json& j, const std::vector<std::string>& features, const std::string& mode) {
  json run = json::object();
  for (const char* k : {"name", "features", "subclass_mode", "holistic_fusion", "include_holistic", "fusion"}) {
    if (j.contains(k)) run[k] = j.at(k);
  }
  RunSpec spec;
  apply_json(run, spec);
  if (!features.empty()) {
    spec.features = features.size() == 1 && features[0].rfind("table3-row", 0) == 0 ? feature_preset(features[0]) : features;
  }
  if (!mode.empty()) spec.subclass_mode = parse_subclass_mode(mode);
  if (spec.name.empty()) spec.name = "run";
  return spec;
}

std::string model_file(const ClassifierKey& k) { return k.feature + "." + k.class_name + ".model.tsv"; }

std::string format_video_scores(const std::vector<std::string>& ids, const std::vector<double>& scores) {
  std::string out = "video_id\tscore\n";
  for (std::size_t i = 0; i < ids.size(); ++i) out += ids[i] + "\t" + textio::format_real(scores[i]) + "\n";
  return out;
}

// Reads `video_id<TAB>score` files (a one-column score matrix).
std::pair<std::vector<std::string>, std::vector<double>> parse_video_scores(const fs::path& path) {
  const ScoreMatrix m = [&] {
    const std::string text = textio::read_file(path);
    const auto ls = textio::lines(text);
    if (ls.empty()) throw DataError(path.string() + ": empty file");
    std::string fixed = "video_id\tscore/score\n";
    for (std::size_t i = 1; i < ls.size(); ++i) fixed += std::string(ls[i]) + "\n";
    return parse_score_matrix(fixed);
  }();
  return {m.video_ids, m.column(0)};
}

json occurrence_json(const Corpus& corpus) {
  const auto dev = occurrence_rates(corpus, Split::dev);
  const auto test = occurrence_rates(corpus, Split::test);
  json j;
  j["vocab"] = corpus.vocab.names();
  j["occurrence_dev"] = dev;
  j["occurrence_test"] = test;
  j["divergence"] = divergence(dev, test);
  return j;
}

// ---------------------------------------------------------------------------

int cmd_synth(const Common& c, const std::string& preset_name) {
  json j = read_config(c);
  if (!preset_name.empty()) j["preset"] = preset_name;
  if (j.empty()) throw ConfigError("synth: pass --preset or a generator --config");
  if (*c.seed_opt || !j.contains("seed")) j["seed"] = c.seed;
  const GeneratorConfig config = generator_config_from_json(j);
  const SyntheticCorpus s = generate(config);
  const fs::path out = c.out;
  write_synthetic(out / "corpus", s);
  json report = occurrence_json(s.corpus);
  report["name"] = config.name;
  report["seed"] = config.seed;
  report["num_dev"] = s.corpus.ids(Split::dev).size();
  report["num_test"] = s.corpus.ids(Split::test).size();
  std::size_t violent_dev = 0, violent_test = 0;
  for (const auto& v : s.corpus.videos) {
    if (s.corpus.labels.violence(v.id)) ++(v.split == Split::dev ? violent_dev : violent_test);
  }
  report["violent_dev"] = violent_dev;
  report["violent_test"] = violent_test;
  report["configured_divergence"] = divergence(config.occurrence_dev, config.occurrence_test);
  write_json(out / "reports" / "synth.json", report);
  std::cout << "wrote " << (out / "corpus").string() << "\n";
  return 0;
}

int cmd_fit_codebook(const Common& c, const std::string& corpus, const std::string& feature) {
  Experiment e(settings_from(c, read_config(c), corpus));
  const auto& cb = e.codebook(feature);
  const std::string text = std::holds_alternative<Codebook>(cb) ? format_codebook(std::get<Codebook>(cb))
                                                                : format_gmm(std::get<GmmModel>(cb));
  write_text(fs::path(c.out) / "models" / (feature + ".codebook.tsv"), text);
  return 0;
}

int cmd_encode(const Common& c, const std::string& corpus, const std::string& feature, const std::string& codebook) {
  Experiment e(settings_from(c, read_config(c), corpus));
  const FeatureRecipe& r = e.recipe(feature);
  FeatureTable table;
  if (!codebook.empty()) {
    if (r.spec.encoding != Encoding::bow && r.spec.encoding != Encoding::fv) {
      throw ConfigError("encode: feature " + feature + " does not use a codebook");
    }
    const std::string text = textio::read_file(codebook);
    const DescriptorSet set = load_descriptors(e.settings().corpus_dir / r.file());
    table = FeatureTable(r.spec);
    if (codebook_type(text) == "kmeans") {
      if (r.spec.encoding != Encoding::bow) throw ConfigError("encode: feature " + feature + " needs a GMM");
      const Codebook cb = parse_codebook(text);
      validate_dims(r.spec, cb);
      for (const auto& [id, m] : set.per_video) table.add({id, -1}, encode_bow(m, cb));
    } else {
      if (r.spec.encoding != Encoding::fv) throw ConfigError("encode: feature " + feature + " needs a k-means codebook");
      const GmmModel gmm = parse_gmm(text);
      validate_dims(r.spec, gmm);
      for (const auto& [id, m] : set.per_video) table.add({id, -1}, encode_fv(m, gmm));
    }
  } else {
    table = e.feature(feature);
  }
  write_text(fs::path(c.out) / "features" / (feature + ".tsv"), format_features(table));
  return 0;
}

int cmd_train(const Common& c, const std::string& corpus, const std::vector<std::string>& features,
              const std::vector<std::string>& classes) {
  const json j = read_config(c);
  Experiment e(settings_from(c, j, corpus));
  std::vector<std::string> fs_list = features;
  if (fs_list.empty()) fs_list = spec_from(j, {}, "").features;
  if (fs_list.empty()) throw ConfigError("train: no features given");
  std::vector<std::string> cls = classes;
  if (cls.empty()) cls = {std::string(kViolenceClass)};
  if (cls.size() == 1 && cls[0] == "all") {
    cls = {std::string(kViolenceClass)};
    for (const auto& n : e.corpus().vocab.names()) cls.push_back(n);
  }
  std::vector<ClassifierKey> keys;
  for (const auto& f : fs_list) {
    e.recipe(f);
    for (const auto& k : cls) keys.push_back({f, k});
  }
  e.train(keys);
  for (const auto& k : keys) write_text(fs::path(c.out) / "models" / model_file(k), format_model(e.model(k)));
  return 0;
}

int cmd_score(const Common& c, const std::string& corpus, const std::vector<std::string>& features,
              const std::string& mode, const std::string& models_dir) {
  const json j = read_config(c);
  Experiment e(settings_from(c, j, corpus));
  const RunSpec spec = spec_from(j, features, mode);
  const auto keys = assemble_bank(spec.features, e.feature_names(), spec.subclass_mode, e.corpus().vocab,
                                  spec.include_holistic);
  if (!models_dir.empty()) {
    for (const auto& k : keys) {
      const fs::path p = fs::path(models_dir) / model_file(k);
      if (fs::exists(p)) e.set_model(parse_model(textio::read_file(p)));
    }
  }
  const fs::path reports = fs::path(c.out) / "reports";
  write_text(reports / "scores_val.tsv", format_score_matrix(e.score_matrix(keys, Split::dev)));
  write_text(reports / "scores_test.tsv", format_score_matrix(e.score_matrix(keys, Split::test)));
  return 0;
}

int cmd_fuse(const Common& c, const std::string& corpus, const std::string& mode, std::string val_path,
             std::string test_path) {
  const json j = read_config(c);
  const ExperimentSettings s = settings_from(c, j, corpus);
  const Corpus cp = load_corpus(s.corpus_dir);
  const fs::path reports = fs::path(c.out) / "reports";
  if (val_path.empty()) val_path = (reports / "scores_val.tsv").string();
  if (test_path.empty()) test_path = (reports / "scores_test.tsv").string();
  const ScoreMatrix val = parse_score_matrix(textio::read_file(val_path));
  const ScoreMatrix test = parse_score_matrix(textio::read_file(test_path));
  std::vector<bool> labels;
  for (const auto& id : val.video_ids) labels.push_back(cp.labels.violence(id));
  RunSpec spec = spec_from(j, {}, "");
  FusionModel model;
  CoordinateAscentTrace trace;
  if (parse_fusion_mode(mode) == FusionMode::learn) {
    model = learn_weights(val, labels, spec.fusion, &trace);
  } else {
    model = average_fusion(val.columns);
    model.val_ap_achieved = evaluate(val.video_ids, fuse_scores(model, val), labels).ap;
  }
  write_text(fs::path(c.out) / "models" / "fusion.tsv", format_fusion(model));
  write_text(reports / "fused_val.tsv", format_video_scores(val.video_ids, fuse_scores(model, val)));
  write_text(reports / "fused_test.tsv", format_video_scores(test.video_ids, fuse_scores(model, test)));
  write_json(reports / "fusion_trace.json",
             {{"accepted_aps", trace.accepted_aps}, {"evaluations", trace.evaluations}, {"rounds", trace.rounds}});
  return 0;
}

int cmd_eval(const Common& c, const std::string& corpus, const std::string& scores, const std::string& name) {
  const json j = read_config(c);
  const ExperimentSettings s = settings_from(c, j, corpus);
  const Corpus cp = load_corpus(s.corpus_dir);
  const auto [ids, values] = parse_video_scores(scores);
  std::vector<bool> labels;
  for (const auto& id : ids) labels.push_back(cp.labels.violence(id));
  const EvalReport r = evaluate(ids, values, labels, name);
  write_json(fs::path(c.out) / "reports" / ("eval_" + name + ".json"), to_json(r));
  std::cout << name << "\tAP=" << textio::format_real(r.ap) << "\tP10=" << textio::format_real(r.p10)
            << "\tP100=" << textio::format_real(r.p100) << "\n";
  return 0;
}

const std::vector<std::pair<std::string, std::pair<SubclassMode, FusionMode>>> kTableColumns = {
    {"none-avg", {SubclassMode::none, FusionMode::avg}},
    {"none-learn", {SubclassMode::none, FusionMode::learn}},
    {"sub-avg", {SubclassMode::avg, FusionMode::avg}},
    {"sub-learn", {SubclassMode::learn, FusionMode::learn}},
};

int cmd_experiment(const Common& c, const std::string& corpus, const std::vector<int>& rows_flag) {
  const json j = read_config(c);
  Experiment e(settings_from(c, j, corpus));
  const fs::path out = c.out;
  json runs = json::array();
  ResultTable table;
  RunSpec base = spec_from(j, {}, "");

  auto record = [&](const RunResult& r) {
    runs.push_back(to_json(r));
    write_text(out / "models" / ("fusion_" + r.spec.name + ".tsv"), format_fusion(r.fusion));
  };

  if (j.contains("runs")) {
    if (!j.at("runs").is_array()) throw ConfigError("config: runs must be an array");
    table.columns = {"fused"};
    for (const auto& rj : j.at("runs")) {
      RunSpec spec = base;
      spec.name.clear();
      apply_json(rj, spec);
      if (spec.name.empty()) spec.name = "run" + std::to_string(runs.size() + 1);
      const RunResult r = e.run(spec);
      record(r);
      table.rows.push_back({spec.name, {r.val.ap}, {r.test.ap}});
    }
  } else {
    std::vector<int> rows = rows_flag;
    if (rows.empty() && j.contains("rows")) {
      try {
        rows = j.at("rows").get<std::vector<int>>();
      } catch (const json::exception& ex) {
        throw ConfigError(std::string("config: rows: ") + ex.what());
      }
    }
    if (rows.empty()) {
      for (int i = 1; i <= static_cast<int>(table3_rows().size()); ++i) rows.push_back(i);
    }
    for (const auto& col : kTableColumns) table.columns.push_back(col.first);
    for (int row : rows) {
      const std::string label = "table3-row" + std::to_string(row);
      TableRow tr{label, {}, {}};
      for (const auto& [col, modes] : kTableColumns) {
        RunSpec spec = base;
        spec.name = label + "." + col;
        spec.features = feature_preset(label);
        spec.subclass_mode = modes.first;
        spec.holistic_fusion = modes.second;
        const RunResult r = e.run(spec);
        record(r);
        tr.val.push_back(r.val.ap);
        tr.test.push_back(r.test.ap);
      }
      table.rows.push_back(std::move(tr));
    }
  }
  json report = {{"settings", to_json(e.settings())}, {"runs", runs}};
  if (!e.corpus().vocab.empty()) report["occurrence"] = occurrence_json(e.corpus());
  write_json(out / "reports" / "experiment.json", report);
  const std::string text = emit_table(table);
  write_text(out / "reports" / "table.txt", text);
  std::cout << text;
  return 0;
}

int cmd_divergence(const Common& c, const std::string& corpus) {
  const json j = read_config(c);
  const ExperimentSettings s = settings_from(c, j, corpus);
  const Corpus cp = load_corpus(s.corpus_dir);
  json report = occurrence_json(cp);
  report["cooccurrence"] = cooccurrence_matrix(cp.labels, cp.vocab);
  write_json(fs::path(c.out) / "reports" / "divergence.json", report);
  std::cout << "divergence\t" << textio::format_real(report["divergence"].get<double>()) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subclass-decomposed late fusion for video concept detection"};
  app.require_subcommand(1);

  Common common;
  std::string corpus, feature, codebook, mode, models_dir, scores, val_scores, test_scores, name = "scores", preset;
  std::vector<std::string> features, classes;
  std::vector<int> rows;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  add_common(synth, common);
  synth->add_option("--preset", preset, "Generator preset");

  auto* fit = app.add_subcommand("fit-codebook", "Fit a k-means codebook or GMM on train descriptors");
  add_common(fit, common);
  fit->add_option("--corpus", corpus, "Corpus directory");
  fit->add_option("--feature", feature, "Feature name")->required();

  auto* enc = app.add_subcommand("encode", "Encode one feature for every video");
  add_common(enc, common);
  enc->add_option("--corpus", corpus, "Corpus directory");
  enc->add_option("--feature", feature, "Feature name")->required();
  enc->add_option("--codebook", codebook, "Codebook or GMM file");

  auto* train = app.add_subcommand("train", "Train Negative Bootstrap classifiers");
  add_common(train, common);
  train->add_option("--corpus", corpus, "Corpus directory");
  train->add_option("--feature", features, "Feature names");
  train->add_option("--class", classes, "Class names, or 'all'");

  auto* score = app.add_subcommand("score", "Score val and test videos with a classifier bank");
  add_common(score, common);
  score->add_option("--corpus", corpus, "Corpus directory");
  score->add_option("--feature", features, "Feature names or a table3-row preset");
  score->add_option("--subclass-mode", mode, "none, avg or learn");
  score->add_option("--models", models_dir, "Directory of trained model files");

  auto* fuse = app.add_subcommand("fuse", "Fuse per-classifier scores");
  std::string fuse_mode = "learn";
  add_common(fuse, common);
  fuse->add_option("--corpus", corpus, "Corpus directory");
  fuse->add_option("--mode", fuse_mode, "avg or learn")->capture_default_str();
  fuse->add_option("--val-scores", val_scores, "Validation score matrix");
  fuse->add_option("--test-scores", test_scores, "Test score matrix");

  auto* ev = app.add_subcommand("eval", "Evaluate a ranked list of video scores");
  add_common(ev, common);
  ev->add_option("--corpus", corpus, "Corpus directory");
  ev->add_option("--scores", scores, "video_id<TAB>score file")->required();
  ev->add_option("--name", name, "Report name")->capture_default_str();

  auto* exp = app.add_subcommand("experiment", "Run the fusion experiment matrix");
  add_common(exp, common);
  exp->add_option("--corpus", corpus, "Corpus directory");
  exp->add_option("--row", rows, "Feature-setting rows (1-13)");

  auto* div = app.add_subcommand("divergence", "Subclass occurrence rates per split and their L1 distance");
  add_common(div, common);
  div->add_option("--corpus", corpus, "Corpus directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth) return cmd_synth(common, preset);
    if (*fit) return cmd_fit_codebook(common, corpus, feature);
    if (*enc) return cmd_encode(common, corpus, feature, codebook);
    if (*train) return cmd_train(common, corpus, features, classes);
    if (*score) return cmd_score(common, corpus, features, mode, models_dir);
    if (*fuse) return cmd_fuse(common, corpus, fuse_mode, val_scores, test_scores);
    if (*ev) return cmd_eval(common, corpus, scores, name);
    if (*exp) return cmd_experiment(common, corpus, rows);
    if (*div) return cmd_divergence(common, corpus);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DegenerateLabelsError& e) {
    std::cerr << "degenerate labels: " << e.what() << "\n";
    return 4;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
