#include "vfuse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "vfuse/error.hpp"
#include "vfuse/random.hpp"
#include "vfuse/textio.hpp"

namespace vfuse {

using nlohmann::json;

namespace {

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

std::string_view to_string(SourceKind k) { return k == SourceKind::frame ? "frame" : "descriptor"; }

SourceKind parse_source_kind(std::string_view s) {
  if (s == "frame") return SourceKind::frame;
  if (s == "descriptor") return SourceKind::descriptor;
  throw ConfigError("unknown source kind '" + std::string(s) + "'");
}

const SourceConfig* find_source(const GeneratorConfig& c, const std::string& name) {
  for (const auto& s : c.sources) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

std::string numbered(const char* prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

}  // namespace

void GeneratorConfig::validate() const {
  if (num_dev < 2) throw ConfigError("generator: num_dev must be at least 2");
  if (num_test < 1) throw ConfigError("generator: num_test must be at least 1");
  auto prevalence_ok = [](double p) { return p > 0.0 && p < 1.0; };
  if (!prevalence_ok(violence_prevalence_dev) || !prevalence_ok(violence_prevalence_test)) {
    throw ConfigError("generator: violence prevalence must lie in (0,1)");
  }
  const std::size_t k = vocab.size();
  for (const auto* occ : {&occurrence_dev, &occurrence_test}) {
    if (occ->size() != k) throw ConfigError("generator: occurrence vector length differs from vocabulary size");
    if (!std::all_of(occ->begin(), occ->end(), in_unit)) throw ConfigError("generator: occurrence rates must lie in [0,1]");
    if (k > 0 && std::all_of(occ->begin(), occ->end(), [](double v) { return v == 0.0; })) {
      throw ConfigError("generator: an occurrence vector is all zero");
    }
  }
  std::set<std::string> names;
  for (const auto& s : sources) {
    if (s.name.empty() || !names.insert(s.name).second) throw ConfigError("generator: source names must be unique and non-empty");
    if (s.dim == 0) throw ConfigError("generator: source " + s.name + " has zero dimension");
    if (!std::isfinite(s.noise_sigma)) throw ConfigError("generator: source " + s.name + " has a non-finite noise_sigma");
    if (s.informativeness.size() != k) {
      throw ConfigError("generator: source " + s.name + " informativeness length differs from vocabulary size");
    }
    if (!std::all_of(s.informativeness.begin(), s.informativeness.end(), in_unit)) {
      throw ConfigError("generator: source " + s.name + " informativeness must lie in [0,1]");
    }
    if (s.kind == SourceKind::descriptor && (s.descriptors_min == 0 || s.descriptors_min > s.descriptors_max)) {
      throw ConfigError("generator: source " + s.name + " has an invalid descriptor count range");
    }
  }
  if (features.empty()) throw ConfigError("generator: no features");
  std::set<std::string> feature_names;
  for (const auto& f : features) {
    if (f.spec.name.empty() || !feature_names.insert(f.spec.name).second) {
      throw ConfigError("generator: feature names must be unique and non-empty");
    }
    const SourceConfig* src = find_source(*this, f.source);
    if (!src) throw ConfigError("generator: feature " + f.spec.name + " names unknown source '" + f.source + "'");
    const bool frame_encoding = f.spec.encoding == Encoding::raw || f.spec.encoding == Encoding::avgpool;
    if (frame_encoding != (src->kind == SourceKind::frame)) {
      throw ConfigError("generator: feature " + f.spec.name + " encoding does not fit source " + src->name);
    }
    if (f.spec.modality != src->modality) throw ConfigError("generator: feature " + f.spec.name + " modality differs from its source");
    if (frame_encoding) {
      const Level want = f.spec.encoding == Encoding::raw ? Level::frame : Level::video;
      if (f.spec.level != want) throw ConfigError("generator: feature " + f.spec.name + " has the wrong level for its encoding");
      if (f.spec.dim != src->dim) throw ConfigError("generator: feature " + f.spec.name + " dimension differs from its source");
    } else {
      if (f.spec.level != Level::video) throw ConfigError("generator: feature " + f.spec.name + " must be video-level");
      if (f.components == 0) throw ConfigError("generator: feature " + f.spec.name + " needs components");
      try {
        validate_dims(f.spec, f.components, src->dim);
      } catch (const DataError& e) {
        throw ConfigError(std::string("generator: ") + e.what());
      }
    }
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("generator: noise_sigma must be nonnegative");
  if (!(signal_scale >= 0.0) || !std::isfinite(signal_scale)) throw ConfigError("generator: signal_scale must be nonnegative");
  if (!in_unit(descriptor_signal_rate)) throw ConfigError("generator: descriptor_signal_rate must lie in [0,1]");
  if (!(descriptor_center_scale >= 0.0)) throw ConfigError("generator: descriptor_center_scale must be nonnegative");
  if (frames_min == 0 || frames_min > frames_max) throw ConfigError("generator: invalid frame count range");
  if (!(frame_interval > 0.0)) throw ConfigError("generator: frame_interval must be positive");
  if (num_movies == 0) throw ConfigError("generator: num_movies must be positive");
  if (!in_unit(confuser_rate) || !in_unit(confuser_strength)) {
    throw ConfigError("generator: confuser rate and strength must lie in [0,1]");
  }
  if (confuser_rate > 0.0 && k == 0) throw ConfigError("generator: confusers need a subclass vocabulary");
  for (const auto& b : pair_boosts) {
    if (!vocab.index_of(b.first) || !vocab.index_of(b.second)) throw ConfigError("generator: pair boost names an unknown subclass");
    if (!in_unit(b.probability)) throw ConfigError("generator: pair boost probability must lie in [0,1]");
  }
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw ConfigError("generator: split_fraction must lie in (0,1)");
}

// ---------------------------------------------------------------------------

json to_json(const FeatureRecipe& r) {
  return json{{"name", r.spec.name},
              {"modality", std::string(to_string(r.spec.modality))},
              {"level", std::string(to_string(r.spec.level))},
              {"dim", r.spec.dim},
              {"encoding", std::string(to_string(r.spec.encoding))},
              {"source", r.source},
              {"components", r.components},
              {"file", r.file()}};
}

FeatureRecipe recipe_from_json(const json& j) {
  try {
    FeatureRecipe r;
    r.spec.name = j.at("name").get<std::string>();
    r.spec.modality = parse_modality(j.at("modality").get<std::string>());
    r.spec.level = parse_level(j.at("level").get<std::string>());
    r.spec.dim = j.at("dim").get<std::size_t>();
    r.spec.encoding = parse_encoding(j.at("encoding").get<std::string>());
    r.source = j.value("source", r.spec.name);
    r.components = j.value("components", std::size_t{0});
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("feature catalog: ") + e.what());
  } catch (const DataError& e) {
    throw ConfigError(std::string("feature catalog: ") + e.what());
  }
}

std::vector<FeatureRecipe> load_catalog(const std::filesystem::path& corpus_dir) {
  const auto path = corpus_dir / "manifest.json";
  json j;
  try {
    j = json::parse(textio::read_file(path));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (!j.contains("features") || !j["features"].is_array()) throw DataError(path.string() + ": no features array");
  std::vector<FeatureRecipe> out;
  std::set<std::string> seen;
  for (const auto& f : j["features"]) {
    FeatureRecipe r;
    try {
      r = recipe_from_json(f);
    } catch (const ConfigError& e) {
      throw DataError(path.string() + ": " + e.what());
    }
    if (!seen.insert(r.spec.name).second) throw DataError(path.string() + ": duplicate feature " + r.spec.name);
    out.push_back(std::move(r));
  }
  return out;
}

json to_json(const GeneratorConfig& c) {
  json sources = json::array();
  for (const auto& s : c.sources) {
    sources.push_back({{"name", s.name},
                       {"modality", std::string(to_string(s.modality))},
                       {"kind", std::string(to_string(s.kind))},
                       {"dim", s.dim},
                       {"informativeness", s.informativeness},
                       {"descriptors_min", s.descriptors_min},
                       {"descriptors_max", s.descriptors_max},
                       {"noise_sigma", s.noise_sigma}});
  }
  json features = json::array();
  for (const auto& f : c.features) features.push_back(to_json(f));
  json boosts = json::array();
  for (const auto& b : c.pair_boosts) boosts.push_back({{"first", b.first}, {"second", b.second}, {"probability", b.probability}});
  return json{{"name", c.name},
              {"num_dev", c.num_dev},
              {"num_test", c.num_test},
              {"violence_prevalence_dev", c.violence_prevalence_dev},
              {"violence_prevalence_test", c.violence_prevalence_test},
              {"vocab", c.vocab.names()},
              {"occurrence_dev", c.occurrence_dev},
              {"occurrence_test", c.occurrence_test},
              {"sources", sources},
              {"features", features},
              {"noise_sigma", c.noise_sigma},
              {"signal_scale", c.signal_scale},
              {"descriptor_signal_rate", c.descriptor_signal_rate},
              {"descriptor_center_scale", c.descriptor_center_scale},
              {"frames_min", c.frames_min},
              {"frames_max", c.frames_max},
              {"frame_interval", c.frame_interval},
              {"num_movies", c.num_movies},
              {"confuser_rate", c.confuser_rate},
              {"confuser_strength", c.confuser_strength},
              {"pair_boosts", boosts},
              {"split_fraction", c.split_fraction},
              {"seed", c.seed}};
}

GeneratorConfig generator_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("generator config: expected a JSON object");
  try {
    GeneratorConfig c;
    if (j.contains("preset")) c = preset(j.at("preset").get<std::string>(), j.value("seed", std::uint64_t{42}));
    for (const auto& [key, v] : j.items()) {
      if (key == "preset") continue;
      else if (key == "name") c.name = v.get<std::string>();
      else if (key == "num_dev") c.num_dev = v.get<std::size_t>();
      else if (key == "num_test") c.num_test = v.get<std::size_t>();
      else if (key == "violence_prevalence_dev") c.violence_prevalence_dev = v.get<double>();
      else if (key == "violence_prevalence_test") c.violence_prevalence_test = v.get<double>();
      else if (key == "vocab") {
        try {
          c.vocab = SubclassVocabulary(v.get<std::vector<std::string>>());
        } catch (const DataError& e) {
          throw ConfigError(e.what());
        }
      } else if (key == "occurrence_dev") c.occurrence_dev = v.get<std::vector<double>>();
      else if (key == "occurrence_test") c.occurrence_test = v.get<std::vector<double>>();
      else if (key == "sources") {
        c.sources.clear();
        for (const auto& s : v) {
          SourceConfig sc;
          sc.name = s.at("name").get<std::string>();
          try {
            sc.modality = parse_modality(s.at("modality").get<std::string>());
          } catch (const DataError& e) {
            throw ConfigError(e.what());
          }
          sc.kind = parse_source_kind(s.value("kind", std::string("frame")));
          sc.dim = s.value("dim", sc.dim);
          sc.informativeness = s.at("informativeness").get<std::vector<double>>();
          sc.descriptors_min = s.value("descriptors_min", sc.descriptors_min);
          sc.descriptors_max = s.value("descriptors_max", sc.descriptors_max);
          sc.noise_sigma = s.value("noise_sigma", sc.noise_sigma);
          c.sources.push_back(std::move(sc));
        }
      } else if (key == "features") {
        c.features.clear();
        for (const auto& f : v) c.features.push_back(recipe_from_json(f));
      } else if (key == "noise_sigma") c.noise_sigma = v.get<double>();
      else if (key == "signal_scale") c.signal_scale = v.get<double>();
      else if (key == "descriptor_signal_rate") c.descriptor_signal_rate = v.get<double>();
      else if (key == "descriptor_center_scale") c.descriptor_center_scale = v.get<double>();
      else if (key == "frames_min") c.frames_min = v.get<std::size_t>();
      else if (key == "frames_max") c.frames_max = v.get<std::size_t>();
      else if (key == "frame_interval") c.frame_interval = v.get<double>();
      else if (key == "num_movies") c.num_movies = v.get<std::size_t>();
      else if (key == "confuser_rate") c.confuser_rate = v.get<double>();
      else if (key == "confuser_strength") c.confuser_strength = v.get<double>();
      else if (key == "pair_boosts") {
        c.pair_boosts.clear();
        for (const auto& b : v) {
          c.pair_boosts.push_back({b.at("first").get<std::string>(), b.at("second").get<std::string>(),
                                   b.at("probability").get<double>()});
        }
      } else if (key == "split_fraction") c.split_fraction = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else throw ConfigError("generator config: unknown key '" + key + "'");
    }
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("generator config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string> kPresetVocab = {"fight", "blood",     "weapon",  "aim",  "death",
                                               "fire",  "explosion", "gunshot", "rope", "bind"};

constexpr std::size_t kFrameDim = 24;
constexpr std::size_t kDescriptorDim = 16;
constexpr std::size_t kBowWords = 16;
constexpr std::size_t kFvComponents = 4;

SourceConfig frame_source(std::string name, std::vector<double> inf) {
  SourceConfig s;
  s.name = std::move(name);
  s.modality = Modality::image;
  s.kind = SourceKind::frame;
  s.dim = kFrameDim;
  s.informativeness = std::move(inf);
  return s;
}

SourceConfig descriptor_source(std::string name, Modality m, std::vector<double> inf) {
  SourceConfig s;
  s.name = std::move(name);
  s.modality = m;
  s.kind = SourceKind::descriptor;
  s.dim = kDescriptorDim;
  s.informativeness = std::move(inf);
  s.descriptors_min = 12;
  s.descriptors_max = 24;
  return s;
}

std::vector<double> scaled(std::vector<double> v, double f) {
  for (double& x : v) x *= f;
  return v;
}

// The fourteen standard features at desk-scale dimensionality.
std::vector<FeatureRecipe> desk_features() {
  std::vector<FeatureRecipe> out;
  auto image = [&](const char* f, const char* v, const char* src) {
    out.push_back({{f, Modality::image, Level::frame, kFrameDim, Encoding::raw}, src, 0});
    out.push_back({{v, Modality::image, Level::video, kFrameDim, Encoding::avgpool}, src, 0});
  };
  auto local = [&](const char* b, const char* fv, const char* src, Modality m) {
    out.push_back({{b, m, Level::video, kBowWords, Encoding::bow}, src, kBowWords});
    out.push_back({{fv, m, Level::video, 2 * kFvComponents * kDescriptorDim, Encoding::fv}, src, kFvComponents});
  };
  image("vnet_f", "vnet_v", "vggnet");
  image("gnet_f", "gnet_v", "googlenet");
  image("g4k_f", "g4k_v", "googlenet4k");
  local("mfcc_b", "mfcc_fv", "mfcc", Modality::audio);
  local("mbh_b", "mbh_fv", "mbh", Modality::motion);
  local("hog_b", "hog_fv", "hog", Modality::motion);
  local("hof_b", "hof_fv", "hof", Modality::motion);
  return out;
}

GeneratorConfig subclass_preset(std::string name, std::vector<double> occ_dev, std::vector<double> occ_test,
                                std::uint64_t seed) {
  GeneratorConfig c;
  c.name = std::move(name);
  c.num_dev = 6000;
  c.num_test = 6000;
  c.vocab = SubclassVocabulary(kPresetVocab);
  c.occurrence_dev = std::move(occ_dev);
  c.occurrence_test = std::move(occ_test);
  // Image sources see the dev-common subclasses; audio and motion sources see
  // only the subclasses that are rare in dev and common in test.
  const std::vector<double> image = {1.0, 1.0, 1.0, 0.9, 0.9, 0.2, 0.2, 0.1, 0.1, 0.1};
  c.sources = {
      frame_source("vggnet", scaled(image, 0.8)),
      frame_source("googlenet", scaled(image, 0.9)),
      frame_source("googlenet4k", image),
      descriptor_source("mfcc", Modality::audio, {0, 0, 0, 0, 0, 0.9, 0.9, 1.0, 0, 0}),
      descriptor_source("mbh", Modality::motion, {0, 0, 0, 0, 0, 0.6, 0.6, 0.3, 0.9, 0.9}),
      descriptor_source("hog", Modality::motion, {0, 0, 0, 0, 0, 0.5, 0.5, 0.2, 0.8, 0.8}),
      descriptor_source("hof", Modality::motion, {0, 0, 0, 0, 0, 0.6, 0.6, 0.3, 0.8, 0.8}),
  };
  c.features = desk_features();
  c.frames_min = 6;
  c.frames_max = 12;
  c.pair_boosts = {{"rope", "bind", 0.3}, {"blood", "death", 0.3}};
  c.seed = seed;
  return c;
}

}  // namespace

std::vector<std::string> preset_names() { return {"divergent-v1", "imbalanced-v1", "matched-v1"}; }

GeneratorConfig preset(const std::string& name, std::uint64_t seed) {
  const std::vector<double> dev = {0.40, 0.35, 0.35, 0.30, 0.30, 0.10, 0.10, 0.12, 0.08, 0.10};
  const std::vector<double> test = {0.10, 0.10, 0.12, 0.08, 0.10, 0.40, 0.35, 0.35, 0.30, 0.30};
  GeneratorConfig c;
  if (name == "divergent-v1") {
    c = subclass_preset(name, dev, test, seed);
  } else if (name == "matched-v1") {
    std::vector<double> mid(dev.size());
    for (std::size_t i = 0; i < mid.size(); ++i) mid[i] = (dev[i] + test[i]) / 2.0;
    c = subclass_preset(name, mid, mid, seed);
  } else if (name == "imbalanced-v1") {
    c.name = name;
    c.num_dev = 2000;
    c.num_test = 1000;
    c.violence_prevalence_dev = 0.05;
    c.violence_prevalence_test = 0.05;
    c.vocab = SubclassVocabulary({"fight"});
    c.occurrence_dev = {1.0};
    c.occurrence_test = {1.0};
    c.sources = {frame_source("vggnet", {0.5})};
    c.features = {{{"vnet_v", Modality::image, Level::video, kFrameDim, Encoding::avgpool}, "vggnet", 0}};
    c.confuser_rate = 0.1;
    c.confuser_strength = 0.7;
    c.seed = seed;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

RowMatrix make_prototypes(std::size_t count, std::size_t dim, std::uint64_t seed, double max_abs_cos) {
  if (dim == 0) throw ConfigError("make_prototypes: zero dimension");
  Rng rng(seed);
  RowMatrix out(dim);
  std::vector<double> v(dim);
  constexpr int kMaxAttempts = 100000;
  while (out.rows() < count) {
    int attempts = 0;
    for (;;) {
      if (++attempts > kMaxAttempts) {
        throw ConfigError("make_prototypes: cannot place " + std::to_string(count) + " near-orthogonal vectors in " +
                          std::to_string(dim) + " dimensions");
      }
      double norm = 0.0;
      for (double& x : v) {
        x = rng.normal();
        norm += x * x;
      }
      norm = std::sqrt(norm);
      if (norm == 0.0) continue;
      for (double& x : v) x /= norm;
      bool ok = true;
      for (std::size_t r = 0; r < out.rows() && ok; ++r) ok = std::abs(dot(out.row(r), v)) < max_abs_cos;
      if (ok) break;
    }
    out.append(v);
  }
  return out;
}

namespace {

constexpr std::size_t kBackgroundCenters = 4;

struct SourceModel {
  RowMatrix prototypes;  // frame sources: unit vectors; descriptor sources: subclass centres
  RowMatrix background;  // descriptor sources only
};

SourceModel build_source(const GeneratorConfig& c, const SourceConfig& s) {
  SourceModel m;
  const std::uint64_t seed = derive_seed(c.seed, "proto/" + s.name);
  m.prototypes = make_prototypes(c.vocab.size(), s.dim, seed);
  if (s.kind == SourceKind::descriptor) {
    for (std::size_t r = 0; r < m.prototypes.rows(); ++r) {
      for (double& x : m.prototypes.row(r)) x *= c.descriptor_center_scale;
    }
    Rng rng(derive_seed(c.seed, "background/" + s.name));
    m.background = RowMatrix(s.dim);
    std::vector<double> v(s.dim);
    for (std::size_t b = 0; b < kBackgroundCenters; ++b) {
      for (double& x : v) x = rng.normal();
      m.background.append(v);
    }
  }
  return m;
}

}  // namespace

SyntheticCorpus generate(const GeneratorConfig& config) {
  config.validate();
  SyntheticCorpus out;
  out.config = config;
  out.catalog = config.features;
  out.corpus.vocab = config.vocab;

  std::vector<SourceModel> models;
  for (const auto& s : config.sources) models.push_back(build_source(config, s));

  // Frame tables per frame source, under a provisional frame-level spec.
  std::map<std::string, FeatureTable> frames;
  for (const auto& s : config.sources) {
    if (s.kind == SourceKind::frame) frames.emplace(s.name, FeatureTable({s.name, s.modality, Level::frame, s.dim, Encoding::raw}));
    else out.descriptors[s.name].descriptor_dim = s.dim;
  }

  const std::size_t k = config.vocab.size();
  const std::size_t total = config.num_dev + config.num_test;
  std::vector<double> x;
  for (std::size_t i = 0; i < total; ++i) {
    const bool dev = i < config.num_dev;
    const Split split = dev ? Split::dev : Split::test;
    const std::string id = dev ? numbered("dev", i + 1, 5) : numbered("test", i - config.num_dev + 1, 5);
    Rng rng(derive_seed(config.seed, "video/" + std::to_string(i)));

    const double prevalence = dev ? config.violence_prevalence_dev : config.violence_prevalence_test;
    const auto& occ = dev ? config.occurrence_dev : config.occurrence_test;
    const bool violent = rng.bernoulli(prevalence);
    std::vector<char> active(k, 0);
    double strength = 1.0;
    std::string confuser;
    if (violent && k > 0) {
      for (;;) {
        for (std::size_t s = 0; s < k; ++s) active[s] = rng.bernoulli(occ[s]);
        for (const auto& b : config.pair_boosts) {
          const std::size_t a = *config.vocab.index_of(b.first);
          const std::size_t z = *config.vocab.index_of(b.second);
          if (active[a] && !active[z] && rng.bernoulli(b.probability)) active[z] = 1;
        }
        if (std::find(active.begin(), active.end(), 1) != active.end()) break;
      }
    } else if (!violent && config.confuser_rate > 0.0 && rng.bernoulli(config.confuser_rate)) {
      const std::size_t s = rng.below(k);
      active[s] = 1;
      strength = config.confuser_strength;
      confuser = config.vocab[s];
    }
    const bool any_active = std::find(active.begin(), active.end(), 1) != active.end();

    VideoRecord video;
    video.id = id;
    video.movie_id = numbered("movie", rng.below(config.num_movies) + 1, 3);
    video.split = split;
    const std::size_t n_frames = config.frames_min + rng.below(config.frames_max - config.frames_min + 1);
    for (std::size_t f = 0; f < n_frames; ++f) video.frame_times.push_back(static_cast<double>(f) * config.frame_interval);

    std::size_t seg_first = 0, seg_last = 0;
    if (any_active) {
      const double frac = 0.4 + 0.6 * rng.uniform();
      const auto len = std::clamp<std::size_t>(
          static_cast<std::size_t>(std::llround(frac * static_cast<double>(n_frames))), 1, n_frames);
      seg_first = rng.below(n_frames - len + 1);
      seg_last = seg_first + len - 1;
      out.truth.segments[id] = {seg_first, seg_last};
      if (!confuser.empty()) out.truth.confuser_subclass[id] = confuser;
    }
    std::vector<std::size_t> active_list;
    for (std::size_t s = 0; s < k; ++s) {
      if (active[s]) active_list.push_back(s);
    }

    for (std::size_t si = 0; si < config.sources.size(); ++si) {
      const SourceConfig& src = config.sources[si];
      const SourceModel& model = models[si];
      x.assign(src.dim, 0.0);
      if (src.kind == SourceKind::frame) {
        FeatureTable& table = frames.at(src.name);
        for (std::size_t f = 0; f < n_frames; ++f) {
          for (double& v : x) v = src.noise(config.noise_sigma) * rng.normal();
          if (any_active && f >= seg_first && f <= seg_last) {
            for (std::size_t s : active_list) {
              const double a = config.signal_scale * strength * src.informativeness[s];
              auto p = model.prototypes.row(s);
              for (std::size_t d = 0; d < src.dim; ++d) x[d] += a * p[d];
            }
          }
          table.add(UnitKey{id, static_cast<long>(f)}, x);
        }
      } else {
        RowMatrix desc(src.dim);
        const std::size_t n_desc = src.descriptors_min + rng.below(src.descriptors_max - src.descriptors_min + 1);
        desc.reserve(n_desc);
        for (std::size_t j = 0; j < n_desc; ++j) {
          RowView center = model.background.row(rng.below(kBackgroundCenters));
          if (!active_list.empty()) {
            const std::size_t s = active_list[rng.below(active_list.size())];
            if (rng.bernoulli(config.descriptor_signal_rate * strength * src.informativeness[s])) {
              center = model.prototypes.row(s);
            }
          }
          for (std::size_t d = 0; d < src.dim; ++d) x[d] = center[d] + src.noise(config.noise_sigma) * rng.normal();
          desc.append(x);
        }
        out.descriptors[src.name].per_video.emplace(id, std::move(desc));
      }
    }

    std::set<std::string> subs;
    if (violent) {
      for (std::size_t s : active_list) subs.insert(config.vocab[s]);
    }
    out.corpus.labels.set(id, violent, std::move(subs));
    out.corpus.videos.push_back(std::move(video));
  }

  for (const auto& r : config.features) {
    if (r.spec.encoding == Encoding::raw) {
      const FeatureTable& src = frames.at(r.source);
      FeatureTable t(r.spec);
      for (std::size_t row = 0; row < src.size(); ++row) t.add(src.key(row), src.row(row));
      out.features.emplace(r.spec.name, std::move(t));
    } else if (r.spec.encoding == Encoding::avgpool) {
      FeatureTable pooled = avg_pool(frames.at(r.source), r.spec.name);
      FeatureTable t(r.spec);
      for (std::size_t row = 0; row < pooled.size(); ++row) t.add(pooled.key(row), pooled.row(row));
      out.features.emplace(r.spec.name, std::move(t));
    }
  }

  out.corpus.split = make_split(out.corpus.ids(Split::dev), config.split_fraction, derive_seed(config.seed, "split"));
  out.corpus.validate();
  return out;
}

void write_synthetic(const std::filesystem::path& dir, const SyntheticCorpus& s) {
  std::filesystem::create_directories(dir / "features");
  std::filesystem::create_directories(dir / "descriptors");
  write_corpus(dir, s.corpus);
  for (const auto& [name, table] : s.features) write_features(dir / "features" / (name + ".tsv"), table);
  for (const auto& [name, set] : s.descriptors) {
    textio::write_file_atomic(dir / "descriptors" / (name + ".tsv"), format_descriptors(set));
  }
  json catalog = json::array();
  for (const auto& r : s.catalog) catalog.push_back(to_json(r));
  json manifest = {{"generator", to_json(s.config)}, {"features", catalog}};
  textio::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace vfuse
