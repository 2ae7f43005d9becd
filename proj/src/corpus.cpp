#include "vfuse/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vfuse/error.hpp"
#include "vfuse/random.hpp"
#include "vfuse/textio.hpp"

namespace vfuse {

std::string_view to_string(Split s) { return s == Split::dev ? "dev" : "test"; }

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::image: return "image";
    case Modality::audio: return "audio";
    case Modality::motion: return "motion";
  }
  return "?";
}

std::string_view to_string(Level l) { return l == Level::frame ? "frame" : "video"; }

std::string_view to_string(Encoding e) {
  switch (e) {
    case Encoding::raw: return "raw";
    case Encoding::bow: return "bow";
    case Encoding::fv: return "fv";
    case Encoding::avgpool: return "avgpool";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  throw DataError("unknown split '" + std::string(s) + "'");
}

Modality parse_modality(std::string_view s) {
  if (s == "image") return Modality::image;
  if (s == "audio") return Modality::audio;
  if (s == "motion") return Modality::motion;
  throw DataError("unknown modality '" + std::string(s) + "'");
}

Level parse_level(std::string_view s) {
  if (s == "frame") return Level::frame;
  if (s == "video") return Level::video;
  throw DataError("unknown level '" + std::string(s) + "'");
}

Encoding parse_encoding(std::string_view s) {
  if (s == "raw") return Encoding::raw;
  if (s == "bow") return Encoding::bow;
  if (s == "fv") return Encoding::fv;
  if (s == "avgpool") return Encoding::avgpool;
  throw DataError("unknown encoding '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------

SubclassVocabulary::SubclassVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
  std::set<std::string_view> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw DataError("subclass vocabulary: empty name");
    if (n.find_first_of(",\t\n") != std::string::npos) {
      throw DataError("subclass vocabulary: name '" + n + "' contains a separator");
    }
    if (!seen.insert(n).second) throw DataError("subclass vocabulary: duplicate name '" + n + "'");
  }
}

std::optional<std::size_t> SubclassVocabulary::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

void LabelStore::set(const std::string& video_id, bool violence, std::set<std::string> subclasses) {
  if (!violence && !subclasses.empty()) {
    throw DataError("video " + video_id + ": subclasses given for a non-violent video");
  }
  entries_[video_id] = Entry{violence, std::move(subclasses)};
}

const LabelStore::Entry& LabelStore::entry(std::string_view video_id) const {
  auto it = entries_.find(video_id);
  if (it == entries_.end()) throw DataError("no label for video " + std::string(video_id));
  return it->second;
}

bool LabelStore::contains(std::string_view video_id) const { return entries_.find(video_id) != entries_.end(); }

bool LabelStore::violence(std::string_view video_id) const { return entry(video_id).violence; }

const std::set<std::string>& LabelStore::subclasses(std::string_view video_id) const {
  return entry(video_id).subclasses;
}

bool LabelStore::has(std::string_view video_id, std::string_view class_name) const {
  const Entry& e = entry(video_id);
  if (class_name == kViolenceClass) return e.violence;
  return e.subclasses.find(std::string(class_name)) != e.subclasses.end();
}

std::vector<std::string> LabelStore::ids() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [id, _] : entries_) out.push_back(id);
  return out;
}

// ---------------------------------------------------------------------------

const std::vector<FeatureSpec>& standard_features() {
  static const std::vector<FeatureSpec> specs = {
      {"vnet_f", Modality::image, Level::frame, 4096, Encoding::raw},
      {"vnet_v", Modality::image, Level::video, 4096, Encoding::avgpool},
      {"gnet_f", Modality::image, Level::frame, 1024, Encoding::raw},
      {"gnet_v", Modality::image, Level::video, 1024, Encoding::avgpool},
      {"g4k_f", Modality::image, Level::frame, 1024, Encoding::raw},
      {"g4k_v", Modality::image, Level::video, 1024, Encoding::avgpool},
      {"mfcc_b", Modality::audio, Level::video, 4096, Encoding::bow},
      {"mfcc_fv", Modality::audio, Level::video, 19968, Encoding::fv},
      {"mbh_b", Modality::motion, Level::video, 4000, Encoding::bow},
      {"mbh_fv", Modality::motion, Level::video, 98304, Encoding::fv},
      {"hog_b", Modality::motion, Level::video, 4000, Encoding::bow},
      {"hog_fv", Modality::motion, Level::video, 49152, Encoding::fv},
      {"hof_b", Modality::motion, Level::video, 4000, Encoding::bow},
      {"hof_fv", Modality::motion, Level::video, 55296, Encoding::fv},
  };
  return specs;
}

std::optional<FeatureSpec> find_standard_feature(std::string_view name) {
  for (const auto& s : standard_features()) {
    if (s.name == name) return s;
  }
  return std::nullopt;
}

std::string FeatureRecipe::file() const {
  if (spec.encoding == Encoding::bow || spec.encoding == Encoding::fv) return "descriptors/" + source + ".tsv";
  return "features/" + spec.name + ".tsv";
}

// ---------------------------------------------------------------------------

std::string UnitKey::str() const {
  if (frame < 0) return video_id;
  return video_id + ":" + std::to_string(frame);
}

FeatureTable::FeatureTable(FeatureSpec spec) : spec_(std::move(spec)), rows_(spec_.dim) {
  if (spec_.dim == 0) throw DataError("feature " + spec_.name + ": dimension must be positive");
}

void FeatureTable::add(UnitKey key, RowView values) {
  if (values.size() != spec_.dim) {
    throw DataError("feature " + spec_.name + ": row " + key.str() + " has " + std::to_string(values.size()) +
                    " values, expected " + std::to_string(spec_.dim));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw DataError("feature " + spec_.name + ": non-finite value in row " + key.str());
  }
  if ((spec_.level == Level::frame) != (key.frame >= 0)) {
    throw DataError("feature " + spec_.name + ": unit key " + key.str() + " does not match level " +
                    std::string(to_string(spec_.level)));
  }
  if (index_.count(key)) throw DataError("feature " + spec_.name + ": duplicate unit key " + key.str());
  const std::size_t i = keys_.size();
  index_.emplace(key, i);
  auto& rows = by_video_[key.video_id];
  rows.push_back(i);
  keys_.push_back(std::move(key));
  rows_.append(values);
  if (rows.size() > 1 && keys_[rows[rows.size() - 2]].frame > keys_[i].frame) {
    std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) { return keys_[a].frame < keys_[b].frame; });
  }
}

std::optional<std::size_t> FeatureTable::find(const UnitKey& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> FeatureTable::rows_for_video(std::string_view video_id) const {
  auto it = by_video_.find(video_id);
  if (it == by_video_.end()) return {};
  return it->second;
}

std::vector<std::string> FeatureTable::video_ids() const {
  std::vector<std::string> out;
  std::set<std::string_view> seen;
  for (const auto& k : keys_) {
    if (seen.insert(k.video_id).second) out.push_back(k.video_id);
  }
  return out;
}

namespace {

UnitKey parse_unit_key(std::string_view token, Level level, std::string_view context) {
  if (token.empty()) throw DataError(std::string(context) + ": empty unit key");
  if (level == Level::video) return UnitKey{std::string(token), -1};
  const auto colon = token.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw DataError(std::string(context) + ": frame unit key '" + std::string(token) + "' lacks ':index'");
  }
  const long long idx = textio::parse_integer(token.substr(colon + 1), context);
  if (idx < 0) throw DataError(std::string(context) + ": negative frame index");
  return UnitKey{std::string(token.substr(0, colon)), static_cast<long>(idx)};
}

}  // namespace

FeatureTable parse_features(std::string_view text, const FeatureSpec& spec, std::string_view source) {
  const auto ls = textio::lines(text);
  if (ls.empty()) throw DataError(std::string(source) + ": empty feature file");
  const auto header = textio::parse_header(ls[0]);
  auto it = header.find("dim");
  if (it == header.end()) throw DataError(std::string(source) + ": missing #dim header");
  const long long dim = textio::parse_integer(it->second, source);
  if (dim != static_cast<long long>(spec.dim)) {
    throw DataError(std::string(source) + ": dimension mismatch for feature " + spec.name + ": file has " +
                    std::to_string(dim) + ", expected " + std::to_string(spec.dim));
  }
  FeatureTable table(spec);
  std::vector<double> values;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    if (textio::trim(ls[i]).empty()) continue;
    const std::string context = std::string(source) + ":" + std::to_string(i + 1);
    const auto tab = ls[i].find('\t');
    if (tab == std::string_view::npos) throw DataError(context + ": expected unit_key<TAB>values");
    values = textio::parse_reals(ls[i].substr(tab + 1), context);
    table.add(parse_unit_key(ls[i].substr(0, tab), spec.level, context), values);
  }
  return table;
}

FeatureTable load_features(const std::filesystem::path& path, const FeatureSpec& spec) {
  return parse_features(textio::read_file(path), spec, path.string());
}

std::string format_features(const FeatureTable& table) {
  std::string out = "#dim=" + std::to_string(table.spec().dim) + "\n";
  for (std::size_t i = 0; i < table.size(); ++i) {
    out += table.key(i).str();
    out.push_back('\t');
    textio::append_reals(out, table.row(i));
    out.push_back('\n');
  }
  return out;
}

void write_features(const std::filesystem::path& path, const FeatureTable& table) {
  textio::write_file_atomic(path, format_features(table));
}

// ---------------------------------------------------------------------------

SplitAssignment make_split(std::vector<std::string> dev_ids, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split fraction must lie in (0,1)");
  std::sort(dev_ids.begin(), dev_ids.end());
  if (std::adjacent_find(dev_ids.begin(), dev_ids.end()) != dev_ids.end()) {
    throw DataError("make_split: duplicate video id");
  }
  const std::size_t n = dev_ids.size();
  if (n < 2) throw DataError("make_split: need at least two dev videos");
  Rng rng(seed);
  rng.shuffle(std::span<std::string>(dev_ids));
  auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  SplitAssignment out;
  out.seed = seed;
  out.train_ids.assign(dev_ids.begin(), dev_ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.val_ids.assign(dev_ids.begin() + static_cast<std::ptrdiff_t>(n_train), dev_ids.end());
  std::sort(out.train_ids.begin(), out.train_ids.end());
  std::sort(out.val_ids.begin(), out.val_ids.end());
  return out;
}

SubclassVocabulary select_subclasses(const std::map<std::string, long>& candidate_counts, long threshold) {
  std::vector<std::pair<std::string, long>> kept;
  for (const auto& [name, count] : candidate_counts) {
    if (count < 0) throw DataError("select_subclasses: negative count for " + name);
    if (count > threshold) kept.emplace_back(name, count);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> names;
  names.reserve(kept.size());
  for (auto& [name, _] : kept) names.push_back(std::move(name));
  return SubclassVocabulary(std::move(names));
}

// ---------------------------------------------------------------------------

std::vector<std::string> Corpus::ids(Split s) const {
  std::vector<std::string> out;
  for (const auto& v : videos) {
    if (v.split == s) out.push_back(v.id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

const VideoRecord& Corpus::video(std::string_view id) const {
  for (const auto& v : videos) {
    if (v.id == id) return v;
  }
  throw DataError("unknown video " + std::string(id));
}

void Corpus::validate() const {
  std::set<std::string_view> seen;
  for (const auto& v : videos) {
    if (v.id.empty()) throw DataError("video with empty id");
    if (!seen.insert(v.id).second) throw DataError("duplicate video id " + v.id);
    for (std::size_t i = 0; i < v.frame_times.size(); ++i) {
      if (!(v.frame_times[i] >= 0.0)) throw DataError("video " + v.id + ": negative frame time");
      if (i && !(v.frame_times[i] > v.frame_times[i - 1])) {
        throw DataError("video " + v.id + ": frame times not strictly increasing");
      }
    }
    if (!labels.contains(v.id)) throw DataError("video " + v.id + " has no annotation");
    for (const auto& s : labels.subclasses(v.id)) {
      if (!vocab.index_of(s)) throw DataError("video " + v.id + ": subclass '" + s + "' not in vocabulary");
    }
  }
  if (split) {
    std::set<std::string_view> dev;
    for (const auto& v : videos) {
      if (v.split == Split::dev) dev.insert(v.id);
    }
    std::size_t covered = 0;
    for (const auto* ids : {&split->train_ids, &split->val_ids}) {
      for (const auto& id : *ids) {
        if (!dev.count(id)) throw DataError("split assigns non-dev video " + id);
        ++covered;
      }
    }
    if (covered != dev.size()) throw DataError("split does not cover the dev set exactly once");
  }
}

std::vector<double> occurrence_rates(const Corpus& corpus, Split split) {
  std::vector<long> counts(corpus.vocab.size(), 0);
  long violent = 0;
  for (const auto& v : corpus.videos) {
    if (v.split != split || !corpus.labels.violence(v.id)) continue;
    ++violent;
    for (const auto& s : corpus.labels.subclasses(v.id)) {
      if (auto i = corpus.vocab.index_of(s)) ++counts[*i];
    }
  }
  if (violent == 0) {
    throw DegenerateLabelsError("occurrence_rates: no violent videos in the " + std::string(to_string(split)) +
                                " split");
  }
  std::vector<double> rates(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    rates[i] = static_cast<double>(counts[i]) / static_cast<double>(violent);
  }
  return rates;
}

std::vector<std::vector<long>> cooccurrence_matrix(const LabelStore& labels, const SubclassVocabulary& vocab) {
  const std::size_t n = vocab.size();
  std::vector<std::vector<long>> m(n, std::vector<long>(n, 0));
  std::vector<std::size_t> idx;
  for (const auto& id : labels.ids()) {
    idx.clear();
    for (const auto& s : labels.subclasses(id)) {
      if (auto i = vocab.index_of(s)) idx.push_back(*i);
    }
    for (std::size_t a : idx) {
      for (std::size_t b : idx) ++m[a][b];
    }
  }
  return m;
}

double divergence(std::span<const double> rates_a, std::span<const double> rates_b) {
  if (rates_a.size() != rates_b.size()) {
    throw DataError("divergence: rate vectors differ in length (" + std::to_string(rates_a.size()) + " vs " +
                    std::to_string(rates_b.size()) + ")");
  }
  double d = 0.0;
  for (std::size_t i = 0; i < rates_a.size(); ++i) d += std::abs(rates_a[i] - rates_b[i]);
  return d;
}

// ---------------------------------------------------------------------------

LabelStore parse_annotations(std::string_view text) {
  LabelStore store;
  std::set<std::string> seen;
  const auto ls = textio::lines(text);
  for (std::size_t i = 0; i < ls.size(); ++i) {
    if (textio::trim(ls[i]).empty()) continue;
    const std::string context = "annotations:" + std::to_string(i + 1);
    const auto cols = textio::split(ls[i], '\t');
    if (cols.size() < 2 || cols.size() > 3) throw DataError(context + ": expected 2 or 3 tab-separated columns");
    const std::string id(cols[0]);
    if (id.empty()) throw DataError(context + ": empty video id");
    if (!seen.insert(id).second) throw DataError(context + ": duplicate video id " + id);
    bool violent = false;
    if (cols[1] == "1") {
      violent = true;
    } else if (cols[1] != "0") {
      throw DataError(context + ": violence flag must be 0 or 1");
    }
    std::set<std::string> subs;
    if (cols.size() == 3 && !cols[2].empty()) {
      for (auto s : textio::split(cols[2], ',')) {
        if (s.empty()) throw DataError(context + ": empty subclass name");
        subs.emplace(s);
      }
    }
    if (!violent && !subs.empty()) throw DataError(context + ": subclasses on a non-violent video");
    store.set(id, violent, std::move(subs));
  }
  return store;
}

std::string format_annotations(const LabelStore& labels) {
  std::string out;
  for (const auto& id : labels.ids()) {
    out += id;
    out += labels.violence(id) ? "\t1\t" : "\t0\t";
    bool first = true;
    for (const auto& s : labels.subclasses(id)) {
      if (!first) out.push_back(',');
      out += s;
      first = false;
    }
    out.push_back('\n');
  }
  return out;
}

SplitAssignment parse_split_file(std::string_view text) {
  SplitAssignment split;
  std::set<std::string> seen;
  const auto ls = textio::lines(text);
  for (std::size_t i = 0; i < ls.size(); ++i) {
    if (textio::trim(ls[i]).empty()) continue;
    if (ls[i][0] == '#') {
      const auto header = textio::parse_header(ls[i]);
      if (auto it = header.find("seed"); it != header.end()) {
        split.seed = textio::parse_unsigned(it->second, "splits");
      }
      continue;
    }
    const std::string context = "splits:" + std::to_string(i + 1);
    const auto cols = textio::split(ls[i], '\t');
    if (cols.size() != 2) throw DataError(context + ": expected video_id<TAB>train|val");
    std::string id(cols[0]);
    if (!seen.insert(id).second) throw DataError(context + ": duplicate video id " + id);
    if (cols[1] == "train") {
      split.train_ids.push_back(std::move(id));
    } else if (cols[1] == "val") {
      split.val_ids.push_back(std::move(id));
    } else {
      throw DataError(context + ": split must be train or val");
    }
  }
  std::sort(split.train_ids.begin(), split.train_ids.end());
  std::sort(split.val_ids.begin(), split.val_ids.end());
  return split;
}

std::string format_split_file(const SplitAssignment& split) {
  std::vector<std::pair<std::string_view, std::string_view>> rows;
  for (const auto& id : split.train_ids) rows.emplace_back(id, "train");
  for (const auto& id : split.val_ids) rows.emplace_back(id, "val");
  std::sort(rows.begin(), rows.end());
  std::string out = "#seed=" + std::to_string(split.seed) + "\n";
  for (const auto& [id, which] : rows) {
    out += id;
    out.push_back('\t');
    out += which;
    out.push_back('\n');
  }
  return out;
}

std::vector<VideoRecord> parse_videos(std::string_view text) {
  std::vector<VideoRecord> videos;
  const auto ls = textio::lines(text);
  for (std::size_t i = 0; i < ls.size(); ++i) {
    if (textio::trim(ls[i]).empty()) continue;
    const std::string context = "videos:" + std::to_string(i + 1);
    const auto cols = textio::split(ls[i], '\t');
    if (cols.size() < 3 || cols.size() > 4) throw DataError(context + ": expected id, movie, split, frame times");
    VideoRecord v;
    v.id = std::string(cols[0]);
    v.movie_id = std::string(cols[1]);
    v.split = parse_split(cols[2]);
    if (cols.size() == 4 && !cols[3].empty()) {
      for (auto t : textio::split(cols[3], ',')) v.frame_times.push_back(textio::parse_real(t, context));
    }
    videos.push_back(std::move(v));
  }
  return videos;
}

std::string format_videos(const std::vector<VideoRecord>& videos) {
  std::string out;
  for (const auto& v : videos) {
    out += v.id + "\t" + v.movie_id + "\t" + std::string(to_string(v.split)) + "\t";
    for (std::size_t i = 0; i < v.frame_times.size(); ++i) {
      if (i) out.push_back(',');
      out += textio::format_real(v.frame_times[i]);
    }
    out.push_back('\n');
  }
  return out;
}

SubclassVocabulary parse_vocab(std::string_view text) {
  std::vector<std::string> names;
  for (auto line : textio::lines(text)) {
    auto t = textio::trim(line);
    if (!t.empty()) names.emplace_back(t);
  }
  return SubclassVocabulary(std::move(names));
}

std::string format_vocab(const SubclassVocabulary& vocab) {
  std::string out;
  for (const auto& n : vocab.names()) out += n + "\n";
  return out;
}

Corpus load_corpus(const std::filesystem::path& dir) {
  Corpus c;
  c.videos = parse_videos(textio::read_file(dir / "videos.tsv"));
  c.labels = parse_annotations(textio::read_file(dir / "annotations.tsv"));
  c.vocab = parse_vocab(textio::read_file(dir / "vocab.txt"));
  if (std::filesystem::exists(dir / "splits.tsv")) {
    c.split = parse_split_file(textio::read_file(dir / "splits.tsv"));
  }
  c.validate();
  return c;
}

void write_corpus(const std::filesystem::path& dir, const Corpus& corpus) {
  textio::write_file_atomic(dir / "videos.tsv", format_videos(corpus.videos));
  textio::write_file_atomic(dir / "annotations.tsv", format_annotations(corpus.labels));
  textio::write_file_atomic(dir / "vocab.txt", format_vocab(corpus.vocab));
  if (corpus.split) textio::write_file_atomic(dir / "splits.tsv", format_split_file(*corpus.split));
}

}  // namespace vfuse
