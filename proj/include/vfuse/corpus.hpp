#pragma once

// Corpus data model: videos, labels, feature tables, splits and the
// subclass vocabulary, plus the text formats they are stored in.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vfuse/matrix.hpp"

namespace vfuse {

enum class Split { dev, test };
enum class Modality { image, audio, motion };
enum class Level { frame, video };
enum class Encoding { raw, bow, fv, avgpool };

std::string_view to_string(Split s);
std::string_view to_string(Modality m);
std::string_view to_string(Level l);
std::string_view to_string(Encoding e);
Split parse_split(std::string_view s);
Modality parse_modality(std::string_view s);
Level parse_level(std::string_view s);
Encoding parse_encoding(std::string_view s);

struct VideoRecord {
  std::string id;
  std::string movie_id;
  Split split = Split::dev;
  // Seconds, strictly increasing. Empty for corpora with video-level data only.
  std::vector<double> frame_times;
};

class SubclassVocabulary {
 public:
  SubclassVocabulary() = default;
  // Throws DataError on empty or repeated names.
  explicit SubclassVocabulary(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  bool empty() const { return names_.empty(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& operator[](std::size_t i) const { return names_[i]; }
  std::optional<std::size_t> index_of(std::string_view name) const;

  bool operator==(const SubclassVocabulary&) const = default;

 private:
  std::vector<std::string> names_;
};

// Per-video violence flag and subclass set. Subclasses annotate violent
// videos only; set() rejects subclasses on a non-violent video.
class LabelStore {
 public:
  void set(const std::string& video_id, bool violence, std::set<std::string> subclasses = {});

  bool contains(std::string_view video_id) const;
  bool violence(std::string_view video_id) const;
  const std::set<std::string>& subclasses(std::string_view video_id) const;
  bool has(std::string_view video_id, std::string_view class_name) const;

  std::vector<std::string> ids() const;
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    bool violence = false;
    std::set<std::string> subclasses;
  };
  const Entry& entry(std::string_view video_id) const;

  std::map<std::string, Entry, std::less<>> entries_;
};

// Class name used for the holistic (non-subclass) detector.
inline constexpr std::string_view kViolenceClass = "violence";

struct FeatureSpec {
  std::string name;
  Modality modality = Modality::image;
  Level level = Level::video;
  std::size_t dim = 0;
  Encoding encoding = Encoding::raw;

  bool operator==(const FeatureSpec&) const = default;
};

// The fourteen features of the reference system at their full dimensionality.
// BoW sizes are codebook sizes (4,096 audio words, 4,000 motion words); FV sizes
// are 2*K*D with K = 256 and descriptor dims 39 (MFCC), 192 (MBH), 96 (HOG), 108 (HOF).
const std::vector<FeatureSpec>& standard_features();
std::optional<FeatureSpec> find_standard_feature(std::string_view name);

// How a corpus feature is obtained. raw/avgpool features are read from
// `features/<name>.tsv`; bow/fv features are encoded from the descriptor file
// `descriptors/<source>.tsv` with `components` words or Gaussians.
struct FeatureRecipe {
  FeatureSpec spec;
  std::string source;
  std::size_t components = 0;

  std::string file() const;
};

struct UnitKey {
  std::string video_id;
  // -1 for video-level rows.
  long frame = -1;

  bool operator==(const UnitKey&) const = default;
  auto operator<=>(const UnitKey&) const = default;

  std::string str() const;
};

// Dense vectors per unit for one feature. Rows keep insertion order.
class FeatureTable {
 public:
  FeatureTable() = default;
  explicit FeatureTable(FeatureSpec spec);

  // Throws DataError on a width mismatch, a non-finite value or a repeated key.
  void add(UnitKey key, RowView values);

  const FeatureSpec& spec() const { return spec_; }
  std::size_t size() const { return keys_.size(); }
  const UnitKey& key(std::size_t i) const { return keys_[i]; }
  RowView row(std::size_t i) const { return rows_.row(i); }
  const RowMatrix& matrix() const { return rows_; }

  std::optional<std::size_t> find(const UnitKey& key) const;
  // Row indices of a video's units, ordered by frame index.
  std::vector<std::size_t> rows_for_video(std::string_view video_id) const;
  // Distinct video ids in first-appearance order.
  std::vector<std::string> video_ids() const;

 private:
  FeatureSpec spec_;
  std::vector<UnitKey> keys_;
  RowMatrix rows_;
  std::map<UnitKey, std::size_t> index_;
  std::map<std::string, std::vector<std::size_t>, std::less<>> by_video_;
};

// Feature file: `#dim=<D>` then `unit_key<TAB>v1 ... vD` per row.
FeatureTable load_features(const std::filesystem::path& path, const FeatureSpec& spec);
FeatureTable parse_features(std::string_view text, const FeatureSpec& spec, std::string_view source = "features");
std::string format_features(const FeatureTable& table);
void write_features(const std::filesystem::path& path, const FeatureTable& table);

struct SplitAssignment {
  std::vector<std::string> train_ids;  // sorted
  std::vector<std::string> val_ids;    // sorted
  std::uint64_t seed = 0;

  bool operator==(const SplitAssignment&) const = default;
};

// Seeded permutation of the lexicographically sorted ids, then a prefix split
// with round(fraction * n) training ids (clamped to [1, n-1]).
SplitAssignment make_split(std::vector<std::string> dev_ids, double fraction, std::uint64_t seed);

// Concepts whose count is strictly above `threshold`, by descending count then name.
SubclassVocabulary select_subclasses(const std::map<std::string, long>& candidate_counts, long threshold);

struct Corpus {
  std::vector<VideoRecord> videos;
  LabelStore labels;
  SubclassVocabulary vocab;
  std::optional<SplitAssignment> split;

  std::vector<std::string> ids(Split s) const;
  const VideoRecord& video(std::string_view id) const;
  // Checks id uniqueness, frame-time ordering, label coverage and vocabulary membership.
  void validate() const;
};

// Fraction of the split's violent videos labeled with each subclass.
std::vector<double> occurrence_rates(const Corpus& corpus, Split split);

// Symmetric count matrix: [i][j] = videos labeled with both i and j; diagonal = per-subclass counts.
std::vector<std::vector<long>> cooccurrence_matrix(const LabelStore& labels, const SubclassVocabulary& vocab);

// L1 distance between two occurrence-rate vectors.
double divergence(std::span<const double> rates_a, std::span<const double> rates_b);

// Annotation file: `video_id<TAB>0|1<TAB>name,name,...`.
LabelStore parse_annotations(std::string_view text);
std::string format_annotations(const LabelStore& labels);

// Split file: `video_id<TAB>train|val`.
SplitAssignment parse_split_file(std::string_view text);
std::string format_split_file(const SplitAssignment& split);

// Video file: `video_id<TAB>movie_id<TAB>dev|test<TAB>t0,t1,...`.
std::vector<VideoRecord> parse_videos(std::string_view text);
std::string format_videos(const std::vector<VideoRecord>& videos);

// Vocabulary file: one subclass name per line.
SubclassVocabulary parse_vocab(std::string_view text);
std::string format_vocab(const SubclassVocabulary& vocab);

// Reads videos.tsv, annotations.tsv, vocab.txt and (if present) splits.tsv from a corpus directory.
Corpus load_corpus(const std::filesystem::path& dir);
void write_corpus(const std::filesystem::path& dir, const Corpus& corpus);

}  // namespace vfuse
