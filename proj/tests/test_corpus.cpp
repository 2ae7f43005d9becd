#include <filesystem>
#include <random>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "vfuse/corpus.hpp"
#include "vfuse/error.hpp"
#include "vfuse/textio.hpp"

using namespace vfuse;

namespace {

FeatureSpec spec4() { return {"f4", Modality::image, Level::video, 4, Encoding::raw}; }

Corpus labeled_corpus(std::size_t violent, std::size_t blood) {
  Corpus c;
  c.vocab = SubclassVocabulary({"blood", "fight"});
  for (std::size_t i = 0; i < violent + 5; ++i) {
    VideoRecord v;
    v.id = "d" + std::to_string(1000 + i);
    v.movie_id = "m";
    v.split = Split::dev;
    c.videos.push_back(v);
    if (i < violent) {
      std::set<std::string> s = {"fight"};
      if (i < blood) s.insert("blood");
      c.labels.set(v.id, true, s);
    } else {
      c.labels.set(v.id, false);
    }
  }
  return c;
}

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("feature file parses rows of the declared width") {
    const std::string text = "#dim=4\na\t1 2 3 4\nb\t0.5 0 0 -1\nc\t1e-3 2 2 2\n";
    const FeatureTable t = parse_features(text, spec4());
    CHECK(t.size() == 3);
    CHECK(t.row(1)[3] == -1.0);
    CHECK(t.find({"c", -1}).value() == 2);
  }

  TEST_CASE("feature file dimension must match the spec") {
    const FeatureSpec g4k = *find_standard_feature("g4k_v");
    CHECK(g4k.dim == 1024);
    std::string ok = "#dim=1024\nv1\t";
    std::string bad = "#dim=1000\nv1\t";
    for (int i = 0; i < 1024; ++i) ok += (i ? " " : "") + std::string("0.5");
    for (int i = 0; i < 1000; ++i) bad += (i ? " " : "") + std::string("0.5");
    CHECK(parse_features(ok + "\n", g4k).size() == 1);
    CHECK_THROWS_AS(parse_features(bad + "\n", g4k), DataError);
  }

  TEST_CASE("feature file rejects non-finite values and repeated keys") {
    CHECK_THROWS_AS(parse_features("#dim=4\na\t1 2 nan 4\n", spec4()), DataError);
    CHECK_THROWS_AS(parse_features("#dim=4\na\t1 2 inf 4\n", spec4()), DataError);
    CHECK_THROWS_AS(parse_features("#dim=4\na\t1 2 3 4\na\t1 2 3 4\n", spec4()), DataError);
    CHECK_THROWS_AS(parse_features("#dim=4\na\t1 2 3\n", spec4()), DataError);
  }

  TEST_CASE("frame-level keys") {
    const FeatureSpec fs{"ff", Modality::image, Level::frame, 2, Encoding::raw};
    const FeatureTable t = parse_features("#dim=2\nv:1\t1 1\nv:0\t0 0\nw:0\t2 2\n", fs);
    const auto rows = t.rows_for_video("v");
    REQUIRE(rows.size() == 2);
    CHECK(t.key(rows[0]).frame == 0);
    CHECK(t.key(rows[1]).frame == 1);
    CHECK_THROWS_AS(parse_features("#dim=2\nv\t1 1\n", fs), DataError);
  }

  TEST_CASE("canonical feature files round-trip byte-identically") {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> nd;
    FeatureTable t(spec4());
    for (int i = 0; i < 20; ++i) {
      std::vector<double> v(4);
      for (double& x : v) x = nd(gen) * std::pow(10.0, static_cast<int>(gen() % 7) - 3);
      t.add({"v" + std::to_string(i), -1}, v);
    }
    const std::string text = format_features(t);
    CHECK(format_features(parse_features(text, spec4())) == text);
    const auto dir = std::filesystem::temp_directory_path() / "vfuse_corpus_rt";
    std::filesystem::create_directories(dir);
    write_features(dir / "f.tsv", t);
    CHECK(textio::read_file(dir / "f.tsv") == text);
    CHECK(format_features(load_features(dir / "f.tsv", spec4())) == text);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("standard features carry the published dimensions") {
    const std::map<std::string, std::size_t> dims = {
        {"vnet_f", 4096}, {"vnet_v", 4096}, {"gnet_f", 1024}, {"gnet_v", 1024}, {"g4k_f", 1024},
        {"g4k_v", 1024},  {"mfcc_b", 4096}, {"mfcc_fv", 19968}, {"mbh_b", 4000}, {"mbh_fv", 98304},
        {"hog_b", 4000},  {"hog_fv", 49152}, {"hof_b", 4000},  {"hof_fv", 55296}};
    CHECK(standard_features().size() == 14);
    for (const auto& [name, dim] : dims) CHECK(find_standard_feature(name)->dim == dim);
    CHECK_FALSE(find_standard_feature("nope"));
  }

  TEST_CASE("make_split sizes and determinism") {
    const auto ten = oracle::make_ids(10);
    const auto a = make_split(ten, 0.7, 42);
    CHECK(a.train_ids.size() == 7);
    CHECK(a.val_ids.size() == 3);
    std::set<std::string> all(a.train_ids.begin(), a.train_ids.end());
    for (const auto& v : a.val_ids) CHECK(all.insert(v).second);
    CHECK(all.size() == 10);
    CHECK(make_split(ten, 0.7, 42) == a);
    // Input order does not matter.
    std::vector<std::string> rev(ten.rbegin(), ten.rend());
    CHECK(make_split(rev, 0.7, 42) == a);
    CHECK_FALSE(make_split(ten, 0.7, 43) == a);

    std::vector<std::string> dev;
    for (int i = 0; i < 6144; ++i) dev.push_back("dev" + std::to_string(i));
    const auto big = make_split(dev, 0.7, 1);
    CHECK(big.train_ids.size() == 4301);
    CHECK(big.val_ids.size() == 1843);

    CHECK_THROWS_AS(make_split(ten, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(make_split(ten, 1.0, 1), ConfigError);
    CHECK_THROWS_AS(make_split({"a"}, 0.5, 1), DataError);
  }

  TEST_CASE("select_subclasses keeps counts strictly above the threshold") {
    CHECK(select_subclasses({{"a", 21}, {"b", 20}, {"c", 100}}, 20).names() == std::vector<std::string>{"c", "a"});
    CHECK(select_subclasses({{"a", 0}, {"b", 0}}, 20).empty());
    std::map<std::string, long> counts;
    std::mt19937_64 gen(5);
    for (int i = 0; i < 10; ++i) counts["hi" + std::to_string(i)] = 21 + static_cast<long>(gen() % 300);
    for (int i = 0; i < 85; ++i) counts["lo" + std::to_string(i)] = static_cast<long>(gen() % 21);
    const auto vocab = select_subclasses(counts, 20);
    CHECK(vocab.size() == 10);
    for (std::size_t i = 1; i < vocab.size(); ++i) CHECK(counts[vocab[i - 1]] >= counts[vocab[i]]);
  }

  TEST_CASE("vocabulary and labels validate their invariants") {
    CHECK_THROWS_AS(SubclassVocabulary({"a", "a"}), DataError);
    CHECK_THROWS_AS(SubclassVocabulary({""}), DataError);
    LabelStore l;
    CHECK_THROWS_AS(l.set("v", false, {"blood"}), DataError);
    l.set("v", true, {"blood"});
    CHECK(l.has("v", "violence"));
    CHECK(l.has("v", "blood"));
    CHECK_FALSE(l.has("v", "fight"));
    CHECK_THROWS_AS(parse_annotations("v\t0\tblood\n"), DataError);
  }

  TEST_CASE("occurrence rates") {
    const Corpus c = labeled_corpus(270, 27);
    const auto r = occurrence_rates(c, Split::dev);
    CHECK(r[0] == doctest::Approx(0.1));
    CHECK(r[1] == 1.0);
    Corpus none = labeled_corpus(0, 0);
    CHECK_THROWS_AS(occurrence_rates(none, Split::dev), DegenerateLabelsError);
    Corpus c2 = labeled_corpus(10, 0);
    CHECK(occurrence_rates(c2, Split::dev)[0] == 0.0);
  }

  TEST_CASE("co-occurrence matrix equals brute-force pairwise intersection") {
    const SubclassVocabulary vocab({"rope", "bind", "death", "fight"});
    LabelStore l;
    l.set("a", true, {"rope", "bind"});
    const auto m1 = cooccurrence_matrix(l, vocab);
    CHECK(m1[0][1] == 1);
    CHECK(m1[1][0] == 1);
    CHECK(m1[2][3] == 0);

    std::mt19937_64 gen(9);
    LabelStore big;
    std::vector<std::set<std::string>> sets;
    for (int i = 0; i < 200; ++i) {
      std::set<std::string> s;
      for (const auto& n : vocab.names()) {
        if (gen() % 3 == 0) s.insert(n);
      }
      sets.push_back(s);
      big.set("v" + std::to_string(i), !s.empty(), s);
    }
    const auto m = cooccurrence_matrix(big, vocab);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) {
        long count = 0;
        for (const auto& s : sets) count += s.count(vocab[i]) && s.count(vocab[j]);
        CHECK(m[i][j] == count);
        CHECK(m[i][j] == m[j][i]);
        CHECK(m[i][i] >= m[i][j]);
      }
    }
  }

  TEST_CASE("divergence is the L1 distance") {
    const std::vector<double> a = {0.2, 0.5}, b = {0.2, 0.5}, c = {1, 0}, d = {0, 1};
    CHECK(divergence(a, b) == 0.0);
    CHECK(divergence(c, d) == 2.0);
    const std::vector<double> e = {0.1, 0.4, 0.3}, f = {0.3, 0.1, 0.35};
    CHECK(divergence(e, f) == doctest::Approx(0.2 + 0.3 + 0.05));
    CHECK_THROWS_AS(divergence(c, e), DataError);
  }

  TEST_CASE("corpus files round-trip through a directory") {
    Corpus c = labeled_corpus(4, 2);
    c.videos[0].frame_times = {0.0, 0.5, 1.0};
    c.split = make_split(c.ids(Split::dev), 0.7, 3);
    const auto dir = std::filesystem::temp_directory_path() / "vfuse_corpus_dir";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    write_corpus(dir, c);
    const Corpus back = load_corpus(dir);
    CHECK(back.vocab == c.vocab);
    CHECK(back.split == c.split);
    CHECK(back.videos.size() == c.videos.size());
    CHECK(back.video(c.videos[0].id).frame_times == c.videos[0].frame_times);
    CHECK(format_annotations(back.labels) == format_annotations(c.labels));
    std::filesystem::remove_all(dir);
  }
}
