#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "vfuse/corpus.hpp"
#include "vfuse/encode.hpp"
#include "vfuse/error.hpp"

using namespace vfuse;

namespace {

RowMatrix gaussian_blobs(const std::vector<std::vector<double>>& centers, double sd, std::size_t per, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, sd);
  RowMatrix m(centers[0].size());
  for (std::size_t i = 0; i < per; ++i) {
    for (const auto& c : centers) {
      std::vector<double> x = c;
      for (double& v : x) v += nd(gen);
      m.append(x);
    }
  }
  return m;
}

std::vector<double> column_mean(const RowMatrix& m, std::size_t first, std::size_t step) {
  std::vector<double> mean(m.cols(), 0.0);
  std::size_t n = 0;
  for (std::size_t r = first; r < m.rows(); r += step, ++n) {
    for (std::size_t d = 0; d < m.cols(); ++d) mean[d] += m.row(r)[d];
  }
  for (double& v : mean) v /= static_cast<double>(n);
  return mean;
}

double l2(const std::vector<double>& v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); }

GmmModel single_component(std::vector<double> mean, std::vector<double> var) {
  GmmModel g;
  g.weights = {1.0};
  g.means = RowMatrix(mean.size());
  g.means.append(mean);
  g.variances = RowMatrix(var.size());
  g.variances.append(var);
  return g;
}

}  // namespace

TEST_SUITE("encode") {
  TEST_CASE("k-means recovers well-separated cluster means") {
    const RowMatrix x = gaussian_blobs({{-10, 0}, {10, 5}}, 0.5, 200, 1);
    const Codebook cb = fit_codebook(x, 2, 42);
    const auto m0 = column_mean(x, 0, 2), m1 = column_mean(x, 1, 2);
    const std::size_t i0 = cb.nearest(m0), i1 = cb.nearest(m1);
    CHECK(i0 != i1);
    for (std::size_t d = 0; d < 2; ++d) {
      CHECK(std::abs(cb.centroids.row(i0)[d] - m0[d]) < 1e-6);
      CHECK(std::abs(cb.centroids.row(i1)[d] - m1[d]) < 1e-6);
    }
  }

  TEST_CASE("k-means with one centroid returns the global mean") {
    const RowMatrix x = gaussian_blobs({{1, 2, 3}}, 1.0, 50, 2);
    const Codebook cb = fit_codebook(x, 1, 7);
    const auto mean = column_mean(x, 0, 1);
    for (std::size_t d = 0; d < 3; ++d) CHECK(cb.centroids.row(0)[d] == doctest::Approx(mean[d]).epsilon(1e-12));
  }

  TEST_CASE("k-means is deterministic and its SSE never increases") {
    const RowMatrix x = gaussian_blobs({{0, 0}, {3, 0}, {0, 3}, {3, 3}}, 1.0, 60, 3);
    std::vector<double> trace;
    const Codebook a = fit_codebook(x, 4, 9, {}, &trace);
    const Codebook b = fit_codebook(x, 4, 9);
    CHECK(a.centroids.data() == b.centroids.data());
    REQUIRE(trace.size() >= 1);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-9);
  }

  TEST_CASE("k-means needs at least K distinct points") {
    RowMatrix x(2);
    for (int i = 0; i < 10; ++i) x.append(std::vector<double>{1.0, 1.0});
    x.append(std::vector<double>{2.0, 2.0});
    CHECK_THROWS_AS(fit_codebook(x, 3, 1), DataError);
    CHECK_NOTHROW(fit_codebook(x, 2, 1));
  }

  TEST_CASE("bag of words") {
    RowMatrix c(2);
    for (int i = 0; i < 5; ++i) c.append(std::vector<double>{10.0 * i, 0.0});
    const Codebook cb{c};
    RowMatrix one(2);
    one.append(std::vector<double>{30.0, 0.0});
    const auto h = encode_bow(one, cb);
    CHECK(h == std::vector<double>{0, 0, 0, 1, 0});
    CHECK(encode_bow(RowMatrix(2), cb) == std::vector<double>(5, 0.0));
    const RowMatrix many = gaussian_blobs({{0, 0}, {20, 1}, {41, -1}}, 3.0, 17, 4);
    const auto hm = encode_bow(many, cb);
    CHECK(std::accumulate(hm.begin(), hm.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    for (double v : hm) CHECK(v >= 0.0);
    CHECK_THROWS_AS(encode_bow(RowMatrix(3, 3, 0.0), cb), DataError);
  }

  TEST_CASE("GMM recovers two separated Gaussians") {
    const double sd = 0.7;
    const std::size_t per = 400;
    const RowMatrix x = gaussian_blobs({{-5, 0}, {5, 2}}, sd, per, 5);
    std::vector<double> trace;
    const GmmModel g = fit_gmm(x, 2, 11, {}, &trace);
    const double se = sd / std::sqrt(static_cast<double>(per));
    const std::vector<std::vector<double>> truth = {{-5, 0}, {5, 2}};
    for (const auto& t : truth) {
      std::size_t best = 0;
      double bd = 1e300;
      for (std::size_t k = 0; k < 2; ++k) {
        const double d = squared_distance(g.means.row(k), t);
        if (d < bd) bd = d, best = k;
      }
      for (std::size_t d = 0; d < 2; ++d) CHECK(std::abs(g.means.row(best)[d] - t[d]) < 3.0 * se);
    }
    CHECK(g.weights[0] + g.weights[1] == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1] - 1e-9);
  }

  TEST_CASE("single-component GMM is the sample mean and floored variance") {
    RowMatrix x = gaussian_blobs({{1, -1}}, 2.0, 100, 6);
    x.append(std::vector<double>{1.0, -1.0});
    const GmmModel g = fit_gmm(x, 1, 3);
    const auto mean = column_mean(x, 0, 1);
    for (std::size_t d = 0; d < 2; ++d) {
      double var = 0.0;
      for (std::size_t r = 0; r < x.rows(); ++r) var += std::pow(x.row(r)[d] - mean[d], 2);
      var /= static_cast<double>(x.rows());
      CHECK(g.means.row(0)[d] == doctest::Approx(mean[d]).epsilon(1e-9));
      CHECK(g.variances.row(0)[d] == doctest::Approx(var).epsilon(1e-9));
    }
    RowMatrix flat(1);
    for (int i = 0; i < 5; ++i) flat.append(std::vector<double>{static_cast<double>(i) * 1e-5});
    CHECK(fit_gmm(flat, 1, 1).variances.row(0)[0] == kVarianceFloor);
  }

  TEST_CASE("Fisher vector length, normalization and invariances") {
    const RowMatrix x = gaussian_blobs({{0, 0, 0}, {4, 4, 4}}, 1.0, 100, 7);
    const GmmModel g = fit_gmm(x, 2, 5);
    const RowMatrix v = gaussian_blobs({{1, 0, 2}}, 1.5, 13, 8);
    const auto fv = encode_fv(v, g);
    CHECK(fv.size() == 2 * 2 * 3);
    CHECK(l2(fv) == doctest::Approx(1.0).epsilon(1e-12));
    RowMatrix rev(3);
    for (std::size_t r = v.rows(); r-- > 0;) rev.append(v.row(r));
    const auto fv2 = encode_fv(rev, g);
    for (std::size_t i = 0; i < fv.size(); ++i) CHECK(fv[i] == doctest::Approx(fv2[i]).epsilon(1e-12));
    CHECK(encode_fv(RowMatrix(3), g) == std::vector<double>(12, 0.0));
    CHECK_THROWS_AS(encode_fv(RowMatrix(2, 2, 0.0), g), DataError);
  }

  TEST_CASE("mean gradient vanishes when every descriptor sits at the mean") {
    const GmmModel g = single_component({1.5, -2.0, 0.25}, {0.5, 2.0, 1.0});
    RowMatrix at_mean(3);
    for (int i = 0; i < 9; ++i) at_mean.append(g.means.row(0));
    const auto grad = fisher_gradients(at_mean, g);
    for (std::size_t d = 0; d < 3; ++d) CHECK(grad[d] == 0.0);
    // Variance block: (0 - 1) / sqrt(2) per dimension.
    for (std::size_t d = 3; d < 6; ++d) CHECK(grad[d] == doctest::Approx(-1.0 / std::sqrt(2.0)));
  }

  TEST_CASE("Fisher gradient of samples from the model shrinks with N") {
    const GmmModel g = single_component({0.0, 1.0}, {1.0, 4.0});
    for (unsigned seed = 0; seed < 5; ++seed) {
      std::mt19937_64 gen(100 + seed);
      std::normal_distribution<double> nd;
      auto draw = [&](std::size_t n) {
        RowMatrix m(2);
        for (std::size_t i = 0; i < n; ++i) m.append(std::vector<double>{nd(gen), 1.0 + 2.0 * nd(gen)});
        return m;
      };
      CHECK(l2(fisher_gradients(draw(10000), g)) < l2(fisher_gradients(draw(100), g)));
    }
  }

  TEST_CASE("Fisher vector dimensions of the standard features") {
    const std::vector<std::pair<std::string, std::size_t>> d = {
        {"mfcc_fv", 39}, {"mbh_fv", 192}, {"hog_fv", 96}, {"hof_fv", 108}};
    const std::vector<std::size_t> expected = {19968, 98304, 49152, 55296};
    for (std::size_t i = 0; i < d.size(); ++i) {
      const FeatureSpec s = *find_standard_feature(d[i].first);
      CHECK(2 * 256 * d[i].second == expected[i]);
      CHECK(s.dim == expected[i]);
      CHECK_NOTHROW(validate_dims(s, 256, d[i].second));
    }
    CHECK_THROWS_AS(validate_dims(*find_standard_feature("mbh_fv"), 128, 192), DataError);
    CHECK_NOTHROW(validate_dims(*find_standard_feature("mbh_b"), 4000, 192));
    CHECK_THROWS_AS(validate_dims(*find_standard_feature("mfcc_b"), 4000, 39), DataError);
  }

  TEST_CASE("average pooling") {
    const FeatureSpec fs{"ff", Modality::image, Level::frame, 2, Encoding::raw};
    FeatureTable t(fs);
    t.add({"a", 0}, std::vector<double>{1, 3});
    t.add({"a", 1}, std::vector<double>{3, 1});
    t.add({"b", 0}, std::vector<double>{7, -2});
    const FeatureTable p = avg_pool(t, "fv_pooled");
    CHECK(p.spec().level == Level::video);
    CHECK(p.spec().dim == 2);
    CHECK(std::vector<double>(p.row(*p.find({"a", -1})).begin(), p.row(*p.find({"a", -1})).end()) == std::vector<double>{2, 2});
    CHECK(p.row(*p.find({"b", -1}))[1] == -2.0);
    FeatureTable scaled(fs);
    for (std::size_t r = 0; r < t.size(); ++r) {
      std::vector<double> v(t.row(r).begin(), t.row(r).end());
      for (double& x : v) x *= -2.5;
      scaled.add(t.key(r), v);
    }
    const FeatureTable ps = avg_pool(scaled, "s");
    for (std::size_t r = 0; r < p.size(); ++r) {
      for (std::size_t d = 0; d < 2; ++d) CHECK(ps.row(r)[d] == doctest::Approx(-2.5 * p.row(r)[d]));
    }
    CHECK_THROWS_AS(avg_pool(t, "x", {"a", "missing"}), DataError);
  }

  TEST_CASE("codebook and GMM files round-trip") {
    const RowMatrix x = gaussian_blobs({{0, 0}, {5, 5}}, 1.0, 30, 9);
    const Codebook cb = fit_codebook(x, 2, 1);
    const std::string t = format_codebook(cb);
    CHECK(codebook_type(t) == "kmeans");
    CHECK(parse_codebook(t).centroids.data() == cb.centroids.data());
    const GmmModel g = fit_gmm(x, 2, 1);
    const std::string tg = format_gmm(g);
    CHECK(codebook_type(tg) == "gmm");
    const GmmModel gb = parse_gmm(tg);
    CHECK(gb.weights == g.weights);
    CHECK(gb.means.data() == g.means.data());
    CHECK(gb.variances.data() == g.variances.data());
  }

  TEST_CASE("descriptor sampling is seeded and bounded") {
    DescriptorSet s;
    s.descriptor_dim = 2;
    for (int v = 0; v < 5; ++v) {
      RowMatrix m(2);
      for (int i = 0; i < 10; ++i) m.append(std::vector<double>{static_cast<double>(v), static_cast<double>(i)});
      s.per_video.emplace("v" + std::to_string(v), std::move(m));
    }
    const RowMatrix a = sample_descriptors(s, {}, 12, 4);
    CHECK(a.rows() == 12);
    CHECK(sample_descriptors(s, {}, 12, 4).data() == a.data());
    const RowMatrix only = sample_descriptors(s, {"v1"}, 100, 4);
    CHECK(only.rows() == 10);
    for (std::size_t r = 0; r < only.rows(); ++r) CHECK(only.row(r)[0] == 1.0);
    CHECK(parse_descriptors(format_descriptors(s)).total() == 50);
  }
}
