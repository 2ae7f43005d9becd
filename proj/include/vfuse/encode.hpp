#pragma once

// Codebook fitting and the encodings that turn variable-size sets of local
// descriptors (or frame features) into one fixed-size vector per video.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vfuse/corpus.hpp"
#include "vfuse/matrix.hpp"

namespace vfuse {

// Local descriptors grouped per video; each video holds an (n x dim) matrix.
struct DescriptorSet {
  std::size_t descriptor_dim = 0;
  std::map<std::string, RowMatrix> per_video;

  std::size_t total() const;
};

// Descriptor file: feature-file layout with unit keys `videoid:descindex`.
DescriptorSet load_descriptors(const std::filesystem::path& path);
DescriptorSet parse_descriptors(std::string_view text, std::string_view source = "descriptors");
std::string format_descriptors(const DescriptorSet& set);

// Seeded uniform subsample of at most `max_rows` descriptors drawn from the
// listed videos (all videos when `video_ids` is empty), in a deterministic order.
RowMatrix sample_descriptors(const DescriptorSet& set, const std::vector<std::string>& video_ids,
                             std::size_t max_rows, std::uint64_t seed);

struct Codebook {
  RowMatrix centroids;  // K x dim

  std::size_t size() const { return centroids.rows(); }
  std::size_t dim() const { return centroids.cols(); }
  std::size_t nearest(RowView x) const;
};

struct KMeansOptions {
  int max_iterations = 100;
  double shift_tolerance = 1e-6;
};

// Lloyd's algorithm from a seeded k-means++ start. When `sse_trace` is given it
// receives the within-cluster SSE of each iteration's assignment (non-increasing).
Codebook fit_codebook(const RowMatrix& sample, std::size_t k, std::uint64_t seed, const KMeansOptions& options = {},
                      std::vector<double>* sse_trace = nullptr);

// L1-normalized histogram of nearest-centroid assignments; zeros for an empty set.
std::vector<double> encode_bow(const RowMatrix& descriptors, const Codebook& codebook);

inline constexpr double kVarianceFloor = 1e-4;

struct GmmModel {
  std::vector<double> weights;  // K, positive, summing to one
  RowMatrix means;              // K x dim
  RowMatrix variances;          // K x dim, each >= the floor

  std::size_t size() const { return weights.size(); }
  std::size_t dim() const { return means.cols(); }

  // Average per-descriptor log-likelihood.
  double mean_log_likelihood(const RowMatrix& x) const;
  // Posterior component probabilities for one descriptor.
  void posteriors(RowView x, std::span<double> out) const;
};

struct GmmOptions {
  int max_iterations = 100;
  double tolerance = 1e-6;
  double variance_floor = kVarianceFloor;
};

// EM with diagonal covariances, initialised from fit_codebook. Stops when the mean
// per-descriptor log-likelihood improves by less than the tolerance. The trace
// receives that mean log-likelihood for every parameter set visited.
GmmModel fit_gmm(const RowMatrix& sample, std::size_t k, std::uint64_t seed, const GmmOptions& options = {},
                 std::vector<double>* log_likelihood_trace = nullptr);

// Unnormalised Fisher Vector: K mean-gradient blocks followed by K
// variance-gradient blocks, each scaled by 1/(N sqrt(pi_k)) (1/(N sqrt(2 pi_k))
// for variances). Length 2*K*dim; zeros for an empty set.
std::vector<double> fisher_gradients(const RowMatrix& descriptors, const GmmModel& gmm);

// fisher_gradients followed by signed square root and L2 normalisation.
std::vector<double> encode_fv(const RowMatrix& descriptors, const GmmModel& gmm);

// Per-video mean of the frame rows. With `video_ids` given, every listed video
// must have frames; otherwise all videos present in the table are pooled.
FeatureTable avg_pool(const FeatureTable& frames, std::string pooled_name,
                      const std::vector<std::string>& video_ids = {});

// Checks the declared dimension of a bow/fv feature against its codebook.
void validate_dims(const FeatureSpec& spec, std::size_t components, std::size_t descriptor_dim);
void validate_dims(const FeatureSpec& spec, const Codebook& codebook);
void validate_dims(const FeatureSpec& spec, const GmmModel& gmm);

// `#type=kmeans #K=<K> #dim=<D>` then one centroid per line;
// `#type=gmm ...` then `weight m1..mD v1..vD` per line.
std::string format_codebook(const Codebook& codebook);
std::string format_gmm(const GmmModel& gmm);
Codebook parse_codebook(std::string_view text);
GmmModel parse_gmm(std::string_view text);
std::string codebook_type(std::string_view text);

}  // namespace vfuse
