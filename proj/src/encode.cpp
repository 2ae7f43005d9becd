#include "vfuse/encode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>

#include "vfuse/error.hpp"
#include "vfuse/random.hpp"
#include "vfuse/textio.hpp"

namespace vfuse {

std::size_t DescriptorSet::total() const {
  std::size_t n = 0;
  for (const auto& [_, m] : per_video) n += m.rows();
  return n;
}

DescriptorSet parse_descriptors(std::string_view text, std::string_view source) {
  const auto ls = textio::lines(text);
  if (ls.empty()) throw DataError(std::string(source) + ": empty descriptor file");
  const auto header = textio::parse_header(ls[0]);
  auto it = header.find("dim");
  if (it == header.end()) throw DataError(std::string(source) + ": missing #dim header");
  const long long dim = textio::parse_integer(it->second, source);
  if (dim <= 0) throw DataError(std::string(source) + ": descriptor dimension must be positive");
  FeatureSpec spec{"descriptors", Modality::audio, Level::frame, static_cast<std::size_t>(dim), Encoding::raw};
  const FeatureTable table = parse_features(text, spec, source);
  DescriptorSet set;
  set.descriptor_dim = spec.dim;
  for (const auto& id : table.video_ids()) {
    RowMatrix m(spec.dim);
    const auto rows = table.rows_for_video(id);
    m.reserve(rows.size());
    for (std::size_t r : rows) m.append(table.row(r));
    set.per_video.emplace(id, std::move(m));
  }
  return set;
}

DescriptorSet load_descriptors(const std::filesystem::path& path) {
  return parse_descriptors(textio::read_file(path), path.string());
}

std::string format_descriptors(const DescriptorSet& set) {
  std::string out = "#dim=" + std::to_string(set.descriptor_dim) + "\n";
  for (const auto& [id, m] : set.per_video) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      out += id + ":" + std::to_string(i) + "\t";
      textio::append_reals(out, m.row(i));
      out.push_back('\n');
    }
  }
  return out;
}

RowMatrix sample_descriptors(const DescriptorSet& set, const std::vector<std::string>& video_ids,
                             std::size_t max_rows, std::uint64_t seed) {
  std::vector<const RowMatrix*> sources;
  if (video_ids.empty()) {
    for (const auto& [_, m] : set.per_video) sources.push_back(&m);
  } else {
    std::vector<std::string> sorted = video_ids;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& id : sorted) {
      auto it = set.per_video.find(id);
      if (it != set.per_video.end()) sources.push_back(&it->second);
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> refs;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    for (std::size_t r = 0; r < sources[s]->rows(); ++r) refs.emplace_back(s, r);
  }
  RowMatrix out(set.descriptor_dim);
  if (refs.size() <= max_rows) {
    out.reserve(refs.size());
    for (auto [s, r] : refs) out.append(sources[s]->row(r));
    return out;
  }
  Rng rng(seed);
  auto picked = rng.sample_indices(refs.size(), max_rows);
  std::sort(picked.begin(), picked.end());
  out.reserve(picked.size());
  for (std::size_t p : picked) out.append(sources[refs[p].first]->row(refs[p].second));
  return out;
}

// ---------------------------------------------------------------------------

std::size_t Codebook::nearest(RowView x) const {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < centroids.rows(); ++k) {
    const double d = squared_distance(x, centroids.row(k));
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

namespace {

std::size_t count_distinct_rows(const RowMatrix& m) {
  std::vector<std::size_t> order(m.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto less = [&](std::size_t a, std::size_t b) {
    auto ra = m.row(a), rb = m.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  };
  std::sort(order.begin(), order.end(), less);
  std::size_t distinct = order.empty() ? 0 : 1;
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (less(order[i - 1], order[i])) ++distinct;
  }
  return distinct;
}

void check_fit_input(const RowMatrix& sample, std::size_t k, const char* what) {
  if (k == 0) throw ConfigError(std::string(what) + ": K must be at least 1");
  if (sample.cols() == 0) throw DataError(std::string(what) + ": descriptors have zero dimension");
  for (double v : sample.data()) {
    if (!std::isfinite(v)) throw DataError(std::string(what) + ": non-finite descriptor value");
  }
  const std::size_t distinct = count_distinct_rows(sample);
  if (distinct < k) {
    throw DataError(std::string(what) + ": " + std::to_string(distinct) + " distinct descriptors, need at least K=" +
                    std::to_string(k));
  }
}

RowMatrix kmeans_plus_plus(const RowMatrix& x, std::size_t k, Rng& rng) {
  const std::size_t n = x.rows();
  RowMatrix centers(x.cols());
  centers.reserve(k);
  centers.append(x.row(rng.below(n)));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(x.row(i), centers.row(0));
  while (centers.rows() < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    double target = rng.uniform() * total;
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      pick = i;
      target -= d2[i];
      if (target < 0.0) break;
    }
    centers.append(x.row(pick));
    const auto c = centers.row(centers.rows() - 1);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(x.row(i), c));
  }
  return centers;
}

}  // namespace

Codebook fit_codebook(const RowMatrix& sample, std::size_t k, std::uint64_t seed, const KMeansOptions& options,
                      std::vector<double>* sse_trace) {
  check_fit_input(sample, k, "fit_codebook");
  Rng rng(seed);
  Codebook cb{kmeans_plus_plus(sample, k, rng)};
  const std::size_t n = sample.rows();
  const std::size_t dim = sample.cols();
  std::vector<std::size_t> assign(n);
  RowMatrix sums(k, dim);
  std::vector<std::size_t> counts(k);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      assign[i] = cb.nearest(sample.row(i));
      sse += squared_distance(sample.row(i), cb.centroids.row(assign[i]));
    }
    if (sse_trace) sse_trace->push_back(sse);

    std::fill(counts.begin(), counts.end(), 0);
    sums = RowMatrix(k, dim);
    for (std::size_t i = 0; i < n; ++i) {
      auto s = sums.row(assign[i]);
      auto xi = sample.row(i);
      for (std::size_t d = 0; d < dim; ++d) s[d] += xi[d];
      ++counts[assign[i]];
    }
    double max_shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      auto centroid = cb.centroids.row(c);
      auto s = sums.row(c);
      double shift = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double updated = s[d] / static_cast<double>(counts[c]);
        shift += (updated - centroid[d]) * (updated - centroid[d]);
        centroid[d] = updated;
      }
      max_shift = std::max(max_shift, std::sqrt(shift));
    }
    if (max_shift < options.shift_tolerance) break;
  }
  return cb;
}

std::vector<double> encode_bow(const RowMatrix& descriptors, const Codebook& codebook) {
  std::vector<double> hist(codebook.size(), 0.0);
  if (descriptors.empty()) return hist;
  if (descriptors.cols() != codebook.dim()) {
    throw DataError("encode_bow: descriptor dim " + std::to_string(descriptors.cols()) + " != codebook dim " +
                    std::to_string(codebook.dim()));
  }
  for (std::size_t i = 0; i < descriptors.rows(); ++i) hist[codebook.nearest(descriptors.row(i))] += 1.0;
  const double n = static_cast<double>(descriptors.rows());
  for (double& h : hist) h /= n;
  return hist;
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Per-component log(pi_k) - 0.5 * sum_d log(2 pi sigma^2_kd).
std::vector<double> component_constants(const GmmModel& g) {
  std::vector<double> c(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    double s = std::log(g.weights[k]);
    for (double v : g.variances.row(k)) s -= 0.5 * (kLog2Pi + std::log(v));
    c[k] = s;
  }
  return c;
}

// Fills log(pi_k N(x | k)) for every k and returns the log-sum-exp.
double joint_log_probs(const GmmModel& g, const std::vector<double>& consts, RowView x, std::span<double> out) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < g.size(); ++k) {
    auto mu = g.means.row(k);
    auto var = g.variances.row(k);
    double q = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
      const double diff = x[d] - mu[d];
      q += diff * diff / var[d];
    }
    out[k] = consts[k] - 0.5 * q;
    mx = std::max(mx, out[k]);
  }
  double s = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) s += std::exp(out[k] - mx);
  return mx + std::log(s);
}

void check_gmm_dims(const GmmModel& g, const RowMatrix& x, const char* what) {
  if (!x.empty() && x.cols() != g.dim()) {
    throw DataError(std::string(what) + ": descriptor dim " + std::to_string(x.cols()) + " != model dim " +
                    std::to_string(g.dim()));
  }
}

}  // namespace

double GmmModel::mean_log_likelihood(const RowMatrix& x) const {
  check_gmm_dims(*this, x, "mean_log_likelihood");
  if (x.empty()) return 0.0;
  const auto consts = component_constants(*this);
  std::vector<double> lp(size());
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) total += joint_log_probs(*this, consts, x.row(i), lp);
  return total / static_cast<double>(x.rows());
}

void GmmModel::posteriors(RowView x, std::span<double> out) const {
  const auto consts = component_constants(*this);
  const double lse = joint_log_probs(*this, consts, x, out);
  for (double& v : out) v = std::exp(v - lse);
}

GmmModel fit_gmm(const RowMatrix& sample, std::size_t k, std::uint64_t seed, const GmmOptions& options,
                 std::vector<double>* log_likelihood_trace) {
  check_fit_input(sample, k, "fit_gmm");
  const std::size_t n = sample.rows();
  const std::size_t dim = sample.cols();
  const double floor = options.variance_floor;

  // Initialise from a k-means partition.
  const Codebook cb = fit_codebook(sample, k, derive_seed(seed, "gmm/init"));
  std::vector<double> global_mean(dim, 0.0), global_var(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dim; ++d) global_mean[d] += sample.row(i)[d];
  }
  for (double& m : global_mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = sample.row(i)[d] - global_mean[d];
      global_var[d] += diff * diff;
    }
  }
  for (double& v : global_var) v = std::max(v / static_cast<double>(n), floor);

  GmmModel g;
  g.weights.assign(k, 0.0);
  g.means = cb.centroids;
  g.variances = RowMatrix(k, dim);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = cb.nearest(sample.row(i));
    ++counts[c];
    auto var = g.variances.row(c);
    auto mu = g.means.row(c);
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = sample.row(i)[d] - mu[d];
      var[d] += diff * diff;
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    auto var = g.variances.row(c);
    for (std::size_t d = 0; d < dim; ++d) {
      var[d] = counts[c] > 1 ? std::max(var[d] / static_cast<double>(counts[c]), floor) : global_var[d];
    }
    g.weights[c] = std::max<double>(static_cast<double>(counts[c]), 1.0);
  }
  const double wsum = std::accumulate(g.weights.begin(), g.weights.end(), 0.0);
  for (double& w : g.weights) w /= wsum;

  RowMatrix resp(n, k);
  std::vector<double> nk(k);
  double previous = -std::numeric_limits<double>::infinity();
  for (int iter = 0;; ++iter) {
    // E-step
    const auto consts = component_constants(g);
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto r = resp.row(i);
      const double lse = joint_log_probs(g, consts, sample.row(i), r);
      ll += lse;
      for (double& v : r) v = std::exp(v - lse);
    }
    ll /= static_cast<double>(n);
    if (log_likelihood_trace) log_likelihood_trace->push_back(ll);
    if (iter > 0 && ll - previous < options.tolerance) break;
    if (iter >= options.max_iterations) break;
    previous = ll;

    // M-step
    std::fill(nk.begin(), nk.end(), 0.0);
    RowMatrix means(k, dim), vars(k, dim);
    for (std::size_t i = 0; i < n; ++i) {
      auto r = resp.row(i);
      auto x = sample.row(i);
      for (std::size_t c = 0; c < k; ++c) {
        nk[c] += r[c];
        auto m = means.row(c);
        for (std::size_t d = 0; d < dim; ++d) m[d] += r[c] * x[d];
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (nk[c] <= std::numeric_limits<double>::min()) {
        // Collapsed component: keep its parameters.
        auto m = means.row(c);
        auto mu = g.means.row(c);
        std::copy(mu.begin(), mu.end(), m.begin());
        continue;
      }
      for (double& v : means.row(c)) v /= nk[c];
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto r = resp.row(i);
      auto x = sample.row(i);
      for (std::size_t c = 0; c < k; ++c) {
        auto m = means.row(c);
        auto v = vars.row(c);
        for (std::size_t d = 0; d < dim; ++d) {
          const double diff = x[d] - m[d];
          v[d] += r[c] * diff * diff;
        }
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      auto v = vars.row(c);
      auto old = g.variances.row(c);
      for (std::size_t d = 0; d < dim; ++d) {
        v[d] = nk[c] <= std::numeric_limits<double>::min() ? old[d] : std::max(v[d] / nk[c], floor);
      }
    }
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      g.weights[c] = std::max(nk[c], std::numeric_limits<double>::min());
      total += g.weights[c];
    }
    for (double& w : g.weights) w /= total;
    g.means = std::move(means);
    g.variances = std::move(vars);
  }
  return g;
}

std::vector<double> fisher_gradients(const RowMatrix& descriptors, const GmmModel& gmm) {
  const std::size_t k = gmm.size();
  const std::size_t dim = gmm.dim();
  std::vector<double> fv(2 * k * dim, 0.0);
  if (descriptors.empty()) return fv;
  check_gmm_dims(gmm, descriptors, "encode_fv");
  const auto consts = component_constants(gmm);
  std::vector<double> post(k);
  std::vector<double> inv_sigma(k * dim);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = 0; d < dim; ++d) inv_sigma[c * dim + d] = 1.0 / std::sqrt(gmm.variances.row(c)[d]);
  }
  for (std::size_t i = 0; i < descriptors.rows(); ++i) {
    auto x = descriptors.row(i);
    const double lse = joint_log_probs(gmm, consts, x, post);
    for (std::size_t c = 0; c < k; ++c) {
      const double g = std::exp(post[c] - lse);
      if (g == 0.0) continue;
      auto mu = gmm.means.row(c);
      double* mean_block = fv.data() + c * dim;
      double* var_block = fv.data() + (k + c) * dim;
      for (std::size_t d = 0; d < dim; ++d) {
        const double z = (x[d] - mu[d]) * inv_sigma[c * dim + d];
        mean_block[d] += g * z;
        var_block[d] += g * (z * z - 1.0);
      }
    }
  }
  const double n = static_cast<double>(descriptors.rows());
  for (std::size_t c = 0; c < k; ++c) {
    const double sm = 1.0 / (n * std::sqrt(gmm.weights[c]));
    const double sv = 1.0 / (n * std::sqrt(2.0 * gmm.weights[c]));
    for (std::size_t d = 0; d < dim; ++d) {
      fv[c * dim + d] *= sm;
      fv[(k + c) * dim + d] *= sv;
    }
  }
  return fv;
}

std::vector<double> encode_fv(const RowMatrix& descriptors, const GmmModel& gmm) {
  std::vector<double> fv = fisher_gradients(descriptors, gmm);
  double norm2 = 0.0;
  for (double& v : fv) {
    v = std::copysign(std::sqrt(std::abs(v)), v);
    norm2 += v * v;
  }
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& v : fv) v *= inv;
  }
  return fv;
}

// ---------------------------------------------------------------------------

FeatureTable avg_pool(const FeatureTable& frames, std::string pooled_name, const std::vector<std::string>& video_ids) {
  if (frames.spec().level != Level::frame) {
    throw DataError("avg_pool: feature " + frames.spec().name + " is not frame-level");
  }
  FeatureSpec spec = frames.spec();
  spec.name = std::move(pooled_name);
  spec.level = Level::video;
  spec.encoding = Encoding::avgpool;
  FeatureTable out(spec);
  std::vector<std::string> ids = video_ids.empty() ? frames.video_ids() : video_ids;
  std::sort(ids.begin(), ids.end());
  std::vector<double> acc(spec.dim);
  for (const auto& id : ids) {
    const auto rows = frames.rows_for_video(id);
    if (rows.empty()) throw DataError("avg_pool: video " + id + " has no frames in " + frames.spec().name);
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t r : rows) {
      auto x = frames.row(r);
      for (std::size_t d = 0; d < spec.dim; ++d) acc[d] += x[d];
    }
    for (double& a : acc) a /= static_cast<double>(rows.size());
    out.add(UnitKey{id, -1}, acc);
  }
  return out;
}

void validate_dims(const FeatureSpec& spec, std::size_t components, std::size_t descriptor_dim) {
  std::size_t expected = 0;
  switch (spec.encoding) {
    case Encoding::bow: expected = components; break;
    case Encoding::fv: expected = 2 * components * descriptor_dim; break;
    default:
      throw ConfigError("feature " + spec.name + ": encoding " + std::string(to_string(spec.encoding)) +
                        " has no codebook");
  }
  if (expected != spec.dim) {
    throw DataError("feature " + spec.name + ": codebook yields " + std::to_string(expected) +
                    " dimensions, feature declares " + std::to_string(spec.dim));
  }
}

void validate_dims(const FeatureSpec& spec, const Codebook& codebook) {
  validate_dims(spec, codebook.size(), codebook.dim());
}

void validate_dims(const FeatureSpec& spec, const GmmModel& gmm) { validate_dims(spec, gmm.size(), gmm.dim()); }

// ---------------------------------------------------------------------------

std::string format_codebook(const Codebook& codebook) {
  std::string out = "#type=kmeans #K=" + std::to_string(codebook.size()) + " #dim=" + std::to_string(codebook.dim()) + "\n";
  for (std::size_t k = 0; k < codebook.size(); ++k) {
    textio::append_reals(out, codebook.centroids.row(k));
    out.push_back('\n');
  }
  return out;
}

std::string format_gmm(const GmmModel& gmm) {
  std::string out = "#type=gmm #K=" + std::to_string(gmm.size()) + " #dim=" + std::to_string(gmm.dim()) + "\n";
  for (std::size_t k = 0; k < gmm.size(); ++k) {
    out += textio::format_real(gmm.weights[k]);
    out.push_back(' ');
    textio::append_reals(out, gmm.means.row(k));
    out.push_back(' ');
    textio::append_reals(out, gmm.variances.row(k));
    out.push_back('\n');
  }
  return out;
}

namespace {

struct ComponentFile {
  std::string type;
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<std::vector<double>> rows;
};

ComponentFile parse_component_file(std::string_view text) {
  const auto ls = textio::lines(text);
  if (ls.empty()) throw DataError("codebook: empty file");
  const auto header = textio::parse_header(ls[0]);
  ComponentFile f;
  for (const char* key : {"type", "K", "dim"}) {
    if (!header.count(key)) throw DataError(std::string("codebook: missing #") + key + " header");
  }
  f.type = header.at("type");
  f.k = static_cast<std::size_t>(textio::parse_integer(header.at("K"), "codebook"));
  f.dim = static_cast<std::size_t>(textio::parse_integer(header.at("dim"), "codebook"));
  for (std::size_t i = 1; i < ls.size(); ++i) {
    if (textio::trim(ls[i]).empty()) continue;
    f.rows.push_back(textio::parse_reals(ls[i], "codebook:" + std::to_string(i + 1)));
  }
  if (f.rows.size() != f.k) throw DataError("codebook: header declares K=" + std::to_string(f.k) + " but file has " +
                                            std::to_string(f.rows.size()) + " components");
  return f;
}

}  // namespace

std::string codebook_type(std::string_view text) {
  const auto ls = textio::lines(text);
  if (ls.empty()) throw DataError("codebook: empty file");
  const auto header = textio::parse_header(ls[0]);
  auto it = header.find("type");
  if (it == header.end()) throw DataError("codebook: missing #type header");
  return it->second;
}

Codebook parse_codebook(std::string_view text) {
  const auto f = parse_component_file(text);
  if (f.type != "kmeans") throw DataError("codebook: expected type kmeans, got " + f.type);
  Codebook cb{RowMatrix(f.dim)};
  for (const auto& r : f.rows) {
    if (r.size() != f.dim) throw DataError("codebook: centroid width mismatch");
    cb.centroids.append(r);
  }
  return cb;
}

GmmModel parse_gmm(std::string_view text) {
  const auto f = parse_component_file(text);
  if (f.type != "gmm") throw DataError("codebook: expected type gmm, got " + f.type);
  GmmModel g;
  g.means = RowMatrix(f.dim);
  g.variances = RowMatrix(f.dim);
  double total = 0.0;
  for (const auto& r : f.rows) {
    if (r.size() != 1 + 2 * f.dim) throw DataError("gmm: component width mismatch");
    if (!(r[0] > 0.0)) throw DataError("gmm: component weight must be positive");
    g.weights.push_back(r[0]);
    total += r[0];
    g.means.append(RowView(r).subspan(1, f.dim));
    g.variances.append(RowView(r).subspan(1 + f.dim, f.dim));
  }
  if (std::abs(total - 1.0) > 1e-9) throw DataError("gmm: weights do not sum to one");
  for (double v : g.variances.data()) {
    if (!(v > 0.0)) throw DataError("gmm: variances must be positive");
  }
  return g;
}

}  // namespace vfuse
