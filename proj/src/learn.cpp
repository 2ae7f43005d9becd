#include "vfuse/learn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "vfuse/error.hpp"
#include "vfuse/metrics.hpp"
#include "vfuse/random.hpp"
#include "vfuse/textio.hpp"

namespace vfuse {

void EnsembleModel::validate() const {
  if (members.empty()) throw DataError("model " + key.str() + ": no members");
  const std::size_t d = members.front().w.size();
  for (const auto& m : members) {
    if (m.w.size() != d) throw DataError("model " + key.str() + ": members differ in dimension");
    if (!std::isfinite(m.b)) throw DataError("model " + key.str() + ": non-finite bias");
    for (double v : m.w) {
      if (!std::isfinite(v)) throw DataError("model " + key.str() + ": non-finite weight");
    }
  }
}

double score(const EnsembleModel& model, RowView x) {
  if (model.members.empty()) throw DataError("model " + model.key.str() + ": no members");
  if (x.size() != model.dim()) {
    throw DataError("model " + model.key.str() + ": input has " + std::to_string(x.size()) + " dims, model has " +
                    std::to_string(model.dim()));
  }
  double s = 0.0;
  for (const auto& m : model.members) s += m.decision(x);
  return s / static_cast<double>(model.members.size());
}

std::vector<double> score_rows(const EnsembleModel& model, std::span<const RowView> rows) {
  if (model.members.empty()) throw DataError("model " + model.key.str() + ": no members");
  // The ensemble mean is itself linear: average the members once.
  const std::size_t dim = model.dim();
  const double inv = 1.0 / static_cast<double>(model.members.size());
  std::vector<double> w(dim, 0.0);
  double b = 0.0;
  for (const auto& m : model.members) {
    for (std::size_t d = 0; d < dim; ++d) w[d] += m.w[d];
    b += m.b;
  }
  for (double& v : w) v *= inv;
  b *= inv;
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    if (r.size() != dim) {
      throw DataError("model " + model.key.str() + ": input has " + std::to_string(r.size()) + " dims, model has " +
                      std::to_string(dim));
    }
    out.push_back(dot(w, r) + b);
  }
  return out;
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (iterations < 1) throw ConfigError("train: iterations must be at least 1");
  if (epochs < 1) throw ConfigError("train: epochs must be at least 1");
  if (lambda_grid.empty()) throw ConfigError("train: lambda grid is empty");
  for (double l : lambda_grid) {
    if (!(l > 0.0) || !std::isfinite(l)) throw ConfigError("train: lambda values must be positive");
  }
}

std::size_t TrainConfig::effective_pool_size(std::size_t num_positives) const {
  if (pool_size) return pool_size;
  return std::max<std::size_t>(10 * num_positives, 100);
}

std::size_t TrainConfig::effective_selected(std::size_t num_positives) const {
  return selected_per_iter ? selected_per_iter : num_positives;
}

// ---------------------------------------------------------------------------

namespace {

struct Example {
  RowView x;
  double y;
};

std::vector<Example> labeled(std::span<const RowView> positives, std::span<const RowView> negatives) {
  if (positives.empty() || negatives.empty()) {
    throw DegenerateLabelsError("train_linear: need at least one positive and one negative example");
  }
  const std::size_t dim = positives.front().size();
  std::vector<Example> ex;
  ex.reserve(positives.size() + negatives.size());
  for (auto x : positives) ex.push_back({x, 1.0});
  for (auto x : negatives) ex.push_back({x, -1.0});
  for (const auto& e : ex) {
    if (e.x.size() != dim) throw DataError("train_linear: examples differ in dimension");
    for (double v : e.x) {
      if (!std::isfinite(v)) throw DataError("train_linear: non-finite input value");
    }
  }
  return ex;
}

}  // namespace

double hinge_objective(const LinearModel& model, std::span<const RowView> positives,
                       std::span<const RowView> negatives, double lambda) {
  double loss = 0.0;
  for (auto x : positives) loss += std::max(0.0, 1.0 - model.decision(x));
  for (auto x : negatives) loss += std::max(0.0, 1.0 + model.decision(x));
  const double n = static_cast<double>(positives.size() + negatives.size());
  return 0.5 * lambda * (dot(model.w, model.w) + model.b * model.b) + loss / n;
}

LinearModel train_linear(std::span<const RowView> positives, std::span<const RowView> negatives, double lambda,
                         int epochs, std::uint64_t seed, std::vector<double>* objective_trace) {
  if (!(lambda > 0.0)) throw ConfigError("train_linear: lambda must be positive");
  if (epochs < 1) throw ConfigError("train_linear: epochs must be at least 1");
  const auto ex = labeled(positives, negatives);
  const std::size_t n = ex.size();
  const std::size_t dim = ex.front().x.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double radius = 1.0 / std::sqrt(lambda);

  LinearModel cur{std::vector<double>(dim, 0.0), 0.0};
  LinearModel best = cur;
  std::vector<double> margin(n, 0.0);  // y * f(x) at the current iterate
  double best_obj = 1.0;               // objective of the zero model

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::vector<double> grad(dim);
  for (int t = 1; t <= epochs; ++t) {
    rng.shuffle(std::span<std::size_t>(order));
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i : order) {
      if (margin[i] < 1.0) {
        const double y = ex[i].y;
        for (std::size_t d = 0; d < dim; ++d) grad[d] += y * ex[i].x[d];
        grad_b += y;
      }
    }
    const double eta = 1.0 / (lambda * static_cast<double>(t));
    const double shrink = 1.0 - eta * lambda;
    for (std::size_t d = 0; d < dim; ++d) cur.w[d] = shrink * cur.w[d] + eta * inv_n * grad[d];
    cur.b = shrink * cur.b + eta * inv_n * grad_b;
    const double norm = std::sqrt(dot(cur.w, cur.w) + cur.b * cur.b);
    if (norm > radius) {
      const double s = radius / norm;
      for (double& v : cur.w) v *= s;
      cur.b *= s;
    }

    double loss = 0.0;
    for (std::size_t i : order) {
      margin[i] = ex[i].y * cur.decision(ex[i].x);
      loss += std::max(0.0, 1.0 - margin[i]);
    }
    const double obj = 0.5 * lambda * (dot(cur.w, cur.w) + cur.b * cur.b) + loss * inv_n;
    if (obj < best_obj) {
      best_obj = obj;
      best = cur;
    }
    if (objective_trace) objective_trace->push_back(best_obj);
  }
  return best;
}

// ---------------------------------------------------------------------------

EnsembleModel negative_bootstrap(std::span<const RowView> positives, std::span<const RowView> negative_pool,
                                 const TrainConfig& config, ClassifierKey key, const HeldOutScorer& held_out,
                                 std::vector<BootstrapIteration>* trace) {
  config.validate();
  if (positives.empty()) throw DegenerateLabelsError("negative_bootstrap " + key.str() + ": no positive examples");

  std::vector<RowView> train_pos(positives.begin(), positives.end());
  std::vector<RowView> pool(negative_pool.begin(), negative_pool.end());
  std::vector<std::size_t> pool_index(pool.size());
  std::iota(pool_index.begin(), pool_index.end(), std::size_t{0});

  HeldOutScorer selector = held_out;
  std::vector<RowView> fold_rows;
  std::vector<bool> fold_labels;
  std::vector<std::string> fold_ids;
  if (!selector && config.lambda_grid.size() > 1 && positives.size() >= 2) {
    // Internal fold: a seeded quarter of positives and pool.
    Rng rng(derive_seed(config.seed, "nb/fold"));
    const std::size_t hp = std::max<std::size_t>(1, positives.size() / 4);
    const std::size_t hn = std::max<std::size_t>(1, pool.size() / 4);
    const std::size_t selected = config.effective_selected(positives.size() - hp);
    if (pool.size() >= hn + selected) {
      auto pos_out = rng.sample_indices(positives.size(), hp);
      auto neg_out = rng.sample_indices(pool.size(), hn);
      std::vector<bool> pos_held(positives.size(), false), neg_held(pool.size(), false);
      for (auto i : pos_out) pos_held[i] = true;
      for (auto i : neg_out) neg_held[i] = true;
      train_pos.clear();
      for (std::size_t i = 0; i < positives.size(); ++i) {
        (pos_held[i] ? fold_rows : train_pos).push_back(positives[i]);
        if (pos_held[i]) fold_labels.push_back(true);
      }
      pool.clear();
      pool_index.clear();
      for (std::size_t i = 0; i < negative_pool.size(); ++i) {
        if (neg_held[i]) {
          fold_rows.push_back(negative_pool[i]);
          fold_labels.push_back(false);
        } else {
          pool.push_back(negative_pool[i]);
          pool_index.push_back(i);
        }
      }
      for (std::size_t i = 0; i < fold_rows.size(); ++i) fold_ids.push_back(std::to_string(1000000000 + i));
      selector = [&](const EnsembleModel& m) {
        APEvaluator ap(fold_ids, fold_labels);
        return ap(score_rows(m, fold_rows));
      };
    }
  }

  const std::size_t n_sel = config.effective_selected(train_pos.size());
  const std::size_t n_sample = std::min(std::max(config.effective_pool_size(train_pos.size()), n_sel), pool.size());
  if (pool.size() < n_sel || n_sel == 0) {
    throw DataError("negative_bootstrap " + key.str() + ": negative pool exhausted (" + std::to_string(pool.size()) +
                    " available, " + std::to_string(n_sel) + " needed)");
  }

  EnsembleModel model;
  model.key = std::move(key);
  std::vector<RowView> negatives;
  for (int t = 1; t <= config.iterations; ++t) {
    BootstrapIteration it;
    Rng rng(derive_seed(config.seed, "nb/sample/" + std::to_string(t)));
    std::vector<std::size_t> chosen;  // indices into `pool`
    if (t == 1) {
      chosen = rng.sample_indices(pool.size(), n_sel);
    } else {
      auto sampled = rng.sample_indices(pool.size(), n_sample);
      std::sort(sampled.begin(), sampled.end());
      std::vector<double> s(sampled.size());
      for (std::size_t i = 0; i < sampled.size(); ++i) s[i] = score(model, pool[sampled[i]]);
      std::vector<std::size_t> order(sampled.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
      for (std::size_t i = 0; i < n_sel; ++i) chosen.push_back(sampled[order[i]]);
      if (trace) {
        for (std::size_t i = 0; i < sampled.size(); ++i) it.sampled.push_back(pool_index[sampled[i]]);
        it.sampled_scores = std::move(s);
      }
    }
    negatives.clear();
    for (std::size_t c : chosen) {
      negatives.push_back(pool[c]);
      it.selected.push_back(pool_index[c]);
    }

    const std::uint64_t train_seed = derive_seed(config.seed, "nb/train/" + std::to_string(t));
    double best_score = -std::numeric_limits<double>::infinity();
    LinearModel best_model;
    double best_lambda = config.lambda_grid[config.lambda_grid.size() / 2];
    if (!selector || config.lambda_grid.size() == 1) {
      best_lambda = selector ? config.lambda_grid.front() : best_lambda;
      best_model = train_linear(train_pos, negatives, best_lambda, config.epochs, train_seed);
      if (selector) {
        model.members.push_back(best_model);
        best_score = selector(model);
        model.members.pop_back();
      }
    } else {
      for (double lambda : config.lambda_grid) {
        LinearModel candidate = train_linear(train_pos, negatives, lambda, config.epochs, train_seed);
        model.members.push_back(candidate);
        const double s = selector(model);
        model.members.pop_back();
        if (s > best_score) {
          best_score = s;
          best_model = std::move(candidate);
          best_lambda = lambda;
        }
      }
    }
    model.members.push_back(std::move(best_model));
    it.lambda = best_lambda;
    it.held_out_score = best_score;
    if (trace) trace->push_back(std::move(it));
  }
  return model;
}

// ---------------------------------------------------------------------------

ScoreNormalizer ScoreNormalizer::fit(std::span<const double> val_scores) {
  ScoreNormalizer n;
  if (val_scores.empty()) return n;
  double mean = 0.0;
  for (double s : val_scores) mean += s;
  mean /= static_cast<double>(val_scores.size());
  double var = 0.0;
  for (double s : val_scores) var += (s - mean) * (s - mean);
  var /= static_cast<double>(val_scores.size());
  n.mean = mean;
  const double sd = std::sqrt(var);
  n.scale = sd > 0.0 ? sd : 1.0;
  return n;
}

std::vector<double> ScoreNormalizer::apply(std::span<const double> scores) const {
  std::vector<double> out;
  out.reserve(scores.size());
  for (double s : scores) out.push_back((*this)(s));
  return out;
}

std::vector<double> normalize_scores(std::span<const double> val_scores, std::span<const double> scores) {
  return ScoreNormalizer::fit(val_scores).apply(scores);
}

// ---------------------------------------------------------------------------

std::string format_model(const EnsembleModel& model) {
  model.validate();
  std::string out = "#feature=" + model.key.feature + " #class=" + model.key.class_name +
                    " #members=" + std::to_string(model.members.size()) + " #dim=" + std::to_string(model.dim()) + "\n";
  for (const auto& m : model.members) {
    out += textio::format_real(m.b);
    if (!m.w.empty()) out.push_back(' ');
    textio::append_reals(out, m.w);
    out.push_back('\n');
  }
  return out;
}

EnsembleModel parse_model(std::string_view text) {
  const auto ls = textio::lines(text);
  if (ls.empty()) throw DataError("model: empty file");
  const auto header = textio::parse_header(ls[0]);
  for (const char* key : {"feature", "class", "members", "dim"}) {
    if (!header.count(key)) throw DataError(std::string("model: missing #") + key + " header");
  }
  EnsembleModel model;
  model.key = {header.at("feature"), header.at("class")};
  const auto members = textio::parse_integer(header.at("members"), "model");
  const auto dim = static_cast<std::size_t>(textio::parse_integer(header.at("dim"), "model"));
  for (std::size_t i = 1; i < ls.size(); ++i) {
    if (textio::trim(ls[i]).empty()) continue;
    auto values = textio::parse_reals(ls[i], "model:" + std::to_string(i + 1));
    if (values.size() != dim + 1) throw DataError("model: member width mismatch at line " + std::to_string(i + 1));
    LinearModel m;
    m.b = values[0];
    m.w.assign(values.begin() + 1, values.end());
    model.members.push_back(std::move(m));
  }
  if (static_cast<long long>(model.members.size()) != members) {
    throw DataError("model: header declares " + std::to_string(members) + " members, file has " +
                    std::to_string(model.members.size()));
  }
  model.validate();
  return model;
}

}  // namespace vfuse
