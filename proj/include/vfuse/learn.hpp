#pragma once

// Linear hinge-loss classifiers and the Negative Bootstrap ensemble that
// trains them against adaptively mined hard negatives.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vfuse/matrix.hpp"

namespace vfuse {

struct LinearModel {
  std::vector<double> w;
  double b = 0.0;

  double decision(RowView x) const { return dot(w, x) + b; }
};

struct ClassifierKey {
  std::string feature;
  std::string class_name;

  auto operator<=>(const ClassifierKey&) const = default;
  bool operator==(const ClassifierKey&) const = default;
  std::string str() const { return feature + "/" + class_name; }
};

// Uniform average of linear members; the ensemble is itself linear.
struct EnsembleModel {
  ClassifierKey key;
  std::vector<LinearModel> members;

  std::size_t dim() const { return members.empty() ? 0 : members.front().w.size(); }
  // Throws DataError when empty or when members disagree on dimension.
  void validate() const;
};

// Mean of the member decision values. Throws DataError on a dimension mismatch.
double score(const EnsembleModel& model, RowView x);
std::vector<double> score_rows(const EnsembleModel& model, std::span<const RowView> rows);

struct TrainConfig {
  int iterations = 10;
  // 0 selects the default: 10 * |positives|, at least 100.
  std::size_t pool_size = 0;
  // 0 selects the default: |positives|.
  std::size_t selected_per_iter = 0;
  std::vector<double> lambda_grid{1e-4, 1e-3, 1e-2, 1e-1};
  int epochs = 20;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t effective_pool_size(std::size_t num_positives) const;
  std::size_t effective_selected(std::size_t num_positives) const;
};

// lambda/2 * (|w|^2 + b^2) + mean hinge loss over the labeled examples.
double hinge_objective(const LinearModel& model, std::span<const RowView> positives,
                       std::span<const RowView> negatives, double lambda);

// Full-batch subgradient descent on the L2-regularised hinge loss with step
// 1/(lambda t) and projection onto the ball of radius 1/sqrt(lambda). The bias
// is treated as a regularised constant feature. Each epoch accumulates the
// averaged subgradient in a seeded shuffled order; the best iterate seen is
// returned, so `objective_trace` (best objective after each epoch) never increases.
LinearModel train_linear(std::span<const RowView> positives, std::span<const RowView> negatives, double lambda,
                         int epochs, std::uint64_t seed, std::vector<double>* objective_trace = nullptr);

// Ranks candidate ensembles on held-out data; higher is better (typically AP).
using HeldOutScorer = std::function<double(const EnsembleModel&)>;

struct BootstrapIteration {
  std::vector<std::size_t> sampled;        // pool indices scored this iteration (empty at t = 1)
  std::vector<double> sampled_scores;      // ensemble scores of `sampled`
  std::vector<std::size_t> selected;       // pool indices used as negatives
  double lambda = 0.0;
  double held_out_score = 0.0;
};

// Negative Bootstrap. Iteration 1 trains on random pool negatives; each later
// iteration scores a fresh random sample of the pool with the current ensemble
// and trains on the highest-scoring (hardest) negatives. Lambda is chosen per
// iteration by `held_out`; without one, a seeded quarter of the positives and of
// the pool is held out internally. Throws DataError when the pool is too small.
EnsembleModel negative_bootstrap(std::span<const RowView> positives, std::span<const RowView> negative_pool,
                                 const TrainConfig& config, ClassifierKey key = {},
                                 const HeldOutScorer& held_out = {},
                                 std::vector<BootstrapIteration>* trace = nullptr);

// Z-score transform with statistics estimated on validation scores only.
// Constant validation scores fall back to a unit scale.
struct ScoreNormalizer {
  double mean = 0.0;
  double scale = 1.0;

  static ScoreNormalizer fit(std::span<const double> val_scores);
  double operator()(double s) const { return (s - mean) / scale; }
  std::vector<double> apply(std::span<const double> scores) const;
};

std::vector<double> normalize_scores(std::span<const double> val_scores, std::span<const double> scores);

// `#feature=<name> #class=<name> #members=<T> #dim=<D>` then `b w1 ... wD` per member.
std::string format_model(const EnsembleModel& model);
EnsembleModel parse_model(std::string_view text);

}  // namespace vfuse
