#pragma once

// Linear SVM trained by primal subgradient descent on hinge loss with an
// L2 penalty (lambda/2)*||w||^2, step size 1/(lambda*t), one uniformly
// sampled example per step. The bias is learned as a regularized
// constant-input coordinate, which keeps the 1/(lambda*t) schedule stable
// from the first step. Labels map Scam -> +1, Legit -> -1; the decision is
// sign(w.x + b), with 0 mapping to Legit.

#include <cmath>
#include <cstdint>
#include <vector>

#include "scamdetect/corpus.hpp"
#include "scamdetect/features.hpp"
#include "scamdetect/random_forest.hpp"  // shared error types
#include "scamdetect/util.hpp"

namespace scamdetect {

struct SvmParams {
  double lambda = 1e-4;
  std::uint32_t epochs = 20;
  std::uint64_t seed = 0;
};

struct LinearSvmModel {
  std::vector<double> weights;  // dense over the vocabulary
  double bias = 0.0;
  SvmParams params;
};

inline double decision_value(const LinearSvmModel& model, const TermVector& x) {
  if (!x.entries.empty() &&
      x.max_index() >= static_cast<std::uint32_t>(model.weights.size()))
    throw DimensionMismatchError();
  double s = model.bias;
  for (const auto& [i, w] : x.entries) s += model.weights[i] * w;
  return s;
}

inline LinearSvmModel train_linear_svm(const std::vector<TermVector>& X,
                                       const std::vector<Label>& y,
                                       std::uint32_t n_features,
                                       const SvmParams& params = {}) {
  if (X.size() != y.size()) throw DimensionMismatchError();
  if (X.empty()) throw DegenerateTrainingError();
  if (params.lambda <= 0.0) throw InvalidArgumentError("lambda must be positive");
  if (params.epochs == 0) throw InvalidArgumentError("epochs must be positive");
  detail::check_both_labels(y);
  detail::check_dims(X, n_features);

  std::vector<double> w(n_features + 1, 0.0);  // w[n_features] is the bias
  Rng rng(params.seed);
  const std::size_t n = X.size();
  const std::uint64_t steps =
      static_cast<std::uint64_t>(params.epochs) * static_cast<std::uint64_t>(n);
  for (std::uint64_t t = 1; t <= steps; ++t) {
    std::size_t i = static_cast<std::size_t>(bounded(rng, n));
    double eta = 1.0 / (params.lambda * static_cast<double>(t));
    double yi = y[i] == Label::Scam ? 1.0 : -1.0;
    double margin = w[n_features];
    for (const auto& [idx, v] : X[i].entries) margin += w[idx] * v;
    margin *= yi;
    double shrink = 1.0 - eta * params.lambda;
    for (double& wj : w) wj *= shrink;
    if (margin < 1.0) {
      for (const auto& [idx, v] : X[i].entries) w[idx] += eta * yi * v;
      w[n_features] += eta * yi;
    }
  }
  LinearSvmModel model;
  model.bias = w[n_features];
  w.pop_back();
  model.weights = std::move(w);
  model.params = params;
  return model;
}

inline Label predict(const LinearSvmModel& model, const TermVector& x) {
  return decision_value(model, x) > 0.0 ? Label::Scam : Label::Legit;
}

}  // namespace scamdetect
