#pragma once

// Lazy k-nearest-neighbors classifier using cosine similarity (dot product
// of L2-normalized vectors). Similarity ties break toward the lower
// training index; k must be odd so binary majority votes cannot tie.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "scamdetect/corpus.hpp"
#include "scamdetect/features.hpp"
#include "scamdetect/random_forest.hpp"  // shared error types
#include "scamdetect/util.hpp"

namespace scamdetect {

struct KEvenOrTooLargeError : Error {
  explicit KEvenOrTooLargeError(std::uint32_t k, std::size_t n)
      : Error("knn k=" + std::to_string(k) + " must be odd and <= " +
              std::to_string(n)) {}
};

struct KnnModel {
  std::vector<TermVector> stored_vectors;  // L2-normalized or zero
  std::vector<Label> stored_labels;
  std::uint32_t k = 5;
  std::uint32_t n_features = 0;
  Label majority = Label::Legit;  // fallback for zero query vectors
};

inline KnnModel train_knn(const std::vector<TermVector>& X,
                          const std::vector<Label>& y, std::uint32_t n_features,
                          std::uint32_t k = 5) {
  if (X.size() != y.size()) throw DimensionMismatchError();
  if (k == 0 || k % 2 == 0 || k > X.size())
    throw KEvenOrTooLargeError(k, X.size());
  detail::check_dims(X, n_features);
  KnnModel model;
  model.k = k;
  model.n_features = n_features;
  model.stored_labels = y;
  model.stored_vectors.reserve(X.size());
  for (const TermVector& v : X) {
    TermVector u = v;
    double nrm = u.norm();
    if (nrm > 0.0) {
      for (auto& [i, w] : u.entries) w /= nrm;
    }
    model.stored_vectors.push_back(std::move(u));
  }
  std::size_t n_scam = 0;
  for (Label l : y)
    if (l == Label::Scam) ++n_scam;
  // ties resolve to Legit
  model.majority = (2 * n_scam > y.size()) ? Label::Scam : Label::Legit;
  return model;
}

inline Label predict(const KnnModel& model, const TermVector& x) {
  if (!x.entries.empty() && x.max_index() >= model.n_features)
    throw DimensionMismatchError();
  TermVector q = x;
  double nrm = q.norm();
  if (nrm == 0.0) return model.majority;
  for (auto& [i, w] : q.entries) w /= nrm;

  std::vector<std::pair<double, std::size_t>> sims;
  sims.reserve(model.stored_vectors.size());
  for (std::size_t i = 0; i < model.stored_vectors.size(); ++i) {
    sims.emplace_back(dot(q, model.stored_vectors[i]), i);
  }
  std::partial_sort(sims.begin(), sims.begin() + model.k, sims.end(),
                    [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                    });
  std::size_t scam_votes = 0;
  for (std::uint32_t i = 0; i < model.k; ++i) {
    if (model.stored_labels[sims[i].second] == Label::Scam) ++scam_votes;
  }
  return 2 * scam_votes > model.k ? Label::Scam : Label::Legit;
}

}  // namespace scamdetect
