#pragma once

// Tokenization, TF-IDF vectorization and top-K discriminative-term
// extraction. The vectorizer uses smoothed idf, ln((1+N)/(1+df)) + 1, and
// L2-normalizes every non-zero vector, so weights are scale-free across
// documents of different lengths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "scamdetect/corpus.hpp"
#include "scamdetect/util.hpp"

namespace scamdetect {

struct EmptyCorpusError : Error {
  EmptyCorpusError() : Error("corpus has no non-empty document") {}
};

struct KTooLargeError : Error {
  explicit KTooLargeError(std::size_t k, std::size_t vocab)
      : Error("k=" + std::to_string(k) + " exceeds vocabulary size " +
              std::to_string(vocab)) {}
};

// Lowercase tokens split on any non-alphanumeric byte; tokens shorter than
// two characters are dropped. ASCII-only case folding keeps the rule
// byte-deterministic for UTF-8 input.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.size() >= 2) out.push_back(cur);
    cur.clear();
  };
  for (unsigned char c : text) {
    if (c >= '0' && c <= '9') cur.push_back(static_cast<char>(c));
    else if (c >= 'a' && c <= 'z') cur.push_back(static_cast<char>(c));
    else if (c >= 'A' && c <= 'Z') cur.push_back(static_cast<char>(c - 'A' + 'a'));
    else flush();
  }
  flush();
  return out;
}

struct Vocabulary {
  std::vector<std::string> terms;       // sorted lexicographically
  std::vector<std::uint32_t> doc_freq;  // documents containing terms[i]
  std::uint64_t n_docs = 0;

  std::size_t size() const { return terms.size(); }

  std::optional<std::uint32_t> index_of(std::string_view token) const {
    auto it = std::lower_bound(terms.begin(), terms.end(), token);
    if (it == terms.end() || *it != token) return std::nullopt;
    return static_cast<std::uint32_t>(it - terms.begin());
  }

  double idf(std::uint32_t index) const {
    return std::log((1.0 + static_cast<double>(n_docs)) /
                    (1.0 + static_cast<double>(doc_freq[index]))) +
           1.0;
  }
};

inline Vocabulary fit_vocabulary(const std::vector<std::string>& docs) {
  bool any_nonempty = false;
  std::map<std::string, std::uint32_t> df;
  for (const std::string& doc : docs) {
    if (!trim(doc).empty()) any_nonempty = true;
    std::unordered_set<std::string> seen;
    for (std::string& tok : tokenize(doc)) seen.insert(std::move(tok));
    for (const std::string& tok : seen) ++df[tok];
  }
  if (docs.empty() || !any_nonempty) throw EmptyCorpusError();
  Vocabulary vocab;
  vocab.n_docs = docs.size();
  vocab.terms.reserve(df.size());
  vocab.doc_freq.reserve(df.size());
  for (auto& [term, count] : df) {
    vocab.terms.push_back(term);
    vocab.doc_freq.push_back(count);
  }
  return vocab;
}

// Sparse vector over a Vocabulary; entries sorted by index, weights > 0.
struct TermVector {
  std::vector<std::pair<std::uint32_t, double>> entries;

  double value_at(std::uint32_t index) const {
    auto it = std::lower_bound(
        entries.begin(), entries.end(), index,
        [](const auto& e, std::uint32_t i) { return e.first < i; });
    return (it != entries.end() && it->first == index) ? it->second : 0.0;
  }

  double norm() const {
    double s = 0.0;
    for (const auto& [i, w] : entries) s += w * w;
    return std::sqrt(s);
  }

  std::uint32_t max_index() const {
    return entries.empty() ? 0 : entries.back().first;
  }

  bool operator==(const TermVector&) const = default;
};

inline double dot(const TermVector& a, const TermVector& b) {
  double s = 0.0;
  auto ia = a.entries.begin();
  auto ib = b.entries.begin();
  while (ia != a.entries.end() && ib != b.entries.end()) {
    if (ia->first < ib->first) ++ia;
    else if (ib->first < ia->first) ++ib;
    else s += (ia++)->second * (ib++)->second;
  }
  return s;
}

// tf(t) * idf(t) with raw in-document counts, L2-normalized when the norm
// is positive. Out-of-vocabulary tokens are ignored.
inline TermVector tfidf(const std::string& doc, const Vocabulary& vocab) {
  std::map<std::uint32_t, double> counts;
  for (const std::string& tok : tokenize(doc)) {
    if (auto idx = vocab.index_of(tok)) ++counts[*idx];
  }
  TermVector v;
  v.entries.reserve(counts.size());
  double sq = 0.0;
  for (const auto& [idx, tf] : counts) {
    double w = tf * vocab.idf(idx);
    v.entries.emplace_back(idx, w);
    sq += w * w;
  }
  if (sq > 0.0) {
    double inv = 1.0 / std::sqrt(sq);
    for (auto& [idx, w] : v.entries) w *= inv;
  }
  return v;
}

struct RankedTerms {
  std::vector<std::pair<std::string, double>> terms;  // scores non-increasing

  std::size_t size() const { return terms.size(); }
  bool operator==(const RankedTerms&) const = default;
};

// Ranks terms by |mean TF-IDF weight over scam docs - mean over legit
// docs|, descending, ties broken lexicographically. A class with no
// documents contributes a zero mean.
inline RankedTerms top_k_terms(const LabeledDataset& ds,
                               const Vocabulary& vocab, std::size_t k) {
  if (k == 0) throw InvalidArgumentError("k must be positive");
  if (k > vocab.size()) throw KTooLargeError(k, vocab.size());
  std::vector<double> sum_scam(vocab.size(), 0.0);
  std::vector<double> sum_legit(vocab.size(), 0.0);
  std::size_t n_scam = 0, n_legit = 0;
  for (const Conversation& conv : ds.conversations) {
    TermVector v = tfidf(flatten(conv), vocab);
    auto& sums = conv.label == Label::Scam ? sum_scam : sum_legit;
    (conv.label == Label::Scam ? n_scam : n_legit) += 1;
    for (const auto& [idx, w] : v.entries) sums[idx] += w;
  }
  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    double mean_scam = n_scam ? sum_scam[i] / static_cast<double>(n_scam) : 0.0;
    double mean_legit =
        n_legit ? sum_legit[i] / static_cast<double>(n_legit) : 0.0;
    scored.emplace_back(vocab.terms[i], std::fabs(mean_scam - mean_legit));
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  scored.resize(k);
  return RankedTerms{std::move(scored)};
}

// Fraction of the ranked terms whose token occurs at least once in doc.
// An empty term list counts as full coverage.
inline double term_coverage(const std::string& doc, const RankedTerms& terms) {
  if (terms.terms.empty()) return 1.0;
  std::unordered_set<std::string> present;
  for (std::string& tok : tokenize(doc)) present.insert(std::move(tok));
  std::size_t hit = 0;
  for (const auto& [term, score] : terms.terms) {
    if (present.count(term)) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(terms.terms.size());
}

inline nlohmann::json ranked_terms_to_json(const RankedTerms& rt) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [term, score] : rt.terms) {
    arr.push_back({{"term", term}, {"score", score}});
  }
  return arr;
}

inline RankedTerms ranked_terms_from_json(const nlohmann::json& arr) {
  if (!arr.is_array()) throw Error("ranked terms JSON must be an array");
  RankedTerms rt;
  for (const auto& item : arr) {
    rt.terms.emplace_back(item.at("term").get<std::string>(),
                          item.at("score").get<double>());
  }
  return rt;
}

// Content hash binding persisted models to the vocabulary they were
// trained against.
inline std::string vocab_hash(const Vocabulary& vocab) {
  std::string buf = std::to_string(vocab.n_docs);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    buf.push_back('\x1f');
    buf += vocab.terms[i];
    buf.push_back('\x1e');
    buf += std::to_string(vocab.doc_freq[i]);
  }
  return fnv1a_hex(buf);
}

}  // namespace scamdetect
