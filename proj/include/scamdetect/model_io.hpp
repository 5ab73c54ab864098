#pragma once

// Versioned JSON persistence for trained classifiers. Every document
// carries the hash of the vocabulary the model was fit against;
// predict_checked refuses to score vectors built from a different one.

#include <filesystem>
#include <fstream>
#include <string>
#include <variant>

#include <json.hpp>

#include "scamdetect/features.hpp"
#include "scamdetect/knn.hpp"
#include "scamdetect/linear_svm.hpp"
#include "scamdetect/random_forest.hpp"
#include "scamdetect/util.hpp"

namespace scamdetect {

struct VocabMismatchError : Error {
  VocabMismatchError(const std::string& expected, const std::string& got)
      : Error("model was trained against vocabulary " + expected +
              " but was given " + got) {}
};

struct ModelFile {
  std::string kind;  // "rf" | "knn" | "svm"
  std::string vocab_hash;
  std::variant<RandomForestModel, KnnModel, LinearSvmModel> model;
};

namespace detail {

inline nlohmann::json sparse_to_json(const TermVector& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [i, w] : v.entries) arr.push_back({i, w});
  return arr;
}

inline TermVector sparse_from_json(const nlohmann::json& arr) {
  TermVector v;
  for (const auto& e : arr) {
    v.entries.emplace_back(e.at(0).get<std::uint32_t>(), e.at(1).get<double>());
  }
  return v;
}

}  // namespace detail

inline nlohmann::json model_to_json(const RandomForestModel& m,
                                    const std::string& vocab_hash_hex) {
  nlohmann::json j;
  j["kind"] = "rf";
  j["version"] = 1;
  j["vocab_hash"] = vocab_hash_hex;
  j["n_features"] = m.n_features;
  j["n_trees"] = m.params.n_trees;
  j["max_depth"] = m.params.max_depth;
  j["seed"] = m.params.seed;
  nlohmann::json trees = nlohmann::json::array();
  for (const DecisionTree& t : m.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const TreeNode& n : t.nodes) {
      if (n.leaf >= 0) {
        nodes.push_back({{"leaf", n.leaf == 1 ? "scam" : "legit"}});
      } else {
        nodes.push_back({{"f", n.feature},
                         {"t", n.threshold},
                         {"l", n.left},
                         {"r", n.right}});
      }
    }
    trees.push_back({{"nodes", std::move(nodes)}});
  }
  j["trees"] = std::move(trees);
  return j;
}

inline nlohmann::json model_to_json(const KnnModel& m,
                                    const std::string& vocab_hash_hex) {
  nlohmann::json j;
  j["kind"] = "knn";
  j["version"] = 1;
  j["vocab_hash"] = vocab_hash_hex;
  j["n_features"] = m.n_features;
  j["k"] = m.k;
  j["majority"] = std::string(to_string(m.majority));
  nlohmann::json vecs = nlohmann::json::array();
  for (const TermVector& v : m.stored_vectors)
    vecs.push_back(detail::sparse_to_json(v));
  j["vectors"] = std::move(vecs);
  nlohmann::json labels = nlohmann::json::array();
  for (Label l : m.stored_labels) labels.push_back(std::string(to_string(l)));
  j["labels"] = std::move(labels);
  return j;
}

inline nlohmann::json model_to_json(const LinearSvmModel& m,
                                    const std::string& vocab_hash_hex) {
  nlohmann::json j;
  j["kind"] = "svm";
  j["version"] = 1;
  j["vocab_hash"] = vocab_hash_hex;
  j["n_features"] = m.weights.size();
  j["weights"] = m.weights;
  j["bias"] = m.bias;
  j["lambda"] = m.params.lambda;
  j["epochs"] = m.params.epochs;
  j["seed"] = m.params.seed;
  return j;
}

inline ModelFile model_from_json(const nlohmann::json& j) {
  if (j.value("version", 0) != 1)
    throw Error("unsupported model version " +
                std::to_string(j.value("version", 0)));
  ModelFile file;
  file.kind = j.at("kind").get<std::string>();
  file.vocab_hash = j.at("vocab_hash").get<std::string>();
  if (file.kind == "rf") {
    RandomForestModel m;
    m.n_features = j.at("n_features").get<std::uint32_t>();
    m.params.n_trees = j.at("n_trees").get<std::uint32_t>();
    m.params.max_depth = j.at("max_depth").get<std::uint32_t>();
    m.params.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& tj : j.at("trees")) {
      DecisionTree tree;
      for (const auto& nj : tj.at("nodes")) {
        TreeNode n;
        if (nj.contains("leaf")) {
          n.leaf = nj.at("leaf").get<std::string>() == "scam" ? 1 : 0;
        } else {
          n.feature = nj.at("f").get<std::uint32_t>();
          n.threshold = nj.at("t").get<double>();
          n.left = nj.at("l").get<std::int32_t>();
          n.right = nj.at("r").get<std::int32_t>();
        }
        tree.nodes.push_back(n);
      }
      m.trees.push_back(std::move(tree));
    }
    file.model = std::move(m);
  } else if (file.kind == "knn") {
    KnnModel m;
    m.n_features = j.at("n_features").get<std::uint32_t>();
    m.k = j.at("k").get<std::uint32_t>();
    m.majority =
        j.at("majority").get<std::string>() == "scam" ? Label::Scam : Label::Legit;
    for (const auto& vj : j.at("vectors"))
      m.stored_vectors.push_back(detail::sparse_from_json(vj));
    for (const auto& lj : j.at("labels"))
      m.stored_labels.push_back(lj.get<std::string>() == "scam" ? Label::Scam
                                                                : Label::Legit);
    file.model = std::move(m);
  } else if (file.kind == "svm") {
    LinearSvmModel m;
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.params.lambda = j.at("lambda").get<double>();
    m.params.epochs = j.at("epochs").get<std::uint32_t>();
    m.params.seed = j.at("seed").get<std::uint64_t>();
    file.model = std::move(m);
  } else {
    throw Error("unknown model kind \"" + file.kind + "\"");
  }
  return file;
}

inline void save_model(const nlohmann::json& model_json,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model file: " + path.string());
  out << model_json.dump(2) << '\n';
}

inline ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed model file: ") + e.what());
  }
  return model_from_json(j);
}

inline Label predict_checked(const ModelFile& file, const Vocabulary& vocab,
                             const TermVector& x) {
  std::string got = vocab_hash(vocab);
  if (got != file.vocab_hash) throw VocabMismatchError(file.vocab_hash, got);
  return std::visit([&](const auto& m) { return predict(m, x); }, file.model);
}

}  // namespace scamdetect
