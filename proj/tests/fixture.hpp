#pragma once

// Seeded synthetic corpus used across the test suite. Every conversation —
// scam or legit — mentions planted terms AND filler words, so term presence
// alone carries no class signal. Scam calls are short (4 terms + 4 fillers,
// L2 weight ~0.35 per token); legit calls are long chatter (1 term + 16
// fillers, weight ~0.24). Classifiers must key on weight magnitude, which is
// exactly what carrier-sentence balancing dilutes: a balanced scam call holds
// 10 terms + 4 fillers, dropping every in-vocabulary weight to ~0.27 — the
// legit side of any split learned between the two training bands.

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "scamdetect/corpus.hpp"
#include "scamdetect/util.hpp"

namespace fixture {

inline const std::vector<std::string>& planted_terms() {
  static const std::vector<std::string> terms = {
      "irs",    "warrant", "bitcoin", "giftcard", "wire",
      "ssn",    "arrest",  "penalty", "refund",   "lawsuit"};
  return terms;
}

// Chosen to collide with neither the planted terms nor any word used by
// the default carrier sentences.
inline const std::vector<std::string>& filler_pool() {
  static const std::vector<std::string> pool = {
      "zucchini",  "orchid",     "kayak",   "walrus",  "saxophone",
      "meadow",    "lantern",    "harvest", "violin",  "canyon",
      "maple",     "otter",      "pebble",  "quilt",   "sunflower",
      "tandem",    "umbrella",   "village", "waffle",  "xylophone",
      "yogurt",    "zeppelin",   "acorn",   "badger",  "cactus",
      "dolphin",   "eclair",     "falcon",  "gondola", "hammock",
      "iguana",    "jasmine",    "koala",   "lighthouse", "marmot",
      "nutmeg",    "origami",    "penguin", "quartz",  "raccoon"};
  return pool;
}

namespace detail {

inline std::vector<std::string> sample_words(const std::vector<std::string>& pool,
                                             std::size_t n,
                                             scamdetect::Rng& rng) {
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + scamdetect::bounded(rng, idx.size() - i);
    std::swap(idx[i], idx[j]);
    out.push_back(pool[idx[i]]);
  }
  return out;
}

inline std::string join(const std::vector<std::string>& words,
                        std::size_t from, std::size_t to) {
  std::string out;
  for (std::size_t i = from; i < to; ++i) {
    if (!out.empty()) out += ' ';
    out += words[i];
  }
  return out;
}

}  // namespace detail

inline scamdetect::LabeledDataset make_corpus(std::size_t n_per_class = 100,
                                              std::uint64_t seed = 2024) {
  namespace sd = scamdetect;
  const auto& planted = planted_terms();
  const auto& filler = filler_pool();
  sd::LabeledDataset ds;
  ds.name = "fixture";
  sd::Rng rng(sd::mix_seed(seed, 0x66697874));  // "fixt"
  for (std::size_t i = 0; i < n_per_class; ++i) {
    {
      auto hot = detail::sample_words(planted, 4, rng);
      auto pad = detail::sample_words(filler, 4, rng);
      sd::Conversation c;
      c.id = "scam-" + std::to_string(i + 1);
      c.label = sd::Label::Scam;
      c.source = "fixture";
      c.turns = {{sd::Speaker::Caller, detail::join(hot, 0, hot.size())},
                 {sd::Speaker::Callee, detail::join(pad, 0, pad.size())}};
      ds.conversations.push_back(std::move(c));
    }
    {
      auto chat = detail::sample_words(filler, 16, rng);
      std::string tail = detail::join(chat, 8, chat.size());
      tail += ' ';
      tail += planted[sd::bounded(rng, planted.size())];
      sd::Conversation c;
      c.id = "legit-" + std::to_string(i + 1);
      c.label = sd::Label::Legit;
      c.source = "fixture";
      c.turns = {{sd::Speaker::Caller, detail::join(chat, 0, 8)},
                 {sd::Speaker::Callee, tail}};
      ds.conversations.push_back(std::move(c));
    }
  }
  return ds;
}

}  // namespace fixture
