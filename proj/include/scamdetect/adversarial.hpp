#pragma once

// Term-balanced dataset construction: plant the discriminative terms into
// every conversation of both classes so that keyword separability dies
// while labels, counts, and pre-existing turns stay untouched.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "scamdetect/corpus.hpp"
#include "scamdetect/features.hpp"
#include "scamdetect/llm.hpp"
#include "scamdetect/util.hpp"

namespace scamdetect {

struct CoverageUnreachableError : Error {
  CoverageUnreachableError(const std::string& id, const std::string& why)
      : Error("cannot reach target coverage for \"" + id + "\": " + why) {}
};

struct GenerationFailedError : Error {
  GenerationFailedError(Label cls, const std::string& reason)
      : Error("generation failed for class " + std::string(to_string(cls)) +
              ": " + reason) {}
};

// Neutral small-talk templates, one "{term}" slot each. Shared verbatim
// across both classes so the filler itself carries no label signal.
inline const std::vector<std::string>& default_carriers() {
  static const std::vector<std::string> carriers = {
      "I was reading about {term} yesterday.",
      "My neighbor mentioned {term} over coffee.",
      "There was a radio segment on {term} this morning.",
      "Someone at work brought up {term} again.",
      "The newspaper had a column about {term}.",
      "I saw a documentary touching on {term} last week.",
      "My cousin keeps talking about {term}.",
      "We discussed {term} at dinner the other night.",
      "A friend forwarded me an article on {term}.",
      "I overheard a conversation about {term} on the bus.",
      "The library had a display about {term}.",
      "My book club picked a story involving {term}.",
      "There was a podcast episode about {term} recently.",
      "I jotted down a note about {term} earlier.",
      "The community newsletter covered {term} this month.",
      "My sister asked me about {term} on the phone.",
      "I stumbled on a blog post about {term}.",
      "The evening news ran a piece on {term}.",
      "A magazine in the waiting room mentioned {term}.",
      "I heard two people debating {term} at the market.",
      "My old classmate wrote to me about {term}.",
      "The bulletin board downtown mentioned {term}.",
      "I caught part of a lecture about {term}.",
      "Our study group touched on {term} briefly.",
      "The crossword clue today involved {term}.",
      "I found a pamphlet about {term} in my mailbox.",
      "My uncle tells a long story about {term}.",
      "The quiz night had a question on {term}.",
      "A documentary narrator explained {term} nicely.",
      "I bookmarked a page about {term} to read later.",
      "The morning show hosts joked about {term}.",
      "My diary from last spring mentions {term}.",
      "A stranger at the park asked me about {term}.",
      "The trivia calendar entry today was {term}.",
      "I sketched a little diagram about {term}.",
      "Our teacher once digressed into {term} for an hour.",
      "The museum exhibit had a corner on {term}.",
      "I compared two articles about {term} last night.",
      "My grandmother has opinions about {term}.",
      "The café chalkboard referenced {term} somehow.",
      "I replayed an interview about {term} twice.",
      "The almanac has a footnote about {term}.",
      "A billboard on the highway mentioned {term}.",
      "My running partner brought up {term} mid-lap.",
      "The encyclopedia entry on {term} is surprisingly short.",
      "I translated a paragraph about {term} for practice.",
      "The seminar handout summarized {term} in a box.",
      "My penpal asked what I think about {term}.",
      "The documentary credits thanked an expert on {term}.",
      "I misheard a lyric as being about {term}.",
      "The gardening club oddly discussed {term} today.",
      "A flyer under my door advertised a talk on {term}.",
      "I quizzed my brother about {term} for fun.",
      "The archive room has a folder labeled {term}.",
      "My commute playlist had an episode about {term}.",
      "The town hall meeting drifted toward {term}.",
      "I annotated a chapter about {term} last weekend.",
      "The lecture notes end with a question about {term}.",
      "A rerun last night referenced {term} in passing.",
      "My chess partner rambled about {term} between moves.",
      "The phrasebook example sentence used {term}.",
      "I clipped a cartoon about {term} for the fridge.",
      "The volunteer orientation mentioned {term} once.",
      "My travel journal describes {term} in the margins.",
  };
  return carriers;
}

// Carriers are consumed without replacement within one conversation, so a
// plan is only valid if the pool can cover a conversation that starts from
// zero coverage.
struct InjectionPlan {
  RankedTerms terms;
  double target_coverage = 1.0;
  std::vector<std::string> carrier_sentences = default_carriers();
  std::uint64_t seed = 0;

  std::size_t required_terms() const {
    if (terms.size() == 0) return 0;
    double need = target_coverage * static_cast<double>(terms.size());
    auto n = static_cast<std::size_t>(std::ceil(need - 1e-12));
    return std::min(n, terms.size());
  }

  void validate() const {
    if (!(target_coverage > 0.0) || target_coverage > 1.0)
      throw InvalidArgumentError("target_coverage must be in (0, 1]");
    for (const std::string& c : carrier_sentences) {
      std::size_t first = c.find("{term}");
      if (first == std::string::npos ||
          c.find("{term}", first + 1) != std::string::npos)
        throw InvalidArgumentError(
            "carrier must contain exactly one {term} slot: \"" + c + "\"");
    }
    if (carrier_sentences.size() < required_terms())
      throw InvalidArgumentError(
          "need at least " + std::to_string(required_terms()) +
          " carriers for target coverage " + std::to_string(target_coverage) +
          " over " + std::to_string(terms.size()) + " terms");
  }
};

namespace detail {

inline std::string fill_carrier(const std::string& carrier,
                                const std::string& term) {
  std::string out = carrier;
  out.replace(out.find("{term}"), 6, term);
  return out;
}

}  // namespace detail

// Copies the conversation, appends "-adv" to the id, and inserts carrier
// turns for missing terms (best-ranked first) until coverage reaches the
// target. Carrier choice, insertion index, and speaker all come from an RNG
// stream derived from (plan.seed, conv.id), so the whole dataset can be
// balanced in any order with identical results.
inline Conversation inject_terms(const Conversation& conv,
                                 const InjectionPlan& plan) {
  plan.validate();
  Conversation out = conv;
  out.id += "-adv";
  if (plan.terms.size() == 0) return out;

  std::unordered_set<std::string> present;
  for (std::string& tok : tokenize(flatten(conv))) present.insert(std::move(tok));
  std::size_t hits = 0;
  std::vector<std::string> missing;  // rank order
  for (const auto& [term, score] : plan.terms.terms) {
    if (present.count(term)) ++hits;
    else missing.push_back(term);
  }
  const std::size_t want = plan.required_terms();
  if (hits >= want) return out;

  Rng rng(mix_seed(plan.seed, fnv1a64(conv.id)));
  std::vector<std::string> pool = plan.carrier_sentences;
  for (const std::string& term : missing) {
    if (hits >= want) break;
    if (pool.empty())
      throw CoverageUnreachableError(conv.id, "carriers exhausted");
    std::size_t pick = bounded(rng, pool.size());
    std::string sentence = detail::fill_carrier(pool[pick], term);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    Turn t;
    t.speaker = bounded(rng, 2) == 0 ? Speaker::Caller : Speaker::Callee;
    t.text = sentence;
    std::size_t at = bounded(rng, out.turns.size() + 1);
    out.turns.insert(out.turns.begin() + static_cast<std::ptrdiff_t>(at),
                     std::move(t));
    ++hits;
  }

  // Recount through the real tokenizer; a term that cannot survive it
  // (e.g. one-letter) would otherwise slip past the counter above.
  if (term_coverage(flatten(out), plan.terms) <
      plan.target_coverage - 1e-12) {
    throw CoverageUnreachableError(conv.id,
                                   "injected terms did not survive tokenization");
  }
  return out;
}

// Balances every conversation of both classes. Labels, ordering, and counts
// are preserved; only new turns (and the "-adv" id suffix) are added.
inline LabeledDataset balance_dataset(const LabeledDataset& ds,
                                      const InjectionPlan& plan) {
  plan.validate();
  LabeledDataset out;
  out.name = ds.name + "-balanced";
  out.conversations.reserve(ds.conversations.size());
  for (const Conversation& conv : ds.conversations) {
    out.conversations.push_back(inject_terms(conv, plan));
  }
  return out;
}

struct GenerationOptions {
  double target_coverage = 1.0;
  int max_retries = 3;  // re-asks per sample after the first attempt
};

namespace detail {

inline std::string generation_prompt(Label cls, const RankedTerms& terms,
                                     std::size_t index, std::size_t total,
                                     std::uint64_t seed) {
  std::string p =
      "Write a realistic phone conversation between a caller and a callee.\n";
  p += cls == Label::Scam
           ? "The call must read as a telephone scam attempt.\n"
           : "The call must read as an ordinary, legitimate phone call.\n";
  p += "Format every line as \"Caller: ...\" or \"Callee: ...\" with no "
       "other text. Use 4 to 12 lines.\n";
  p += "Work every one of these words naturally into the dialogue:";
  for (const auto& [term, score] : terms.terms) {
    p += ' ';
    p += term;
    p += ',';
  }
  if (!terms.terms.empty()) p.back() = '.';
  p += "\nSample " + std::to_string(index + 1) + " of " +
       std::to_string(total) + ", batch " + std::to_string(seed) + ".";
  return p;
}

inline bool parse_generated_turns(const std::string& text,
                                  std::vector<Turn>& turns) {
  turns.clear();
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string line(trim(text.substr(
        pos, nl == std::string::npos ? std::string::npos : nl - pos)));
    if (!line.empty()) {
      Turn t;
      if (line.rfind("Caller:", 0) == 0) {
        t.speaker = Speaker::Caller;
        t.text = std::string(trim(line.substr(7)));
      } else if (line.rfind("Callee:", 0) == 0) {
        t.speaker = Speaker::Callee;
        t.text = std::string(trim(line.substr(7)));
      } else {
        return false;
      }
      if (t.text.empty()) return false;
      turns.push_back(std::move(t));
    }
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
  return turns.size() >= 2;
}

}  // namespace detail

// Optional fidelity path: ask a backend to author term-bearing samples of
// each class. Every response must parse into Caller/Callee turns and hit
// the coverage target or it is rejected and re-asked (the attempt number
// is the backend run index, so record/replay stays deterministic).
inline LabeledDataset generate_llm_dataset(Backend& backend,
                                           std::size_t n_per_class,
                                           const RankedTerms& terms,
                                           std::uint64_t seed,
                                           const GenerationOptions& opts = {}) {
  if (n_per_class == 0) throw InvalidArgumentError("n_per_class must be >= 1");
  LabeledDataset out;
  out.name = "generated";
  for (Label cls : {Label::Scam, Label::Legit}) {
    for (std::size_t i = 0; i < n_per_class; ++i) {
      std::string prompt =
          detail::generation_prompt(cls, terms, i, n_per_class, seed);
      std::string reason = "retry limit reached";
      bool accepted = false;
      for (int attempt = 0; attempt <= opts.max_retries && !accepted;
           ++attempt) {
        std::string text;
        try {
          text = backend.complete(prompt, attempt);
        } catch (const std::exception& e) {
          reason = e.what();
          continue;
        }
        std::vector<Turn> turns;
        if (!detail::parse_generated_turns(text, turns)) {
          reason = "response did not parse into turns";
          continue;
        }
        Conversation conv;
        conv.id = std::string("gen-") + std::string(to_string(cls)) + "-" +
                  std::to_string(i + 1);
        conv.label = cls;
        conv.source = "generated";
        conv.turns = std::move(turns);
        if (term_coverage(flatten(conv), terms) <
            opts.target_coverage - 1e-12) {
          reason = "required terms missing from response";
          continue;
        }
        out.conversations.push_back(std::move(conv));
        accepted = true;
      }
      if (!accepted) throw GenerationFailedError(cls, reason);
    }
  }
  return out;
}

}  // namespace scamdetect
