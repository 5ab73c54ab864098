#include <algorithm>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "scamdetect/adversarial.hpp"

namespace sd = scamdetect;

static sd::Conversation two_turn_conv(const std::string& id) {
  sd::Conversation c;
  c.id = id;
  c.label = sd::Label::Legit;
  c.source = "synthetic";
  c.turns.push_back({sd::Speaker::Caller, "harbor violet timber crescent"});
  c.turns.push_back({sd::Speaker::Callee, "saddle willow ember prairie"});
  return c;
}

static sd::RankedTerms ranked(std::vector<std::string> terms) {
  sd::RankedTerms rt;
  double score = static_cast<double>(terms.size());
  for (auto& t : terms) rt.terms.emplace_back(std::move(t), score--);
  return rt;
}

static std::size_t count_token(const sd::Conversation& c,
                               const std::string& term) {
  std::size_t n = 0;
  for (const auto& tok : sd::tokenize(sd::flatten(c)))
    if (tok == term) ++n;
  return n;
}

static bool keeps_original_turns(const std::vector<sd::Turn>& orig,
                                 const std::vector<sd::Turn>& out) {
  std::size_t j = 0;
  for (const auto& t : out)
    if (j < orig.size() && t == orig[j]) ++j;
  return j == orig.size();
}

TEST_CASE("injection plans validate their carriers and target") {
  sd::InjectionPlan plan;
  plan.terms = ranked({"irs", "warrant"});

  SECTION("carrier without a slot") {
    plan.carrier_sentences = {"I have no slot at all."};
    CHECK_THROWS_AS(plan.validate(), sd::InvalidArgumentError);
  }
  SECTION("carrier with two slots") {
    plan.carrier_sentences = {"Both {term} and {term} again."};
    CHECK_THROWS_AS(plan.validate(), sd::InvalidArgumentError);
  }
  SECTION("too few carriers for the target") {
    plan.carrier_sentences = {"Just one about {term} here."};
    CHECK_THROWS_AS(plan.validate(), sd::InvalidArgumentError);
  }
  SECTION("coverage target bounds") {
    plan.target_coverage = 0.0;
    CHECK_THROWS_AS(plan.validate(), sd::InvalidArgumentError);
    plan.target_coverage = 1.5;
    CHECK_THROWS_AS(plan.validate(), sd::InvalidArgumentError);
    plan.target_coverage = 1.0;
    CHECK_NOTHROW(plan.validate());
  }
}

TEST_CASE("required term count rounds up without float drift") {
  sd::InjectionPlan plan;
  plan.terms = ranked({"t1", "t2", "t3", "t4", "t5",
                       "t6", "t7", "t8", "t9", "t10"});
  plan.target_coverage = 0.3;  // 0.3 * 10 is just above 3.0 in binary
  CHECK(plan.required_terms() == 3);
  plan.target_coverage = 0.35;
  CHECK(plan.required_terms() == 4);
  plan.target_coverage = 1.0;
  CHECK(plan.required_terms() == 10);
}

TEST_CASE("a covered conversation is returned unchanged apart from its id") {
  auto conv = two_turn_conv("c1");
  conv.turns.push_back({sd::Speaker::Caller, "we spoke about irs and warrant"});
  sd::InjectionPlan plan;
  plan.terms = ranked({"irs", "warrant"});
  auto out = sd::inject_terms(conv, plan);
  CHECK(out.id == "c1-adv");
  CHECK(out.turns == conv.turns);
  CHECK(out.label == conv.label);
  CHECK(out.source == conv.source);
}

TEST_CASE("all missing terms are injected exactly once") {
  auto conv = two_turn_conv("c2");
  std::vector<std::string> terms = {"irs",     "warrant", "bitcoin", "giftcard",
                                    "wire",    "ssn",     "arrest",  "penalty",
                                    "refund",  "lawsuit"};
  sd::InjectionPlan plan;
  plan.terms = ranked(terms);
  plan.seed = 17;
  auto out = sd::inject_terms(conv, plan);
  CHECK(out.turns.size() == conv.turns.size() + 10);
  for (const auto& t : terms) CHECK(count_token(out, t) == 1);
  CHECK(sd::term_coverage(sd::flatten(out), plan.terms) == 1.0);
  CHECK(keeps_original_turns(conv.turns, out.turns));
}

TEST_CASE("partial targets stop as soon as coverage is reached") {
  auto conv = two_turn_conv("c3");
  sd::InjectionPlan plan;
  plan.terms = ranked({"irs", "warrant", "bitcoin", "giftcard"});
  plan.target_coverage = 0.5;
  auto out = sd::inject_terms(conv, plan);
  CHECK(out.turns.size() == conv.turns.size() + 2);
  CHECK(sd::term_coverage(sd::flatten(out), plan.terms) >= 0.5);
  // best-ranked missing terms go in first
  CHECK(count_token(out, "irs") == 1);
  CHECK(count_token(out, "warrant") == 1);
  CHECK(count_token(out, "bitcoin") == 0);
}

TEST_CASE("injection is deterministic and order independent") {
  sd::LabeledDataset ds;
  ds.name = "pair";
  ds.conversations = {two_turn_conv("a"), two_turn_conv("b")};
  ds.conversations[0].label = sd::Label::Scam;
  sd::InjectionPlan plan;
  plan.terms = ranked({"irs", "warrant", "bitcoin"});
  plan.seed = 5;

  auto once = sd::balance_dataset(ds, plan);
  auto twice = sd::balance_dataset(ds, plan);
  REQUIRE(once.conversations.size() == 2);
  CHECK(once.name == "pair-balanced");
  CHECK(once.conversations == twice.conversations);

  // per-conversation RNG streams: balancing in bulk equals injecting alone
  CHECK(sd::inject_terms(ds.conversations[1], plan) == once.conversations[1]);

  sd::InjectionPlan other = plan;
  other.seed = 6;
  CHECK(sd::balance_dataset(ds, other).conversations != once.conversations);
}

TEST_CASE("terms that cannot survive tokenization are caught by the recount") {
  auto conv = two_turn_conv("c7");
  sd::InjectionPlan plan;
  plan.terms = ranked({"q"});  // single letters are dropped by the tokenizer
  try {
    sd::inject_terms(conv, plan);
    FAIL("expected CoverageUnreachableError");
  } catch (const sd::CoverageUnreachableError& e) {
    CHECK(std::string(e.what()).find("c7") != std::string::npos);
  }
}

// Two classes whose only lexical difference is five scam-side terms and five
// legit-side terms over byte-identical base turns. Balancing injects five
// carriers into every conversation of both classes, so the class means of
// every planted term should collapse.
static sd::LabeledDataset symmetric_corpus() {
  const std::vector<std::string> filler = {
      "harbor", "violet", "timber",  "crescent", "saddle",  "willow",
      "ember",  "prairie", "cobble", "drift",    "fable",   "garnet",
      "hollow", "ivory",  "juniper", "kestrel",  "lagoon",  "mantle",
      "noble",  "opal",   "parlor",  "quiver",   "ripple",  "summit",
      "tundra", "vessel", "walnut",  "yonder",   "zephyr",  "bramble"};
  sd::LabeledDataset ds;
  ds.name = "symmetric";
  for (std::size_t i = 0; i < 24; ++i) {
    std::string base1, base2;
    for (std::size_t j = 0; j < 6; ++j) {
      if (j) base1 += ' ';
      base1 += filler[(i * 5 + j) % filler.size()];
    }
    for (std::size_t j = 0; j < 6; ++j) {
      if (j) base2 += ' ';
      base2 += filler[(i * 11 + 2 * j) % filler.size()];
    }
    sd::Conversation scam;
    scam.id = "scam-" + std::to_string(i);
    scam.label = sd::Label::Scam;
    scam.source = "synthetic";
    scam.turns = {{sd::Speaker::Caller, base1},
                  {sd::Speaker::Callee, base2},
                  {sd::Speaker::Caller, "irs warrant bitcoin giftcard wire"}};
    sd::Conversation legit;
    legit.id = "legit-" + std::to_string(i);
    legit.label = sd::Label::Legit;
    legit.source = "synthetic";
    legit.turns = {{sd::Speaker::Caller, base1},
                   {sd::Speaker::Callee, base2},
                   {sd::Speaker::Caller, "recipe garden puppy sunset picnic"}};
    ds.conversations.push_back(std::move(scam));
    ds.conversations.push_back(std::move(legit));
  }
  return ds;
}

static sd::Vocabulary fit(const sd::LabeledDataset& ds) {
  std::vector<std::string> docs;
  docs.reserve(ds.conversations.size());
  for (const auto& c : ds.conversations) docs.push_back(sd::flatten(c));
  return sd::fit_vocabulary(docs);
}

TEST_CASE("balancing preserves everything except the injected turns") {
  auto ds = symmetric_corpus();
  auto vocab = fit(ds);
  sd::InjectionPlan plan;
  plan.terms = sd::top_k_terms(ds, vocab, 10);
  plan.target_coverage = 0.9;
  plan.seed = 20;
  auto balanced = sd::balance_dataset(ds, plan);

  REQUIRE(balanced.conversations.size() == ds.conversations.size());
  CHECK(balanced.count(sd::Label::Scam) == ds.count(sd::Label::Scam));
  double min_cov = 1.0;
  for (std::size_t i = 0; i < ds.conversations.size(); ++i) {
    const auto& before = ds.conversations[i];
    const auto& after = balanced.conversations[i];
    CHECK(after.id == before.id + "-adv");
    CHECK(after.label == before.label);
    CHECK(after.source == before.source);
    CHECK(keeps_original_turns(before.turns, after.turns));
    min_cov = std::min(min_cov,
                       sd::term_coverage(sd::flatten(after), plan.terms));
  }
  CHECK(min_cov >= 0.9);
}

TEST_CASE("balancing collapses the scores of the discriminative terms") {
  auto ds = symmetric_corpus();
  auto vocab = fit(ds);
  auto top = sd::top_k_terms(ds, vocab, 10);

  std::set<std::string> got;
  for (const auto& [term, score] : top.terms) got.insert(term);
  CHECK(got == std::set<std::string>{"irs", "warrant", "bitcoin", "giftcard",
                                     "wire", "recipe", "garden", "puppy",
                                     "sunset", "picnic"});

  sd::InjectionPlan plan;
  plan.terms = top;
  plan.seed = 20;
  auto balanced = sd::balance_dataset(ds, plan);

  auto vocab2 = fit(balanced);
  auto rescored = sd::top_k_terms(balanced, vocab2, vocab2.size());
  std::map<std::string, double> after;
  for (const auto& [term, score] : rescored.terms) after[term] = score;

  for (const auto& [term, score] : top.terms) {
    REQUIRE(score > 0.1);  // the bound below must bite
    REQUIRE(after.count(term) == 1);
    CHECK(after[term] < 0.1 * score);
  }
}

namespace {

// Generation stub: unusable below `good_from` (the attempt index doubles as
// the backend run), dialogue with the requested terms afterwards.
class ScriptedGenBackend final : public sd::Backend {
 public:
  ScriptedGenBackend(std::string terms_line, int good_from = 0,
                     std::string bad_payload = "static hiss, nothing usable")
      : terms_line_(std::move(terms_line)),
        good_from_(good_from),
        bad_payload_(std::move(bad_payload)) {}

  std::string id() const override { return "mock:scripted-gen"; }

 private:
  std::string do_complete(const std::string& prompt, int run) override {
    if (run < good_from_) return bad_payload_;
    bool scam = prompt.find("scam attempt") != std::string::npos;
    std::string first =
        scam ? "Caller: Final notice about " + terms_line_ + ", pay now.\n"
             : "Caller: Fun fact involving " + terms_line_ + " today.\n";
    return first + "Callee: Understood, thanks for calling.";
  }

  std::string terms_line_;
  int good_from_;
  std::string bad_payload_;
};

}  // namespace

TEST_CASE("generated datasets carry both classes with validated coverage") {
  auto terms = ranked({"ledger", "permit"});
  ScriptedGenBackend backend("ledger permit");
  auto ds = sd::generate_llm_dataset(backend, 3, terms, 99);
  REQUIRE(ds.size() == 6);
  CHECK(ds.count(sd::Label::Scam) == 3);
  CHECK(ds.conversations[0].id == "gen-scam-1");
  CHECK(ds.conversations[3].id == "gen-legit-1");
  for (const auto& c : ds.conversations) {
    CHECK(c.source == "generated");
    CHECK(c.turns.size() >= 2);
    CHECK(sd::term_coverage(sd::flatten(c), terms) == 1.0);
  }
  CHECK(backend.calls() == 6);
}

TEST_CASE("unparseable generations are retried on the next attempt") {
  auto terms = ranked({"ledger"});
  ScriptedGenBackend backend("ledger", 1);
  auto ds = sd::generate_llm_dataset(backend, 1, terms, 3);
  CHECK(ds.size() == 2);
  CHECK(backend.calls() == 4);  // one wasted attempt per sample
}

TEST_CASE("generations missing the terms are rejected and retried") {
  auto terms = ranked({"ledger"});
  ScriptedGenBackend backend("ledger", 1,
                             "Caller: Hello there my friend.\nCallee: Hi.");
  auto ds = sd::generate_llm_dataset(backend, 1, terms, 3);
  CHECK(ds.size() == 2);
  CHECK(backend.calls() == 4);
}

TEST_CASE("generation gives up after the retry budget") {
  auto terms = ranked({"ledger"});
  ScriptedGenBackend backend("ledger", 1000);
  sd::GenerationOptions opts;
  opts.max_retries = 1;
  try {
    sd::generate_llm_dataset(backend, 1, terms, 3, opts);
    FAIL("expected GenerationFailedError");
  } catch (const sd::GenerationFailedError& e) {
    CHECK(std::string(e.what()).find("scam") != std::string::npos);
  }
  CHECK(backend.calls() == 2);
  CHECK_THROWS_AS(sd::generate_llm_dataset(backend, 0, terms, 3),
                  sd::InvalidArgumentError);
}

TEST_CASE("recorded generations replay into the identical dataset") {
  auto terms = ranked({"ledger", "permit"});
  ScriptedGenBackend inner("ledger permit");
  auto store = std::make_shared<sd::ResponseStore>();
  sd::RecordingBackend recorder(inner, store);
  auto live = sd::generate_llm_dataset(recorder, 2, terms, 7);
  const auto inner_calls = inner.calls();

  sd::ReplayBackend replay(store);
  auto replayed = sd::generate_llm_dataset(replay, 2, terms, 7);
  CHECK(replayed.conversations == live.conversations);
  CHECK(inner.calls() == inner_calls);
}
