#pragma once

// LLM detector harness: prompt rendering, yes/no verdict parsing, pluggable
// completion backends (remote client lives in http_backend.hpp, offline
// mocks here) and the repeated-trial evaluator that fills a TrialMatrix.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "scamdetect/corpus.hpp"
#include "scamdetect/metrics.hpp"
#include "scamdetect/util.hpp"

namespace scamdetect {

inline constexpr std::string_view kDetectionInstruction =
    "Please determine if this conversation exhibits any fraudulent "
    "tendencies. Provide a yes or no answer and explain your reasoning.";

struct Verdict {
  Decision decision = Decision::Unparseable;
  std::string rationale;  // full model text
  std::int64_t latency_ms = 0;
};

struct BackendConfig {
  std::string endpoint;  // e.g. http://localhost:8080/v1/chat/completions
  std::string model;
  double temperature = 1.0;
  double timeout_s = 60.0;
  int max_retries = 3;
  std::string api_key_env;  // name of the env var holding the key
};

struct BackendError : Error {
  explicit BackendError(const std::string& cause)
      : Error("backend error: " + cause) {}
};

struct ReplayMissError : Error {
  explicit ReplayMissError(const std::string& prompt_hash, int run)
      : Error("no recorded response for prompt " + prompt_hash + " run " +
              std::to_string(run)) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(what) {}
};

// Instruction, a blank line, then one "Caller:"/"Callee:" line per turn.
inline std::string render_prompt(const Conversation& conv) {
  std::string out(kDetectionInstruction);
  out += "\n";
  for (const Turn& t : conv.turns) {
    out += "\n";
    out += t.speaker == Speaker::Caller ? "Caller: " : "Callee: ";
    out += t.text;
  }
  return out;
}

// First standalone "yes"/"no" word, case-insensitive, within the first 20
// word tokens decides the verdict; anything else is Unparseable.
inline Verdict parse_verdict(const std::string& text) {
  Verdict v;
  v.rationale = text;
  std::string word;
  int seen = 0;
  auto check = [&]() -> bool {
    if (word.empty()) return false;
    ++seen;
    if (word == "yes") {
      v.decision = Decision::Scam;
      return true;
    }
    if (word == "no") {
      v.decision = Decision::Legit;
      return true;
    }
    word.clear();
    return seen >= 20;
  };
  for (unsigned char c : text) {
    if (c >= '0' && c <= '9') word.push_back(static_cast<char>(c));
    else if (c >= 'a' && c <= 'z') word.push_back(static_cast<char>(c));
    else if (c >= 'A' && c <= 'Z')
      word.push_back(static_cast<char>(c - 'A' + 'a'));
    else if (!word.empty() && check()) return v;
  }
  if (!word.empty()) check();
  return v;
}

// Completion backend contract. complete() counts every invocation, which
// lets tests assert that warm caches and replay files avoid traffic.
class Backend {
 public:
  virtual ~Backend() = default;

  std::string complete(const std::string& prompt, int run) {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return do_complete(prompt, run);
  }

  virtual std::string id() const = 0;
  std::uint64_t calls() const { return calls_.load(std::memory_order_relaxed); }

 private:
  virtual std::string do_complete(const std::string& prompt, int run) = 0;
  std::atomic<std::uint64_t> calls_{0};
};

// Keyed response store backing both the evaluator cache and record/replay
// files. On-disk format is JSONL: {"prompt_hash": str, "run": int,
// "response": str}. Safe for concurrent lookup/insert.
class ResponseStore {
 public:
  ResponseStore() = default;

  explicit ResponseStore(const std::filesystem::path& file) : path_(file) {
    std::ifstream in(file, std::ios::binary);
    if (in) {
      std::string line;
      std::size_t line_no = 0;
      while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(line);
          entries_[{j.at("prompt_hash").get<std::string>(),
                    j.at("run").get<int>()}] =
              j.at("response").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
          throw ParseError(line_no, e.what());
        }
      }
    }
  }

  std::optional<std::string> lookup(const std::string& key, int run) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find({key, run});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void insert(const std::string& key, int run, const std::string& response) {
    std::lock_guard lock(mu_);
    auto [it, fresh] = entries_.insert_or_assign({key, run}, response);
    (void)it;
    if (fresh && !path_.empty()) {
      std::ofstream out(path_, std::ios::binary | std::ios::app);
      nlohmann::json j{{"prompt_hash", key}, {"run", run}, {"response", response}};
      out << j.dump() << '\n';
    }
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }

 private:
  mutable std::mutex mu_;
  std::map<std::pair<std::string, int>, std::string> entries_;
  std::filesystem::path path_;
};

class AlwaysYesBackend final : public Backend {
 public:
  std::string id() const override { return "mock:always-yes"; }

 private:
  std::string do_complete(const std::string&, int) override {
    return "Yes. Scripted affirmative verdict.";
  }
};

class AlwaysNoBackend final : public Backend {
 public:
  std::string id() const override { return "mock:always-no"; }

 private:
  std::string do_complete(const std::string&, int) override {
    return "No. Scripted negative verdict.";
  }
};

namespace detail {

inline std::map<std::uint64_t, Label> truth_by_prompt(const LabeledDataset& ds) {
  std::map<std::uint64_t, Label> truth;
  for (const Conversation& c : ds.conversations) {
    truth[fnv1a64(render_prompt(c))] = c.label;
  }
  return truth;
}

inline std::string verdict_text(Label l) {
  return l == Label::Scam
             ? "Yes, this conversation shows signs of a scam."
             : "No, this conversation looks like an ordinary call.";
}

}  // namespace detail

// Answers with the ground-truth label of the conversation whose rendered
// prompt matches.
class GroundTruthBackend final : public Backend {
 public:
  explicit GroundTruthBackend(const LabeledDataset& ds)
      : truth_(detail::truth_by_prompt(ds)) {}

  std::string id() const override { return "mock:ground-truth"; }

 private:
  std::string do_complete(const std::string& prompt, int) override {
    auto it = truth_.find(fnv1a64(prompt));
    if (it == truth_.end()) throw BackendError("prompt not in dataset");
    return detail::verdict_text(it->second);
  }

  std::map<std::uint64_t, Label> truth_;
};

// Ground truth flipped with probability p, independently per (prompt, run)
// and deterministic given the seed.
class FlipProbBackend final : public Backend {
 public:
  FlipProbBackend(const LabeledDataset& ds, double p, std::uint64_t seed)
      : truth_(detail::truth_by_prompt(ds)), p_(p), seed_(seed) {
    if (p < 0.0 || p > 1.0) throw ConfigError("flip probability must be in [0,1]");
  }

  std::string id() const override {
    return "mock:flip:" + std::to_string(p_) + ":" + std::to_string(seed_);
  }

 private:
  std::string do_complete(const std::string& prompt, int run) override {
    std::uint64_t ph = fnv1a64(prompt);
    auto it = truth_.find(ph);
    if (it == truth_.end()) throw BackendError("prompt not in dataset");
    double r = static_cast<double>(
                   splitmix64(mix_seed(seed_, ph) ^
                              splitmix64(static_cast<std::uint64_t>(run))) >>
                   11) *
               0x1.0p-53;
    Label l = it->second;
    if (r < p_) l = l == Label::Scam ? Label::Legit : Label::Scam;
    return detail::verdict_text(l);
  }

  std::map<std::uint64_t, Label> truth_;
  double p_;
  std::uint64_t seed_;
};

// Serves responses recorded in a ResponseStore, keyed by prompt hash and
// run index; misses raise ReplayMissError.
class ReplayBackend final : public Backend {
 public:
  explicit ReplayBackend(std::shared_ptr<ResponseStore> store)
      : store_(std::move(store)) {}

  std::string id() const override { return "mock:replay"; }

 private:
  std::string do_complete(const std::string& prompt, int run) override {
    std::string key = fnv1a_hex(prompt);
    auto hit = store_->lookup(key, run);
    if (!hit) throw ReplayMissError(key, run);
    return *hit;
  }

  std::shared_ptr<ResponseStore> store_;
};

// Pass-through wrapper that records every successful completion under the
// prompt hash, producing a file a ReplayBackend can serve later.
class RecordingBackend final : public Backend {
 public:
  RecordingBackend(Backend& inner, std::shared_ptr<ResponseStore> store)
      : inner_(inner), store_(std::move(store)) {}

  std::string id() const override { return inner_.id(); }

 private:
  std::string do_complete(const std::string& prompt, int run) override {
    std::string response = inner_.complete(prompt, run);
    store_->insert(fnv1a_hex(prompt), run, response);
    return response;
  }

  Backend& inner_;
  std::shared_ptr<ResponseStore> store_;
};

// Script grammar: always-yes | always-no | ground-truth | flip:P[:SEED] |
// replay:PATH. GroundTruth and FlipProb need the dataset to answer from.
inline std::unique_ptr<Backend> make_mock_backend(const std::string& script,
                                                  const LabeledDataset& ds) {
  if (script == "always-yes") return std::make_unique<AlwaysYesBackend>();
  if (script == "always-no") return std::make_unique<AlwaysNoBackend>();
  if (script == "ground-truth") return std::make_unique<GroundTruthBackend>(ds);
  if (script.rfind("flip:", 0) == 0) {
    std::string rest = script.substr(5);
    std::uint64_t seed = 0;
    std::size_t colon = rest.find(':');
    if (colon != std::string::npos) {
      seed = std::stoull(rest.substr(colon + 1));
      rest = rest.substr(0, colon);
    }
    return std::make_unique<FlipProbBackend>(ds, std::stod(rest), seed);
  }
  if (script.rfind("replay:", 0) == 0) {
    auto store = std::make_shared<ResponseStore>(
        std::filesystem::path(script.substr(7)));
    return std::make_unique<ReplayBackend>(std::move(store));
  }
  throw ConfigError("unknown mock script \"" + script + "\"");
}

struct EvalOptions {
  int runs = 5;
  int parallelism = 1;
  int max_retries = 3;          // per-cell retries after the first attempt
  int retry_backoff_ms = 250;   // doubled per retry
  std::uint64_t seed = 0;
  ResponseStore* cache = nullptr;  // consulted/filled when non-null
  nlohmann::json config_echo = nlohmann::json::object();
};

struct EvalOutcome {
  TrialMatrix trials;
  EvalReport report;
};

// Runs every sample through the backend `runs` times and scores the
// resulting TrialMatrix. Cells are keyed by (sample, run), so the outcome
// is independent of request completion order. Backend failures after
// retries become Unparseable verdicts and are counted, never thrown.
inline EvalOutcome evaluate(const LabeledDataset& ds, Backend& backend,
                            const EvalOptions& opts = {}) {
  if (opts.runs < 1) throw ConfigError("runs must be >= 1");
  if (opts.parallelism < 1) throw ConfigError("parallelism must be >= 1");
  if (opts.max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (ds.conversations.empty()) throw EmptyDatasetError();

  const std::size_t n = ds.conversations.size();
  const std::size_t runs = static_cast<std::size_t>(opts.runs);

  std::vector<std::string> prompts(n);
  std::vector<Label> truth(n);
  TrialMatrix tm;
  tm.sample_ids.resize(n);
  tm.verdicts.assign(n, std::vector<Decision>(runs, Decision::Unparseable));
  for (std::size_t i = 0; i < n; ++i) {
    prompts[i] = render_prompt(ds.conversations[i]);
    truth[i] = ds.conversations[i].label;
    tm.sample_ids[i] = ds.conversations[i].id;
  }

  std::atomic<std::size_t> backend_errors{0};
  auto run_cell = [&](std::size_t sample, std::size_t run) {
    const std::string& prompt = prompts[sample];
    std::string cache_key;
    if (opts.cache) {
      cache_key = fnv1a_hex(backend.id() + "\x1f" + prompt);
      if (auto hit = opts.cache->lookup(cache_key, static_cast<int>(run))) {
        tm.verdicts[sample][run] = parse_verdict(*hit).decision;
        return;
      }
    }
    for (int attempt = 0; attempt <= opts.max_retries; ++attempt) {
      try {
        std::string text = backend.complete(prompt, static_cast<int>(run));
        if (opts.cache)
          opts.cache->insert(cache_key, static_cast<int>(run), text);
        tm.verdicts[sample][run] = parse_verdict(text).decision;
        return;
      } catch (const std::exception&) {
        if (attempt == opts.max_retries) break;
        if (opts.retry_backoff_ms > 0) {
          std::this_thread::sleep_for(std::chrono::milliseconds(
              opts.retry_backoff_ms * (1 << attempt)));
        }
      }
    }
    backend_errors.fetch_add(1, std::memory_order_relaxed);
    tm.verdicts[sample][run] = Decision::Unparseable;
  };

  const std::size_t cells = n * runs;
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(opts.parallelism), cells);
  if (workers <= 1) {
    for (std::size_t c = 0; c < cells; ++c) run_cell(c / runs, c % runs);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t c = w; c < cells; c += workers)
          run_cell(c / runs, c % runs);
      });
    }
    for (std::thread& t : pool) t.join();
  }

  EvalReport report;
  report.backend_errors = backend_errors.load();
  for (std::size_t r = 0; r < runs; ++r) {
    std::vector<Decision> preds(n);
    for (std::size_t i = 0; i < n; ++i) preds[i] = tm.verdicts[i][r];
    ConfusionMatrix cm = confusion(preds, truth);
    report.unparseable_cells += cm.unparseable;
    report.per_run.push_back(metrics_from(cm));
  }
  RunAggregate agg = aggregate_runs(report.per_run);
  report.mean = agg.mean;
  report.stddev = agg.stddev;
  if (runs >= 2) {
    ReliabilityResult rel = reliability_score_detail(tm);
    report.reliability = rel.score;
    report.all_unparseable_samples = rel.all_unparseable_samples;
  }
  report.config_echo = opts.config_echo;
  report.config_echo["runs"] = opts.runs;
  report.config_echo["parallelism"] = opts.parallelism;
  report.config_echo["max_retries"] = opts.max_retries;
  report.config_echo["seed"] = opts.seed;
  report.config_echo["backend"] = backend.id();
  report.config_echo["cache"] = opts.cache != nullptr;
  return EvalOutcome{std::move(tm), std::move(report)};
}

inline void write_trials_jsonl(std::ostream& out, const TrialMatrix& tm,
                               const LabeledDataset& ds) {
  for (std::size_t i = 0; i < tm.samples(); ++i) {
    nlohmann::json row;
    row["id"] = tm.sample_ids[i];
    row["truth"] = std::string(to_string(ds.conversations[i].label));
    nlohmann::json verdicts = nlohmann::json::array();
    for (Decision d : tm.verdicts[i])
      verdicts.push_back(std::string(to_string(d)));
    row["verdicts"] = std::move(verdicts);
    out << row.dump() << '\n';
  }
}

}  // namespace scamdetect
