// scamdetect: subcommand front-end for the study pipeline.
//
//   ingest       load + validate a dataset, optionally emit a seeded split
//   terms        rank the top-K discriminative terms (TF-IDF class gap)
//   train-eval   train RF/KNN/SVM on a split and report test metrics
//   adversarial  build a term-balanced dataset (or LLM-generate one)
//   llm-eval     run the repeated-trial detector evaluation
//   report       re-render a report.json as text
//
// Exit codes: 0 success, 2 input/data error, 3 training error, 4 backend
// error. Every run writes run_meta.json (tool version + resolved config +
// config hash) next to its artifacts so reruns can be compared byte-wise.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "scamdetect/adversarial.hpp"
#include "scamdetect/corpus.hpp"
#include "scamdetect/features.hpp"
#include "scamdetect/http_backend.hpp"
#include "scamdetect/knn.hpp"
#include "scamdetect/linear_svm.hpp"
#include "scamdetect/llm.hpp"
#include "scamdetect/metrics.hpp"
#include "scamdetect/model_io.hpp"
#include "scamdetect/random_forest.hpp"
#include "scamdetect/util.hpp"

namespace sd = scamdetect;
namespace fs = std::filesystem;

namespace {

sd::DatasetFormat resolve_format(const std::string& format,
                                 const fs::path& path) {
  if (format == "jsonl") return sd::DatasetFormat::Jsonl;
  if (format == "csv") return sd::DatasetFormat::Csv;
  return path.extension() == ".csv" ? sd::DatasetFormat::Csv
                                    : sd::DatasetFormat::Jsonl;
}

sd::LabeledDataset load(const std::string& dataset, const std::string& format) {
  fs::path p(dataset);
  return sd::load_dataset(p, resolve_format(format, p));
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw sd::Error("cannot write " + path.string());
  out << content;
}

std::string hash_config(const nlohmann::json& config) {
  return sd::fnv1a_hex(config.dump());
}

// Sidecar provenance for artifacts whose own format cannot carry it
// (bare JSON arrays, JSONL datasets, text columns).
void write_run_meta(const fs::path& dir, const std::string& command,
                    const nlohmann::json& config, const std::string& hash) {
  nlohmann::json meta;
  meta["tool_version"] = std::string(sd::kToolVersion);
  meta["command"] = command;
  meta["config"] = config;
  meta["config_hash"] = hash;
  write_file(dir / "run_meta.json", meta.dump(2) + "\n");
}

fs::path ensure_outdir(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

std::string fmt_double(double v) { return nlohmann::json(v).dump(); }

struct DatasetArgs {
  std::string dataset;
  std::string format = "auto";

  void attach(CLI::App* cmd) {
    cmd->add_option("--dataset", dataset, "Input dataset path")->required();
    cmd->add_option("--format", format, "Dataset format")
        ->check(CLI::IsMember({"auto", "jsonl", "csv"}))
        ->capture_default_str();
  }
};

struct BackendArgs {
  std::string mock;
  std::string endpoint;
  std::string model;
  std::string api_key_env;
  double temperature = 1.0;
  double timeout_s = 60.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--mock", mock,
                    "Offline backend script: always-yes | always-no | "
                    "ground-truth | flip:P[:SEED] | replay:PATH");
    cmd->add_option("--backend", endpoint,
                    "Chat-completions endpoint URL (remote backend)");
    cmd->add_option("--model", model, "Remote model name");
    cmd->add_option("--api-key-env", api_key_env,
                    "Env var holding the API key");
    cmd->add_option("--temperature", temperature, "Sampling temperature")
        ->capture_default_str();
    cmd->add_option("--timeout", timeout_s, "Request timeout in seconds")
        ->capture_default_str();
  }

  std::unique_ptr<sd::Backend> make(const sd::LabeledDataset& ds) const {
    if (!mock.empty() && !endpoint.empty())
      throw sd::ConfigError("--mock and --backend are mutually exclusive");
    if (!mock.empty()) return sd::make_mock_backend(mock, ds);
    if (endpoint.empty())
      throw sd::ConfigError("need --mock or --backend");
    sd::BackendConfig cfg;
    cfg.endpoint = endpoint;
    cfg.model = model;
    cfg.temperature = temperature;
    cfg.timeout_s = timeout_s;
    cfg.api_key_env = api_key_env;
    return std::make_unique<sd::HttpBackend>(cfg);
  }

  nlohmann::json echo() const {
    return {{"mock", mock},          {"endpoint", endpoint},
            {"model", model},        {"api_key_env", api_key_env},
            {"temperature", temperature}, {"timeout_s", timeout_s}};
  }
};

int cmd_ingest(const DatasetArgs& data, const std::string& out,
               double test_fraction, std::uint64_t seed) {
  sd::LabeledDataset ds = load(data.dataset, data.format);
  fs::path dir = ensure_outdir(out);

  nlohmann::json config{{"dataset", data.dataset},
                        {"format", data.format},
                        {"test_fraction", test_fraction},
                        {"seed", seed}};
  std::string hash = hash_config(config);

  std::size_t scam = 0;
  for (const auto& c : ds.conversations)
    if (c.label == sd::Label::Scam) ++scam;

  if (test_fraction > 0.0) {
    auto [train, test] = sd::split(ds, test_fraction, seed);
    sd::save_dataset(train, dir / "train.jsonl", sd::DatasetFormat::Jsonl);
    sd::save_dataset(test, dir / "test.jsonl", sd::DatasetFormat::Jsonl);
    std::cout << "wrote " << (dir / "train.jsonl").string() << " ("
              << train.conversations.size() << ") and "
              << (dir / "test.jsonl").string() << " ("
              << test.conversations.size() << ")\n";
  } else {
    sd::save_dataset(ds, dir / "dataset.jsonl", sd::DatasetFormat::Jsonl);
    std::cout << "wrote " << (dir / "dataset.jsonl").string() << "\n";
  }
  std::cout << "conversations: " << ds.conversations.size() << " (scam "
            << scam << ", legit " << ds.conversations.size() - scam << ")\n";
  write_run_meta(dir, "ingest", config, hash);
  return 0;
}

int cmd_terms(const DatasetArgs& data, const std::string& out,
              std::size_t top_k) {
  sd::LabeledDataset ds = load(data.dataset, data.format);
  fs::path dir = ensure_outdir(out);

  nlohmann::json config{{"dataset", data.dataset},
                        {"format", data.format},
                        {"top_k", top_k}};
  std::string hash = hash_config(config);

  std::vector<std::string> docs;
  docs.reserve(ds.conversations.size());
  for (const auto& c : ds.conversations) docs.push_back(sd::flatten(c));
  sd::Vocabulary vocab = sd::fit_vocabulary(docs);
  sd::RankedTerms ranked = sd::top_k_terms(ds, vocab, top_k);

  write_file(dir / "terms.json",
             sd::ranked_terms_to_json(ranked).dump(2) + "\n");
  std::string txt;
  for (const auto& [term, score] : ranked.terms)
    txt += term + "\t" + fmt_double(score) + "\n";
  write_file(dir / "terms.txt", txt);
  write_run_meta(dir, "terms", config, hash);
  std::cout << "wrote " << (dir / "terms.json").string() << " ("
            << ranked.size() << " terms)\n";
  return 0;
}

struct TrainArgs {
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  int trees = 101;
  std::size_t max_depth = 0;
  std::size_t knn_k = 5;
  double svm_lambda = 1e-4;
  std::size_t svm_epochs = 20;
  std::string eval_dataset;  // optional replacement test set

  void attach(CLI::App* cmd) {
    cmd->add_option("--test-fraction", test_fraction,
                    "Held-out fraction per label")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--seed", seed, "Split/training seed")
        ->capture_default_str();
    cmd->add_option("--trees", trees, "Random forest size (odd)")
        ->capture_default_str();
    cmd->add_option("--max-depth", max_depth,
                    "Random forest depth cap (0 = unbounded)")
        ->capture_default_str();
    cmd->add_option("--knn-k", knn_k, "Neighbors for KNN (odd)")
        ->capture_default_str();
    cmd->add_option("--svm-lambda", svm_lambda, "SVM regularization")
        ->capture_default_str();
    cmd->add_option("--svm-epochs", svm_epochs, "SVM training epochs")
        ->capture_default_str();
    cmd->add_option("--eval-dataset", eval_dataset,
                    "Evaluate on this dataset instead of the held-out split "
                    "(e.g. a balanced copy of it)");
  }
};

int cmd_train_eval(const DatasetArgs& data, const TrainArgs& t,
                   const std::string& out) {
  sd::LabeledDataset ds = load(data.dataset, data.format);
  fs::path dir = ensure_outdir(out);

  nlohmann::json config{{"dataset", data.dataset},
                        {"format", data.format},
                        {"test_fraction", t.test_fraction},
                        {"seed", t.seed},
                        {"trees", t.trees},
                        {"max_depth", t.max_depth},
                        {"knn_k", t.knn_k},
                        {"svm_lambda", t.svm_lambda},
                        {"svm_epochs", t.svm_epochs},
                        {"eval_dataset", t.eval_dataset}};
  std::string hash = hash_config(config);

  auto [train, test] = sd::split(ds, t.test_fraction, t.seed);
  sd::LabeledDataset eval_set =
      t.eval_dataset.empty() ? test : load(t.eval_dataset, "auto");

  std::vector<std::string> docs;
  docs.reserve(train.conversations.size());
  for (const auto& c : train.conversations) docs.push_back(sd::flatten(c));
  sd::Vocabulary vocab = sd::fit_vocabulary(docs);
  std::string vhash = sd::vocab_hash(vocab);

  auto vectorize = [&](const sd::LabeledDataset& d) {
    std::vector<sd::TermVector> xs;
    std::vector<sd::Label> ys;
    xs.reserve(d.conversations.size());
    for (const auto& c : d.conversations) {
      xs.push_back(sd::tfidf(sd::flatten(c), vocab));
      ys.push_back(c.label);
    }
    return std::pair(std::move(xs), std::move(ys));
  };
  auto [x_train, y_train] = vectorize(train);
  auto [x_eval, y_eval] = vectorize(eval_set);

  auto emit = [&](const std::string& kind, nlohmann::json model_json,
                  auto&& predict) {
    std::vector<sd::Label> preds;
    preds.reserve(x_eval.size());
    for (const auto& x : x_eval) preds.push_back(predict(x));
    sd::ClassificationMetrics m = sd::metrics_from(sd::confusion(preds, y_eval));

    sd::EvalReport report;
    report.per_run = {m};
    report.mean = m;
    report.config_echo = config;
    report.config_echo["classifier"] = kind;
    report.config_echo["config_hash"] = hash;
    write_file(dir / ("report_" + kind + ".json"),
               sd::report_to_json(report).dump(2) + "\n");
    write_file(dir / ("report_" + kind + ".txt"),
               sd::render_report_text(report));

    model_json["tool_version"] = std::string(sd::kToolVersion);
    model_json["config_hash"] = hash;
    sd::save_model(model_json, dir / ("model_" + kind + ".json"));
    std::cout << kind << ": accuracy " << m.accuracy << ", precision "
              << m.precision << ", recall " << m.recall << ", f1 " << m.f1
              << "\n";
  };

  sd::RfParams rfp;
  rfp.n_trees = t.trees;
  rfp.max_depth = t.max_depth;
  rfp.seed = t.seed;
  sd::RandomForestModel rf =
      sd::train_random_forest(x_train, y_train, vocab.size(), rfp);
  emit("rf", sd::model_to_json(rf, vhash),
       [&](const sd::TermVector& x) { return sd::predict(rf, x); });

  sd::KnnModel knn = sd::train_knn(x_train, y_train, vocab.size(), t.knn_k);
  emit("knn", sd::model_to_json(knn, vhash),
       [&](const sd::TermVector& x) { return sd::predict(knn, x); });

  sd::SvmParams svp;
  svp.lambda = t.svm_lambda;
  svp.epochs = t.svm_epochs;
  svp.seed = t.seed;
  sd::LinearSvmModel svm =
      sd::train_linear_svm(x_train, y_train, vocab.size(), svp);
  emit("svm", sd::model_to_json(svm, vhash),
       [&](const sd::TermVector& x) { return sd::predict(svm, x); });

  write_run_meta(dir, "train-eval", config, hash);
  return 0;
}

int cmd_adversarial(const DatasetArgs& data, const std::string& terms_path,
                    double coverage, std::uint64_t seed,
                    const std::string& carriers_path, std::size_t generate_n,
                    const BackendArgs& backend_args, const std::string& out) {
  sd::LabeledDataset ds = load(data.dataset, data.format);
  fs::path dir = ensure_outdir(out);

  std::ifstream terms_in(terms_path, std::ios::binary);
  if (!terms_in) throw sd::Error("cannot open terms file: " + terms_path);
  sd::RankedTerms terms =
      sd::ranked_terms_from_json(nlohmann::json::parse(terms_in));

  nlohmann::json config{{"dataset", data.dataset},
                        {"format", data.format},
                        {"terms", terms_path},
                        {"coverage", coverage},
                        {"seed", seed},
                        {"carriers", carriers_path},
                        {"generate_n", generate_n}};
  if (generate_n > 0) config["backend"] = backend_args.echo();
  std::string hash = hash_config(config);

  if (generate_n > 0) {
    auto backend = backend_args.make(ds);
    sd::GenerationOptions gen;
    gen.target_coverage = coverage;
    sd::LabeledDataset generated =
        sd::generate_llm_dataset(*backend, generate_n, terms, seed, gen);
    sd::save_dataset(generated, dir / "generated.jsonl",
                     sd::DatasetFormat::Jsonl);
    std::cout << "wrote " << (dir / "generated.jsonl").string() << " ("
              << generated.conversations.size() << ")\n";
  } else {
    sd::InjectionPlan plan;
    plan.terms = terms;
    plan.target_coverage = coverage;
    plan.seed = seed;
    if (!carriers_path.empty()) {
      std::ifstream in(carriers_path, std::ios::binary);
      if (!in) throw sd::Error("cannot open carriers file: " + carriers_path);
      plan.carrier_sentences.clear();
      std::string line;
      while (std::getline(in, line)) {
        line = sd::trim(line);
        if (!line.empty()) plan.carrier_sentences.push_back(line);
      }
    }
    sd::LabeledDataset balanced = sd::balance_dataset(ds, plan);
    sd::save_dataset(balanced, dir / "balanced.jsonl",
                     sd::DatasetFormat::Jsonl);
    std::cout << "wrote " << (dir / "balanced.jsonl").string() << " ("
              << balanced.conversations.size() << ")\n";
  }
  write_run_meta(dir, "adversarial", config, hash);
  return 0;
}

int cmd_llm_eval(const DatasetArgs& data, const BackendArgs& backend_args,
                 int runs, int jobs, int max_retries, std::uint64_t seed,
                 const std::string& cache_path, const std::string& record_path,
                 const std::string& out) {
  sd::LabeledDataset ds = load(data.dataset, data.format);
  fs::path dir = ensure_outdir(out);

  auto inner = backend_args.make(ds);
  sd::Backend* backend = inner.get();
  std::shared_ptr<sd::ResponseStore> record_store;
  std::unique_ptr<sd::RecordingBackend> recorder;
  if (!record_path.empty()) {
    record_store = std::make_shared<sd::ResponseStore>(fs::path(record_path));
    recorder = std::make_unique<sd::RecordingBackend>(*inner, record_store);
    backend = recorder.get();
  }
  std::unique_ptr<sd::ResponseStore> cache;
  if (!cache_path.empty())
    cache = std::make_unique<sd::ResponseStore>(fs::path(cache_path));

  nlohmann::json config{{"dataset", data.dataset},
                        {"format", data.format},
                        {"runs", runs},
                        {"parallelism", jobs},
                        {"max_retries", max_retries},
                        {"seed", seed},
                        {"cache", cache != nullptr},
                        {"cache_path", cache_path},
                        {"record_path", record_path},
                        {"backend", backend->id()},
                        {"backend_config", backend_args.echo()}};
  std::string hash = hash_config(config);

  sd::EvalOptions opts;
  opts.runs = runs;
  opts.parallelism = jobs;
  opts.max_retries = max_retries;
  opts.seed = seed;
  opts.cache = cache.get();
  opts.config_echo = config;
  opts.config_echo["config_hash"] = hash;
  sd::EvalOutcome outcome = sd::evaluate(ds, *backend, opts);

  const std::size_t cells =
      ds.conversations.size() * static_cast<std::size_t>(runs);
  if (outcome.report.backend_errors == cells) {
    std::cerr << "error: backend unreachable and cache cold ("
              << outcome.report.backend_errors << "/" << cells
              << " calls failed)\n";
    return 4;
  }

  write_file(dir / "report.json",
             sd::report_to_json(outcome.report).dump(2) + "\n");
  write_file(dir / "report.txt", sd::render_report_text(outcome.report));
  std::ofstream trials(dir / "trials.jsonl", std::ios::binary);
  sd::write_trials_jsonl(trials, outcome.trials, ds);
  write_run_meta(dir, "llm-eval", config, hash);

  std::cout << sd::render_report_text(outcome.report);
  return 0;
}

int cmd_report(const std::string& in, const std::string& out) {
  std::ifstream file(in, std::ios::binary);
  if (!file) throw sd::Error("cannot open report: " + in);
  sd::EvalReport report =
      sd::report_from_json(nlohmann::json::parse(file));
  std::string text = sd::render_report_text(report);
  if (!out.empty()) {
    fs::path dir = ensure_outdir(out);
    write_file(dir / "report.txt", text);
  }
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scamdetect: phone-scam keyword study toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config file; flags override it");
  app.set_version_flag("--version", std::string(sd::kToolVersion));

  // ingest
  auto* ingest = app.add_subcommand(
      "ingest", "Validate a dataset and optionally write a seeded split");
  DatasetArgs ingest_data;
  ingest_data.attach(ingest);
  std::string ingest_out = ".";
  double ingest_fraction = 0.0;
  std::uint64_t ingest_seed = 0;
  ingest->add_option("--out", ingest_out, "Output directory")
      ->capture_default_str();
  ingest->add_option("--test-fraction", ingest_fraction,
                     "Emit train/test split with this held-out fraction")
      ->check(CLI::Range(0.0, 1.0));
  ingest->add_option("--seed", ingest_seed, "Split seed")
      ->capture_default_str();

  // terms
  auto* terms = app.add_subcommand(
      "terms", "Extract the top-K discriminative terms");
  DatasetArgs terms_data;
  terms_data.attach(terms);
  std::string terms_out = ".";
  std::size_t terms_k = 50;
  terms->add_option("--out", terms_out, "Output directory")
      ->capture_default_str();
  terms->add_option("--top-k", terms_k, "Number of terms to keep")
      ->capture_default_str();

  // train-eval
  auto* train = app.add_subcommand(
      "train-eval", "Train RF/KNN/SVM on a split and report test metrics");
  DatasetArgs train_data;
  train_data.attach(train);
  TrainArgs train_args;
  train_args.attach(train);
  std::string train_out = ".";
  train->add_option("--out", train_out, "Output directory")
      ->capture_default_str();

  // adversarial
  auto* adv = app.add_subcommand(
      "adversarial", "Write a term-balanced copy of a dataset");
  DatasetArgs adv_data;
  adv_data.attach(adv);
  std::string adv_terms;
  double adv_coverage = 1.0;
  std::uint64_t adv_seed = 0;
  std::string adv_carriers;
  std::size_t adv_generate = 0;
  BackendArgs adv_backend;
  std::string adv_out = ".";
  adv->add_option("--terms", adv_terms, "RankedTerms JSON file")->required();
  adv->add_option("--coverage", adv_coverage, "Target term coverage")
      ->check(CLI::Range(std::nextafter(0.0, 1.0), 1.0))
      ->capture_default_str();
  adv->add_option("--seed", adv_seed, "Injection seed")->capture_default_str();
  adv->add_option("--carriers", adv_carriers,
                  "File of carrier sentences, one per line (default: "
                  "built-in neutral set)");
  adv->add_option("--generate-n", adv_generate,
                  "Generate N conversations per class via a backend instead "
                  "of injecting");
  adv_backend.attach(adv);
  adv->add_option("--out", adv_out, "Output directory")->capture_default_str();

  // llm-eval
  auto* llm = app.add_subcommand(
      "llm-eval", "Repeated-trial detector evaluation against a backend");
  DatasetArgs llm_data;
  llm_data.attach(llm);
  BackendArgs llm_backend;
  llm_backend.attach(llm);
  int llm_runs = 5;
  int llm_jobs = 1;
  int llm_retries = 3;
  std::uint64_t llm_seed = 0;
  std::string llm_cache;
  std::string llm_record;
  std::string llm_out = ".";
  llm->add_option("--runs", llm_runs, "Trials per sample")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  llm->add_option("--jobs", llm_jobs, "Parallel requests")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  llm->add_option("--max-retries", llm_retries, "Retries per failed call")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  llm->add_option("--seed", llm_seed, "Evaluation seed")
      ->capture_default_str();
  llm->add_option("--cache", llm_cache,
                  "Response cache file (JSONL, read + appended)");
  llm->add_option("--record", llm_record,
                  "Record responses to this replay file (JSONL)");
  llm->add_option("--out", llm_out, "Output directory")
      ->capture_default_str();

  // report
  auto* rep = app.add_subcommand("report", "Render a report.json as text");
  std::string rep_in;
  std::string rep_out;
  rep->add_option("--in", rep_in, "report.json path")->required();
  rep->add_option("--out", rep_out, "Directory for report.txt (optional)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed())
      return cmd_ingest(ingest_data, ingest_out, ingest_fraction, ingest_seed);
    if (terms->parsed()) return cmd_terms(terms_data, terms_out, terms_k);
    if (train->parsed())
      return cmd_train_eval(train_data, train_args, train_out);
    if (adv->parsed())
      return cmd_adversarial(adv_data, adv_terms, adv_coverage, adv_seed,
                             adv_carriers, adv_generate, adv_backend, adv_out);
    if (llm->parsed())
      return cmd_llm_eval(llm_data, llm_backend, llm_runs, llm_jobs,
                          llm_retries, llm_seed, llm_cache, llm_record,
                          llm_out);
    if (rep->parsed()) return cmd_report(rep_in, rep_out);
  } catch (const sd::DegenerateTrainingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const sd::BackendError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const sd::ReplayMissError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const sd::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const sd::GenerationFailedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
