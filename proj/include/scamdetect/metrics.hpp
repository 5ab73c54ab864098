#pragma once

// Confusion-matrix metrics, multi-run aggregation and the verdict-entropy
// reliability score. Scam is the positive class everywhere.

#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "scamdetect/corpus.hpp"
#include "scamdetect/util.hpp"

namespace scamdetect {

// Categorical verdict for one (sample, run) cell. Unparseable means no
// parse rule matched the model output; it is a value, not an error.
enum class Decision { Scam, Legit, Unparseable };

inline std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::Scam: return "scam";
    case Decision::Legit: return "legit";
    default: return "unparseable";
  }
}

struct LengthMismatchError : Error {
  LengthMismatchError() : Error("prediction and truth lengths differ") {}
};

struct EmptyError : Error {
  explicit EmptyError(const std::string& what) : Error(what) {}
};

struct TooFewRunsError : Error {
  TooFewRunsError() : Error("reliability score requires at least 2 runs") {}
};

struct ConfusionMatrix {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  // Unparseable predictions are scored as Legit (a miss when the truth is
  // scam) and counted here so reports can flag them.
  std::uint64_t unparseable = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

inline ConfusionMatrix confusion(const std::vector<Decision>& preds,
                                 const std::vector<Label>& truth) {
  if (preds.size() != truth.size()) throw LengthMismatchError();
  if (preds.empty()) throw EmptyError("confusion over zero samples");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    Decision p = preds[i];
    if (p == Decision::Unparseable) {
      ++cm.unparseable;
      p = Decision::Legit;
    }
    bool pred_scam = p == Decision::Scam;
    bool true_scam = truth[i] == Label::Scam;
    if (pred_scam && true_scam) ++cm.tp;
    else if (pred_scam && !true_scam) ++cm.fp;
    else if (!pred_scam && true_scam) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

inline ConfusionMatrix confusion(const std::vector<Label>& preds,
                                 const std::vector<Label>& truth) {
  std::vector<Decision> d;
  d.reserve(preds.size());
  for (Label l : preds)
    d.push_back(l == Label::Scam ? Decision::Scam : Decision::Legit);
  return confusion(d, truth);
}

struct ClassificationMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // false when the denominator was zero and the value was reported as 0
  bool precision_defined = true;
  bool recall_defined = true;

  bool operator==(const ClassificationMetrics&) const = default;
};

inline ClassificationMetrics metrics_from(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw EmptyError("metrics over empty confusion matrix");
  ClassificationMetrics m;
  m.accuracy = static_cast<double>(cm.tp + cm.tn) /
               static_cast<double>(cm.total());
  if (cm.tp + cm.fp == 0) {
    m.precision = 0.0;
    m.precision_defined = false;
  } else {
    m.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  }
  if (cm.tp + cm.fn == 0) {
    m.recall = 0.0;
    m.recall_defined = false;
  } else {
    m.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  }
  m.f1 = (m.precision + m.recall == 0.0)
             ? 0.0
             : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

struct RunAggregate {
  ClassificationMetrics mean;
  ClassificationMetrics stddev;  // sample stddev; zeros for a single run
};

inline RunAggregate aggregate_runs(
    const std::vector<ClassificationMetrics>& runs) {
  if (runs.empty()) throw EmptyError("aggregate over zero runs");
  auto fields = [](const ClassificationMetrics& m) {
    return std::array<double, 4>{m.accuracy, m.precision, m.recall, m.f1};
  };
  std::array<double, 4> mean{};
  for (const auto& r : runs) {
    auto f = fields(r);
    for (int i = 0; i < 4; ++i) mean[i] += f[i];
  }
  for (int i = 0; i < 4; ++i) mean[i] /= static_cast<double>(runs.size());
  std::array<double, 4> sd{};
  if (runs.size() >= 2) {
    for (const auto& r : runs) {
      auto f = fields(r);
      for (int i = 0; i < 4; ++i) sd[i] += (f[i] - mean[i]) * (f[i] - mean[i]);
    }
    for (int i = 0; i < 4; ++i)
      sd[i] = std::sqrt(sd[i] / static_cast<double>(runs.size() - 1));
  }
  RunAggregate agg;
  agg.mean = {mean[0], mean[1], mean[2], mean[3], true, true};
  agg.stddev = {sd[0], sd[1], sd[2], sd[3], true, true};
  for (const auto& r : runs) {
    agg.mean.precision_defined &= r.precision_defined;
    agg.mean.recall_defined &= r.recall_defined;
  }
  return agg;
}

// N samples x R runs of categorical verdicts.
struct TrialMatrix {
  std::vector<std::string> sample_ids;
  std::vector<std::vector<Decision>> verdicts;  // [sample][run], rows complete

  std::size_t samples() const { return verdicts.size(); }
  std::size_t runs() const { return verdicts.empty() ? 0 : verdicts[0].size(); }
  bool operator==(const TrialMatrix&) const = default;
};

enum class ReliabilityNorm {
  // 1 - (mean per-sample verdict entropy) / ln 2; lands in [0,1] with 1 for
  // a fully run-consistent model and 0 for evenly split verdicts.
  MeanEntropy,
  // Compatibility variant keeping the raw denominator N * 0.5 * ln 0.5;
  // algebraically 1 + sum(p ln p) / (N * 0.5 * ln 0.5), which spans [1,3]
  // for binary verdicts. Kept for auditability only.
  HalfLogHalf,
};

struct ReliabilityResult {
  double score = 1.0;
  // samples whose runs were all unparseable; scored as maximal entropy
  std::size_t all_unparseable_samples = 0;
};

inline ReliabilityResult reliability_score_detail(
    const TrialMatrix& tm, ReliabilityNorm norm = ReliabilityNorm::MeanEntropy) {
  if (tm.runs() < 2) throw TooFewRunsError();
  const double ln2 = std::log(2.0);
  ReliabilityResult res;
  double entropy_share_sum = 0.0;  // sum of per-sample H_i / ln 2
  double plogp_sum = 0.0;          // sum of p ln p over samples and classes
  for (const auto& row : tm.verdicts) {
    std::size_t n_scam = 0, n_legit = 0;
    for (Decision d : row) {
      if (d == Decision::Scam) ++n_scam;
      else if (d == Decision::Legit) ++n_legit;
    }
    std::size_t parseable = n_scam + n_legit;
    if (parseable == 0) {
      ++res.all_unparseable_samples;
      entropy_share_sum += 1.0;
      plogp_sum += -ln2;
      continue;
    }
    double s = 0.0;
    for (std::size_t c : {n_scam, n_legit}) {
      if (c == 0) continue;
      double p = static_cast<double>(c) / static_cast<double>(parseable);
      s += p * std::log(p);
    }
    plogp_sum += s;
    entropy_share_sum += -s / ln2;
  }
  double n = static_cast<double>(tm.samples());
  if (norm == ReliabilityNorm::HalfLogHalf) {
    res.score = 1.0 + plogp_sum / (n * 0.5 * std::log(0.5));
  } else {
    res.score = 1.0 - entropy_share_sum / n;
    if (res.score < 0.0) res.score = 0.0;
    if (res.score > 1.0) res.score = 1.0;
  }
  return res;
}

inline double reliability_score(
    const TrialMatrix& tm, ReliabilityNorm norm = ReliabilityNorm::MeanEntropy) {
  return reliability_score_detail(tm, norm).score;
}

struct EvalReport {
  std::vector<ClassificationMetrics> per_run;
  ClassificationMetrics mean;
  ClassificationMetrics stddev;
  std::optional<double> reliability;
  std::size_t unparseable_cells = 0;
  std::size_t all_unparseable_samples = 0;
  std::size_t backend_errors = 0;
  nlohmann::json config_echo = nlohmann::json::object();
};

inline nlohmann::json metrics_to_json(const ClassificationMetrics& m) {
  return {{"accuracy", m.accuracy},
          {"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"precision_defined", m.precision_defined},
          {"recall_defined", m.recall_defined}};
}

inline ClassificationMetrics metrics_from_json(const nlohmann::json& j) {
  ClassificationMetrics m;
  m.accuracy = j.at("accuracy").get<double>();
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  m.precision_defined = j.value("precision_defined", true);
  m.recall_defined = j.value("recall_defined", true);
  return m;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["tool_version"] = std::string(kToolVersion);
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& m : r.per_run) runs.push_back(metrics_to_json(m));
  j["per_run_metrics"] = std::move(runs);
  j["mean_metrics"] = metrics_to_json(r.mean);
  j["stddev_metrics"] = metrics_to_json(r.stddev);
  if (r.reliability) j["reliability"] = *r.reliability;
  else j["reliability"] = nullptr;
  j["unparseable_cells"] = r.unparseable_cells;
  j["all_unparseable_samples"] = r.all_unparseable_samples;
  j["backend_errors"] = r.backend_errors;
  j["config_echo"] = r.config_echo;
  return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  for (const auto& m : j.at("per_run_metrics"))
    r.per_run.push_back(metrics_from_json(m));
  r.mean = metrics_from_json(j.at("mean_metrics"));
  r.stddev = metrics_from_json(j.at("stddev_metrics"));
  if (!j.at("reliability").is_null())
    r.reliability = j.at("reliability").get<double>();
  r.unparseable_cells = j.value("unparseable_cells", std::size_t{0});
  r.all_unparseable_samples = j.value("all_unparseable_samples", std::size_t{0});
  r.backend_errors = j.value("backend_errors", std::size_t{0});
  r.config_echo = j.value("config_echo", nlohmann::json::object());
  return r;
}

// Aligned-column table: one row per metric (Accuracy, Precision, Recall,
// F1-Score, Reliability), one column per run plus mean and stddev.
inline std::string render_report_text(const EvalReport& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  std::string config_hash = r.config_echo.is_object()
                                ? r.config_echo.value("config_hash", std::string{})
                                : std::string{};
  out << "# scamdetect report v" << kToolVersion;
  if (!config_hash.empty()) out << " config=" << config_hash;
  out << '\n';
  auto cell = [&](const std::string& s) {
    out << std::left << std::setw(12) << s;
  };
  auto num = [&](double v) {
    std::ostringstream tmp;
    tmp << std::fixed << std::setprecision(4) << v;
    cell(tmp.str());
  };
  cell("Metric");
  for (std::size_t i = 0; i < r.per_run.size(); ++i)
    cell("Run" + std::to_string(i + 1));
  cell("Mean");
  cell("Stddev");
  out << '\n';
  auto row = [&](const std::string& name, auto getter) {
    cell(name);
    for (const auto& m : r.per_run) num(getter(m));
    num(getter(r.mean));
    num(getter(r.stddev));
    out << '\n';
  };
  row("Accuracy", [](const ClassificationMetrics& m) { return m.accuracy; });
  row("Precision", [](const ClassificationMetrics& m) { return m.precision; });
  row("Recall", [](const ClassificationMetrics& m) { return m.recall; });
  row("F1-Score", [](const ClassificationMetrics& m) { return m.f1; });
  cell("Reliability");
  for (std::size_t i = 0; i < r.per_run.size(); ++i) cell("-");
  if (r.reliability) num(*r.reliability);
  else cell("-");
  cell("-");
  out << '\n';
  if (!r.mean.precision_defined)
    out << "* precision undefined for at least one run (no positive "
           "predictions); reported as 0\n";
  if (!r.mean.recall_defined)
    out << "* recall undefined for at least one run (no positive samples); "
           "reported as 0\n";
  if (r.unparseable_cells > 0)
    out << "* " << r.unparseable_cells
        << " unparseable verdict(s) scored as legit\n";
  if (r.backend_errors > 0)
    out << "* " << r.backend_errors << " backend error(s) after retries\n";
  return out.str();
}

}  // namespace scamdetect
