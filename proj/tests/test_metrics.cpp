#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "scamdetect/metrics.hpp"

namespace sd = scamdetect;

static std::vector<sd::Label> labels(const std::string& pattern) {
  std::vector<sd::Label> out;
  for (char c : pattern)
    out.push_back(c == 's' ? sd::Label::Scam : sd::Label::Legit);
  return out;
}

TEST_CASE("confusion counts a perfect predictor") {
  auto truth = labels("ssssllllll");
  auto cm = sd::confusion(truth, truth);
  CHECK(cm.tp == 4);
  CHECK(cm.tn == 6);
  CHECK(cm.fp == 0);
  CHECK(cm.fn == 0);
  CHECK(cm.total() == 10);
}

TEST_CASE("confusion counts an all-legit predictor") {
  auto cm = sd::confusion(labels("llllllllll"), labels("ssssllllll"));
  CHECK(cm.fn == 4);
  CHECK(cm.tn == 6);
  CHECK(cm.tp == 0);
  CHECK(cm.fp == 0);
}

TEST_CASE("confusion matches a brute-force recount") {
  auto preds = labels("ssslslllss");
  auto truth = labels("sslsllslsl");
  auto cm = sd::confusion(preds, truth);
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    bool p = preds[i] == sd::Label::Scam;
    bool t = truth[i] == sd::Label::Scam;
    if (p && t) ++tp;
    else if (p && !t) ++fp;
    else if (!p && t) ++fn;
    else ++tn;
  }
  CHECK(cm.tp == tp);
  CHECK(cm.fp == fp);
  CHECK(cm.tn == tn);
  CHECK(cm.fn == fn);
}

TEST_CASE("confusion treats unparseable decisions as legit and counts them") {
  std::vector<sd::Decision> preds{sd::Decision::Scam, sd::Decision::Unparseable,
                                  sd::Decision::Unparseable};
  auto cm = sd::confusion(preds, labels("ssl"));
  CHECK(cm.tp == 1);
  CHECK(cm.fn == 1);  // unparseable on a scam sample scores as a miss
  CHECK(cm.tn == 1);
  CHECK(cm.unparseable == 2);
}

TEST_CASE("confusion input validation") {
  CHECK_THROWS_AS(sd::confusion(labels("s"), labels("sl")),
                  sd::LengthMismatchError);
  CHECK_THROWS_AS(sd::confusion(std::vector<sd::Label>{}, {}), sd::EmptyError);
}

TEST_CASE("metrics_from reproduces the published f1 band") {
  // precision 16/26 ≈ 0.62, recall 16/100 = 0.16
  sd::ConfusionMatrix cm;
  cm.tp = 16;
  cm.fp = 10;
  cm.fn = 84;
  cm.tn = 890;
  auto m = sd::metrics_from(cm);
  CHECK(m.precision == Catch::Approx(16.0 / 26.0).epsilon(0).margin(1e-12));
  CHECK(m.recall == Catch::Approx(0.16).epsilon(0).margin(1e-12));
  CHECK(m.f1 == Catch::Approx(0.253968253968254).epsilon(0).margin(1e-12));
  CHECK(std::abs(m.f1 - 0.26) < 0.01);
}

TEST_CASE("metrics_from arithmetic cases") {
  SECTION("perfect") {
    sd::ConfusionMatrix cm;
    cm.tp = 4;
    cm.tn = 6;
    auto m = sd::metrics_from(cm);
    CHECK(m.accuracy == 1.0);
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.f1 == 1.0);
    CHECK(m.precision_defined);
    CHECK(m.recall_defined);
  }
  SECTION("hand case") {
    sd::ConfusionMatrix cm;
    cm.tp = 2;
    cm.fp = 1;
    cm.fn = 1;
    cm.tn = 6;
    auto m = sd::metrics_from(cm);
    CHECK(m.accuracy == Catch::Approx(0.8).epsilon(0).margin(1e-12));
    CHECK(m.precision == Catch::Approx(2.0 / 3.0).epsilon(0).margin(1e-12));
    CHECK(m.recall == Catch::Approx(2.0 / 3.0).epsilon(0).margin(1e-12));
    CHECK(m.f1 == Catch::Approx(2.0 / 3.0).epsilon(0).margin(1e-12));
  }
  SECTION("degenerate denominators are flagged zeros") {
    sd::ConfusionMatrix cm;
    cm.tn = 5;  // no positive predictions, no positive samples
    auto m = sd::metrics_from(cm);
    CHECK(m.precision == 0.0);
    CHECK(m.recall == 0.0);
    CHECK(m.f1 == 0.0);
    CHECK_FALSE(m.precision_defined);
    CHECK_FALSE(m.recall_defined);
  }
}

TEST_CASE("f1 bounds hold on random confusion matrices") {
  sd::Rng rng(404);
  for (int trial = 0; trial < 200; ++trial) {
    sd::ConfusionMatrix cm;
    cm.tp = sd::bounded(rng, 20);
    cm.fp = sd::bounded(rng, 20);
    cm.fn = sd::bounded(rng, 20);
    cm.tn = 1 + sd::bounded(rng, 20);
    auto m = sd::metrics_from(cm);
    if (m.precision > 0.0 && m.recall > 0.0) {
      CHECK(m.f1 <= std::max(m.precision, m.recall) + 1e-12);
      CHECK(m.f1 >= std::min(m.precision, m.recall) - 1e-12);
    }
    CHECK((m.f1 == 0.0) == (cm.tp == 0));
  }
}

TEST_CASE("aggregate_runs means and deviations") {
  sd::ClassificationMetrics a;
  a.accuracy = a.precision = a.recall = a.f1 = 0.8;
  sd::ClassificationMetrics b;
  b.accuracy = b.precision = b.recall = b.f1 = 1.0;

  SECTION("identical runs have zero deviation") {
    sd::ClassificationMetrics q;
    q.accuracy = q.precision = q.recall = q.f1 = 0.75;
    auto agg = sd::aggregate_runs({q, q, q});
    CHECK(agg.mean.accuracy == 0.75);
    CHECK(agg.stddev.accuracy == 0.0);
    CHECK(agg.stddev.f1 == 0.0);
  }
  SECTION("two-point case") {
    auto agg = sd::aggregate_runs({a, b});
    CHECK(agg.mean.accuracy == Catch::Approx(0.9).epsilon(0).margin(1e-12));
    CHECK(agg.stddev.accuracy ==
          Catch::Approx(0.14142135623730948).epsilon(0).margin(1e-12));
  }
  SECTION("five runs average exactly five values") {
    sd::ClassificationMetrics c;
    c.accuracy = 0.5;
    auto agg = sd::aggregate_runs({a, b, c, a, b});
    CHECK(agg.mean.accuracy ==
          Catch::Approx((0.8 + 1.0 + 0.5 + 0.8 + 1.0) / 5.0).epsilon(0).margin(1e-12));
  }
  SECTION("empty input is rejected") {
    CHECK_THROWS_AS(sd::aggregate_runs({}), sd::EmptyError);
  }
}

static sd::TrialMatrix matrix(std::vector<std::vector<sd::Decision>> rows) {
  sd::TrialMatrix tm;
  for (std::size_t i = 0; i < rows.size(); ++i)
    tm.sample_ids.push_back("s" + std::to_string(i));
  tm.verdicts = std::move(rows);
  return tm;
}

TEST_CASE("reliability endpoints are exact") {
  const auto S = sd::Decision::Scam;
  const auto L = sd::Decision::Legit;
  SECTION("run-consistent matrix scores exactly 1") {
    auto tm = matrix({{S, S, S, S, S}, {L, L, L, L, L}, {S, S, S, S, S}});
    CHECK(sd::reliability_score(tm) == 1.0);
  }
  SECTION("even split scores exactly 0") {
    auto tm = matrix({{S, L, S, L}});
    CHECK(sd::reliability_score(tm) == 0.0);
    auto many = matrix({{S, S, L, L}, {L, S, L, S}, {S, L, L, S}});
    CHECK(sd::reliability_score(many) == 0.0);
  }
  SECTION("one consistent plus one even sample scores one half") {
    auto tm = matrix({{S, S, S, S}, {S, L, S, L}});
    CHECK(sd::reliability_score(tm) == Catch::Approx(0.5).epsilon(0).margin(1e-9));
  }
}

TEST_CASE("reliability of a three-two split over five runs") {
  const auto S = sd::Decision::Scam;
  const auto L = sd::Decision::Legit;
  auto tm = matrix({{S, S, S, L, L}});
  CHECK(sd::reliability_score(tm) ==
        Catch::Approx(0.029049405545331197).epsilon(0).margin(1e-12));
}

TEST_CASE("reliability needs at least two runs") {
  auto tm = matrix({{sd::Decision::Scam}});
  CHECK_THROWS_AS(sd::reliability_score(tm), sd::TooFewRunsError);
}

TEST_CASE("reliability is invariant under sample and run permutations") {
  const auto S = sd::Decision::Scam;
  const auto L = sd::Decision::Legit;
  auto tm = matrix({{S, S, L, S}, {L, L, L, S}, {S, L, L, L}});
  double base = sd::reliability_score(tm);
  auto swapped_samples = matrix({{S, L, L, L}, {S, S, L, S}, {L, L, L, S}});
  CHECK(sd::reliability_score(swapped_samples) ==
        Catch::Approx(base).epsilon(0).margin(1e-15));
  auto swapped_runs = matrix({{S, S, S, L}, {S, L, L, L}, {L, S, L, L}});
  CHECK(sd::reliability_score(swapped_runs) ==
        Catch::Approx(base).epsilon(0).margin(1e-15));
}

TEST_CASE("unparseable runs are excluded from the frequencies") {
  const auto S = sd::Decision::Scam;
  const auto U = sd::Decision::Unparseable;
  SECTION("partially parseable sample uses parseable runs only") {
    // 2 scam + 1 unparseable == consistent among parseable runs
    auto tm = matrix({{S, U, S}});
    CHECK(sd::reliability_score(tm) == 1.0);
  }
  SECTION("all-unparseable sample contributes maximal entropy and is flagged") {
    auto tm = matrix({{S, S, S}, {U, U, U}});
    auto res = sd::reliability_score_detail(tm);
    CHECK(res.score == Catch::Approx(0.5).epsilon(0).margin(1e-12));
    CHECK(res.all_unparseable_samples == 1);
  }
}

TEST_CASE("the raw-denominator variant spans one to three") {
  const auto S = sd::Decision::Scam;
  const auto L = sd::Decision::Legit;
  auto consistent = matrix({{S, S, S, S}, {L, L, L, L}});
  CHECK(sd::reliability_score(consistent, sd::ReliabilityNorm::HalfLogHalf) ==
        Catch::Approx(1.0).epsilon(0).margin(1e-12));
  auto split = matrix({{S, L, S, L}, {L, S, L, S}});
  CHECK(sd::reliability_score(split, sd::ReliabilityNorm::HalfLogHalf) ==
        Catch::Approx(3.0).epsilon(0).margin(1e-12));
}

TEST_CASE("eval reports round-trip through json") {
  sd::EvalReport r;
  sd::ClassificationMetrics m;
  m.accuracy = 0.75;
  m.precision = 0.5;
  m.recall = 1.0;
  m.f1 = 2.0 / 3.0;
  r.per_run = {m, m};
  r.mean = m;
  r.reliability = 0.25;
  r.unparseable_cells = 3;
  r.backend_errors = 1;
  r.config_echo = {{"runs", 2}, {"config_hash", "abc123"}};

  auto j = sd::report_to_json(r);
  CHECK(j.at("tool_version") == std::string(sd::kToolVersion));
  auto back = sd::report_from_json(j);
  CHECK(back.per_run.size() == 2);
  CHECK(back.mean.accuracy == r.mean.accuracy);
  CHECK(back.reliability.value() == 0.25);
  CHECK(back.unparseable_cells == 3);
  CHECK(back.backend_errors == 1);
  CHECK(sd::report_to_json(back).dump() == j.dump());
}

TEST_CASE("text reports carry the header and metric rows") {
  sd::EvalReport r;
  sd::ClassificationMetrics m;
  m.accuracy = 1.0;
  m.precision = 1.0;
  m.recall = 1.0;
  m.f1 = 1.0;
  r.per_run = {m};
  r.mean = m;
  r.reliability = 1.0;
  r.config_echo = {{"config_hash", "cafe01"}};
  auto text = sd::render_report_text(r);
  CHECK(text.find("config=cafe01") != std::string::npos);
  CHECK(text.find(std::string(sd::kToolVersion)) != std::string::npos);
  for (const char* row : {"Accuracy", "Precision", "Recall", "F1-Score",
                          "Reliability", "Run1", "Mean", "Stddev"})
    CHECK(text.find(row) != std::string::npos);
  CHECK(text.find("1.0000") != std::string::npos);
}
