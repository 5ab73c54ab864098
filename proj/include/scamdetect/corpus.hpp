#pragma once

// Labeled conversation datasets: loading, validation, flattening and
// stratified splitting. Two on-disk formats are supported:
//
//   JSONL  one object per line:
//          {"id": str, "label": "scam"|"legit", "source": str,
//           "turns": [{"speaker": "caller"|"callee", "text": str}, ...]}
//   CSV    columns id,label,source,dialogue where dialogue joins turns
//          with "||" and prefixes each turn with "caller>" or "callee>".
//
// Both are UTF-8. All types are immutable value types once constructed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "scamdetect/util.hpp"

namespace scamdetect {

enum class Label { Scam, Legit };
enum class Speaker { Caller, Callee };

inline std::string_view to_string(Label l) {
  return l == Label::Scam ? "scam" : "legit";
}

inline std::string_view to_string(Speaker s) {
  return s == Speaker::Caller ? "caller" : "callee";
}

struct Turn {
  Speaker speaker = Speaker::Caller;
  std::string text;  // at least one non-whitespace character

  bool operator==(const Turn&) const = default;
};

struct Conversation {
  std::string id;
  std::vector<Turn> turns;  // non-empty
  Label label = Label::Legit;
  std::string source;  // provenance tag, e.g. "our-real"

  bool operator==(const Conversation&) const = default;
};

struct LabeledDataset {
  std::string name;
  std::vector<Conversation> conversations;

  std::size_t size() const { return conversations.size(); }
  std::size_t count(Label l) const {
    return static_cast<std::size_t>(std::count_if(
        conversations.begin(), conversations.end(),
        [l](const Conversation& c) { return c.label == l; }));
  }

  bool operator==(const LabeledDataset&) const = default;
};

enum class DatasetFormat { Jsonl, Csv };

struct ParseError : Error {
  std::size_t line;
  std::string reason;
  ParseError(std::size_t line_, std::string reason_)
      : Error("parse error at line " + std::to_string(line_) + ": " + reason_),
        line(line_),
        reason(std::move(reason_)) {}
};

struct DuplicateIdError : Error {
  std::string id;
  explicit DuplicateIdError(std::string id_)
      : Error("duplicate conversation id: " + id_), id(std::move(id_)) {}
};

struct EmptyDatasetError : Error {
  EmptyDatasetError() : Error("dataset contains no records") {}
};

struct InsufficientSamplesError : Error {
  Label label;
  explicit InsufficientSamplesError(Label l)
      : Error(std::string("insufficient samples for label: ") +
              std::string(to_string(l))),
        label(l) {}
};

namespace detail {

inline Label parse_label(std::string_view s, std::size_t line) {
  if (s == "scam") return Label::Scam;
  if (s == "legit") return Label::Legit;
  throw ParseError(line, "unknown label \"" + std::string(s) + "\"");
}

inline Speaker parse_speaker(std::string_view s, std::size_t line) {
  if (s == "caller") return Speaker::Caller;
  if (s == "callee") return Speaker::Callee;
  throw ParseError(line, "unknown speaker \"" + std::string(s) + "\"");
}

inline void validate_record(const Conversation& conv, std::size_t line) {
  if (conv.id.empty()) throw ParseError(line, "empty id");
  if (conv.turns.empty()) throw ParseError(line, "conversation has no turns");
  for (const Turn& t : conv.turns) {
    if (trim(t.text).empty()) throw ParseError(line, "empty turn text");
  }
}

inline void check_ids_and_finish(LabeledDataset& ds) {
  std::unordered_set<std::string_view> seen;
  for (const Conversation& c : ds.conversations) {
    if (!seen.insert(c.id).second) throw DuplicateIdError(c.id);
  }
  if (ds.conversations.empty()) throw EmptyDatasetError();
}

// CSV records honoring RFC 4180 quoting; quoted fields may span lines.
// Returns (fields, line number the record started on).
inline std::vector<std::pair<std::vector<std::string>, std::size_t>>
read_csv_records(std::istream& in) {
  std::vector<std::pair<std::vector<std::string>, std::size_t>> records;
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  std::size_t line = 1, record_line = 1;
  std::vector<std::string> fields;
  std::string cur;
  bool in_quotes = false, any = false;
  auto end_record = [&] {
    fields.push_back(cur);
    cur.clear();
    records.emplace_back(std::move(fields), record_line);
    fields.clear();
    any = false;
  };
  for (std::size_t i = 0; i < content.size(); ++i) {
    char c = content[i];
    if (c == '\n') ++line;
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cur.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        any = true;
        break;
      case ',':
        fields.push_back(cur);
        cur.clear();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        if (any || !cur.empty() || !fields.empty()) end_record();
        record_line = line;
        break;
      default:
        cur.push_back(c);
        any = true;
        break;
    }
  }
  if (in_quotes) throw ParseError(line, "unterminated quoted field");
  if (any || !cur.empty() || !fields.empty()) end_record();
  return records;
}

inline std::string csv_quote(std::string_view field) {
  bool needs = field.find_first_of(",\"\n\r") != std::string_view::npos;
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace detail

inline LabeledDataset read_dataset_jsonl(std::istream& in, std::string name) {
  LabeledDataset ds{std::move(name), {}};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what());
    }
    try {
      Conversation conv;
      conv.id = rec.at("id").get<std::string>();
      conv.label = detail::parse_label(rec.at("label").get<std::string>(), line_no);
      conv.source = rec.value("source", std::string{});
      for (const auto& t : rec.at("turns")) {
        Turn turn;
        turn.speaker =
            detail::parse_speaker(t.at("speaker").get<std::string>(), line_no);
        turn.text = t.at("text").get<std::string>();
        conv.turns.push_back(std::move(turn));
      }
      detail::validate_record(conv, line_no);
      ds.conversations.push_back(std::move(conv));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  detail::check_ids_and_finish(ds);
  return ds;
}

inline LabeledDataset read_dataset_csv(std::istream& in, std::string name) {
  LabeledDataset ds{std::move(name), {}};
  auto records = detail::read_csv_records(in);
  bool first = true;
  for (auto& [fields, line] : records) {
    if (first) {
      first = false;
      if (fields == std::vector<std::string>{"id", "label", "source", "dialogue"})
        continue;  // header row
      throw ParseError(line, "expected header \"id,label,source,dialogue\"");
    }
    if (fields.size() != 4)
      throw ParseError(line, "expected 4 columns, got " +
                                 std::to_string(fields.size()));
    Conversation conv;
    conv.id = fields[0];
    conv.label = detail::parse_label(fields[1], line);
    conv.source = fields[2];
    const std::string& dialogue = fields[3];
    std::size_t pos = 0;
    while (pos <= dialogue.size()) {
      std::size_t next = dialogue.find("||", pos);
      std::string seg = dialogue.substr(
          pos, next == std::string::npos ? std::string::npos : next - pos);
      Turn turn;
      if (seg.rfind("caller>", 0) == 0) {
        turn.speaker = Speaker::Caller;
        turn.text = seg.substr(7);
      } else if (seg.rfind("callee>", 0) == 0) {
        turn.speaker = Speaker::Callee;
        turn.text = seg.substr(7);
      } else {
        throw ParseError(line, "turn segment missing caller>/callee> prefix");
      }
      if (trim(turn.text).empty()) throw ParseError(line, "empty turn text");
      conv.turns.push_back(std::move(turn));
      if (next == std::string::npos) break;
      pos = next + 2;
    }
    detail::validate_record(conv, line);
    ds.conversations.push_back(std::move(conv));
  }
  detail::check_ids_and_finish(ds);
  return ds;
}

inline void write_dataset_jsonl(std::ostream& out, const LabeledDataset& ds) {
  for (const Conversation& c : ds.conversations) {
    nlohmann::json rec;
    rec["id"] = c.id;
    rec["label"] = std::string(to_string(c.label));
    rec["source"] = c.source;
    nlohmann::json turns = nlohmann::json::array();
    for (const Turn& t : c.turns) {
      turns.push_back({{"speaker", std::string(to_string(t.speaker))},
                       {"text", t.text}});
    }
    rec["turns"] = std::move(turns);
    out << rec.dump() << '\n';
  }
}

inline void write_dataset_csv(std::ostream& out, const LabeledDataset& ds) {
  out << "id,label,source,dialogue\n";
  for (const Conversation& c : ds.conversations) {
    std::string dialogue;
    for (std::size_t i = 0; i < c.turns.size(); ++i) {
      const Turn& t = c.turns[i];
      if (t.text.find("||") != std::string::npos)
        throw Error("turn text contains \"||\", not representable in CSV: id " +
                    c.id);
      if (i) dialogue += "||";
      dialogue += std::string(to_string(t.speaker)) + ">" + t.text;
    }
    out << detail::csv_quote(c.id) << ',' << to_string(c.label) << ','
        << detail::csv_quote(c.source) << ',' << detail::csv_quote(dialogue)
        << '\n';
  }
}

inline LabeledDataset load_dataset(const std::filesystem::path& path,
                                   DatasetFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset file: " + path.string());
  std::string name = path.stem().string();
  return format == DatasetFormat::Jsonl ? read_dataset_jsonl(in, name)
                                        : read_dataset_csv(in, name);
}

inline void save_dataset(const LabeledDataset& ds,
                         const std::filesystem::path& path,
                         DatasetFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset file: " + path.string());
  if (format == DatasetFormat::Jsonl) write_dataset_jsonl(out, ds);
  else write_dataset_csv(out, ds);
}

// Joins all turn texts in order with single spaces, dropping speaker roles
// and collapsing internal whitespace runs.
inline std::string flatten(const Conversation& conv) {
  std::string joined;
  for (std::size_t i = 0; i < conv.turns.size(); ++i) {
    if (i) joined.push_back(' ');
    joined += conv.turns[i].text;
  }
  return collapse_whitespace(joined);
}

// Stratified split: per label bucket, round(test_fraction * bucket size)
// conversations go to the test side, selected by a seeded shuffle. Output
// order follows the input dataset order, so the result depends only on
// (ds, test_fraction, seed).
inline std::pair<LabeledDataset, LabeledDataset> split(
    const LabeledDataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw InvalidArgumentError("test_fraction must be in (0,1)");
  for (Label l : {Label::Scam, Label::Legit}) {
    if (ds.count(l) < 2) throw InsufficientSamplesError(l);
  }
  std::vector<bool> in_test(ds.size(), false);
  for (Label l : {Label::Scam, Label::Legit}) {
    std::vector<std::size_t> bucket;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.conversations[i].label == l) bucket.push_back(i);
    }
    auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(bucket.size())));
    Rng rng(mix_seed(seed, l == Label::Scam ? 1 : 2));
    fisher_yates(bucket, rng);
    for (std::size_t i = 0; i < n_test && i < bucket.size(); ++i)
      in_test[bucket[i]] = true;
  }
  LabeledDataset train{ds.name + "-train", {}};
  LabeledDataset test{ds.name + "-test", {}};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    (in_test[i] ? test : train).conversations.push_back(ds.conversations[i]);
  }
  return {std::move(train), std::move(test)};
}

}  // namespace scamdetect
