#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bailcnn/corpus.hpp"
#include "bailcnn/errors.hpp"
#include "bailcnn/rng.hpp"
#include "bailcnn/unicode.hpp"

namespace bailcnn {

/// Binary outcome after sanitization. Dismissed is the positive class for
/// the sigmoid head (Granted = 0, Dismissed = 1); metrics report both
/// classes so the choice is observable, not biasing.
enum class Label : uint8_t { kGranted = 0, kDismissed = 1 };

inline const char* to_string(Label l) {
  return l == Label::kGranted ? "granted" : "dismissed";
}

/// A case that passed every sieve rule, with a consistent label/amount pair.
struct CleanCase {
  std::string case_id;
  std::string district;
  std::string text;
  Label label = Label::kGranted;
  int64_t bail_amount = -1;
};

/// The consistency sieves, checked in this order; the first violated rule
/// wins, so a record is logged exactly once.
enum class DropRule : uint8_t {
  kDontKnow,
  kDismissedWithAmount,
  kGrantedWithoutAmount,
  kEmptyText,
};

inline const char* to_string(DropRule r) {
  switch (r) {
    case DropRule::kDontKnow: return "dont_know";
    case DropRule::kDismissedWithAmount: return "dismissed_with_amount";
    case DropRule::kGrantedWithoutAmount: return "granted_without_amount";
    case DropRule::kEmptyText: return "empty_text";
  }
  return "?";
}

struct DropEntry {
  std::string case_id;
  DropRule rule;
  std::string detail;
};

struct DropLog {
  std::vector<DropEntry> entries;
};

struct SieveResult {
  std::optional<CleanCase> kept;
  std::optional<DropEntry> dropped;
};

namespace detail {

inline bool no_amount(int64_t bail_amount) {
  return bail_amount == -1 || bail_amount == 0;
}

inline bool whitespace_only(const std::string& text) {
  const auto cps = unicode::decode_utf8(text);
  return std::all_of(cps.begin(), cps.end(), unicode::is_whitespace);
}

}  // namespace detail

/// Applies the consistency rules to one record. Exactly one of
/// kept/dropped is set.
inline SieveResult sieve(const CaseRecord& record) {
  SieveResult result;
  if (record.decision == Decision::kDontKnow) {
    result.dropped = {record.case_id, DropRule::kDontKnow,
                      "decision is \"don't know\""};
    return result;
  }
  if (record.decision == Decision::kDismissed &&
      !detail::no_amount(record.bail_amount)) {
    result.dropped = {record.case_id, DropRule::kDismissedWithAmount,
                      "dismissed with bail_amount " +
                          std::to_string(record.bail_amount)};
    return result;
  }
  if (record.decision == Decision::kGranted &&
      detail::no_amount(record.bail_amount)) {
    result.dropped = {record.case_id, DropRule::kGrantedWithoutAmount,
                      "granted with bail_amount " +
                          std::to_string(record.bail_amount)};
    return result;
  }
  if (record.text.empty() || detail::whitespace_only(record.text)) {
    result.dropped = {record.case_id, DropRule::kEmptyText,
                      "text is empty or whitespace-only"};
    return result;
  }
  CleanCase clean;
  clean.case_id = record.case_id;
  clean.district = record.district;
  clean.text = record.text;
  clean.label = record.decision == Decision::kGranted ? Label::kGranted
                                                      : Label::kDismissed;
  clean.bail_amount = record.bail_amount;
  result.kept = std::move(clean);
  return result;
}

/// Sieves a whole corpus, preserving input order among kept cases.
/// |clean| + |log| == |records| always.
inline std::pair<std::vector<CleanCase>, DropLog> sanitize_corpus(
    const std::vector<CaseRecord>& records) {
  std::vector<CleanCase> clean;
  DropLog log;
  clean.reserve(records.size());
  for (const auto& record : records) {
    auto result = sieve(record);
    if (result.kept) {
      clean.push_back(std::move(*result.kept));
    } else {
      log.entries.push_back(std::move(*result.dropped));
    }
  }
  return {std::move(clean), std::move(log)};
}

/// Exact train fraction, kept as a rational so floor(ratio * N) never
/// suffers float trouble. Default 4/5.
struct Ratio {
  uint64_t num = 4;
  uint64_t den = 5;
};

inline size_t train_count(size_t n, Ratio ratio) {
  if (ratio.den == 0 || ratio.num == 0 || ratio.num >= ratio.den) {
    throw ConfigError("split ratio must satisfy 0 < ratio < 1");
  }
  return static_cast<size_t>(n * ratio.num / ratio.den);
}

struct SplitDataset {
  std::vector<CleanCase> train;
  std::vector<CleanCase> test;
  Ratio ratio;
  uint64_t seed = 0;
};

/// Seeded uniform shuffle, then the first floor(ratio*N) cases form the
/// train split. Same (cases, ratio, seed) always gives the same split.
/// With stratified=true the shuffle happens per label and each label
/// contributes proportionally (largest-remainder rounding keeps
/// |train| == floor(ratio*N)).
inline SplitDataset split(const std::vector<CleanCase>& cases, Ratio ratio,
                          uint64_t seed, bool stratified = false) {
  if (cases.empty()) throw DataError("split: no cases to split");
  const size_t n_train = train_count(cases.size(), ratio);

  SplitDataset out;
  out.ratio = ratio;
  out.seed = seed;

  Rng rng = Rng::derive(seed, RngStream::kShuffle);
  if (!stratified) {
    std::vector<size_t> order(cases.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    for (size_t i = 0; i < order.size(); ++i) {
      (i < n_train ? out.train : out.test).push_back(cases[order[i]]);
    }
    return out;
  }

  std::vector<size_t> granted, dismissed;
  for (size_t i = 0; i < cases.size(); ++i) {
    (cases[i].label == Label::kGranted ? granted : dismissed).push_back(i);
  }
  rng.shuffle(granted);
  rng.shuffle(dismissed);

  // Per-label quota by largest remainder, total pinned to floor(ratio*N).
  auto quota = [&](size_t n) { return n * ratio.num / ratio.den; };
  size_t q_granted = quota(granted.size());
  size_t q_dismissed = quota(dismissed.size());
  while (q_granted + q_dismissed < n_train) {
    uint64_t rem_g = granted.size() * ratio.num % ratio.den;
    uint64_t rem_d = dismissed.size() * ratio.num % ratio.den;
    bool bump_granted = q_granted < granted.size() &&
                        (q_dismissed >= dismissed.size() || rem_g >= rem_d);
    if (bump_granted) ++q_granted;
    else ++q_dismissed;
  }
  for (size_t i = 0; i < granted.size(); ++i) {
    (i < q_granted ? out.train : out.test).push_back(cases[granted[i]]);
  }
  for (size_t i = 0; i < dismissed.size(); ++i) {
    (i < q_dismissed ? out.train : out.test).push_back(cases[dismissed[i]]);
  }
  return out;
}

inline nlohmann::json to_json(const CleanCase& c) {
  return nlohmann::json{{"case_id", c.case_id},
                        {"district", c.district},
                        {"label", to_string(c.label)},
                        {"bail_amount", c.bail_amount},
                        {"text", c.text}};
}

inline std::string clean_to_jsonl(const std::vector<CleanCase>& cases) {
  std::string out;
  for (const auto& c : cases) {
    out += to_json(c).dump();
    out.push_back('\n');
  }
  return out;
}

inline std::vector<CleanCase> clean_from_jsonl(const std::string& content) {
  std::vector<CleanCase> cases;
  for (const auto& line : io::split_lines(content)) {
    if (line.empty()) continue;
    nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      throw DataError("clean jsonl: invalid line");
    }
    CleanCase c;
    c.case_id = obj.at("case_id").get<std::string>();
    c.district = obj.at("district").get<std::string>();
    c.text = obj.at("text").get<std::string>();
    c.bail_amount = obj.at("bail_amount").get<int64_t>();
    std::string label = obj.at("label").get<std::string>();
    if (label == "granted") c.label = Label::kGranted;
    else if (label == "dismissed") c.label = Label::kDismissed;
    else throw DataError("clean jsonl: unknown label " + label);
    cases.push_back(std::move(c));
  }
  return cases;
}

inline std::string drop_log_to_jsonl(const DropLog& log) {
  std::string out;
  for (const auto& e : log.entries) {
    out += nlohmann::json{{"case_id", e.case_id},
                          {"rule", to_string(e.rule)},
                          {"detail", e.detail}}
               .dump();
    out.push_back('\n');
  }
  return out;
}

/// case_id -> subset manifest for audit, in split output order.
inline std::string split_manifest_csv(const SplitDataset& split) {
  std::string out = "case_id,subset\n";
  for (const auto& c : split.train) out += io::csv_row({c.case_id, "train"});
  for (const auto& c : split.test) out += io::csv_row({c.case_id, "test"});
  return out;
}

}  // namespace bailcnn
