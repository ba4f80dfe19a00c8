#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bailcnn/errors.hpp"
#include "bailcnn/io.hpp"

namespace bailcnn {

/// Raw decision strings the corpus is allowed to carry. Anything else is an
/// ingestion reject, not a fourth class.
enum class Decision { kGranted, kDismissed, kDontKnow };

inline const char* to_string(Decision d) {
  switch (d) {
    case Decision::kGranted: return "granted";
    case Decision::kDismissed: return "dismissed";
    case Decision::kDontKnow: return "don't know";
  }
  return "?";
}

inline bool decision_from_string(const std::string& s, Decision& out) {
  if (s == "granted") out = Decision::kGranted;
  else if (s == "dismissed") out = Decision::kDismissed;
  else if (s == "don't know") out = Decision::kDontKnow;
  else return false;
  return true;
}

/// One raw court case as ingested. bail_amount uses -1 as the no-amount
/// sentinel, matching the corpus convention.
struct CaseRecord {
  std::string case_id;
  std::string district;
  std::string text;
  Decision decision = Decision::kDontKnow;
  int64_t bail_amount = -1;
  std::string source_path;
};

/// A row that failed ingestion, with enough context to audit it.
struct Reject {
  std::string source_path;
  size_t line_number = 0;  // 1-based line (JSONL) or row (CSV, incl. header)
  std::string reason;
};

enum class CorpusFormat { kJsonl, kCsv };

struct DistrictStats {
  uint64_t case_count = 0;
  uint64_t byte_size = 0;
};

/// Per-district file sizes and parsed record counts.
struct DistrictInventory {
  std::map<std::string, DistrictStats> entries;
};

struct LabelCounts {
  uint64_t granted = 0;
  uint64_t dismissed = 0;
  uint64_t dont_know = 0;
};

struct LabelDistribution {
  std::map<std::string, LabelCounts> per_district;
};

namespace detail {

inline bool validate_record(CaseRecord& rec, std::string& reason) {
  if (rec.case_id.empty()) {
    reason = "empty field: case_id";
    return false;
  }
  if (rec.district.empty()) {
    reason = "empty field: district";
    return false;
  }
  if (rec.bail_amount < -1) {
    reason = "bail_amount below -1: " + std::to_string(rec.bail_amount);
    return false;
  }
  return true;
}

inline bool record_from_json(const nlohmann::json& obj, CaseRecord& rec,
                             std::string& reason) {
  for (const char* key : {"case_id", "district", "decision", "bail_amount",
                          "text"}) {
    if (!obj.contains(key)) {
      reason = std::string("missing field: ") + key;
      return false;
    }
  }
  if (!obj["case_id"].is_string() || !obj["district"].is_string() ||
      !obj["decision"].is_string() || !obj["text"].is_string()) {
    reason = "non-string value in a string field";
    return false;
  }
  if (!obj["bail_amount"].is_number_integer()) {
    reason = "bail_amount is not an integer";
    return false;
  }
  rec.case_id = obj["case_id"].get<std::string>();
  rec.district = obj["district"].get<std::string>();
  rec.text = obj["text"].get<std::string>();
  rec.bail_amount = obj["bail_amount"].get<int64_t>();
  std::string decision = obj["decision"].get<std::string>();
  if (!decision_from_string(decision, rec.decision)) {
    reason = "unknown decision value: " + decision;
    return false;
  }
  return validate_record(rec, reason);
}

inline const std::vector<std::string> kCsvHeader = {
    "case_id", "district", "decision", "bail_amount", "text"};

}  // namespace detail

/// Reads one corpus file. Well-formed rows become CaseRecords in file
/// order; malformed rows land in `rejects` with a reason instead of being
/// silently dropped.
inline std::vector<CaseRecord> load_corpus(const std::filesystem::path& path,
                                           CorpusFormat format,
                                           std::vector<Reject>& rejects) {
  const std::string content = io::read_file(path);
  std::vector<CaseRecord> records;

  if (format == CorpusFormat::kJsonl) {
    const auto lines = io::split_lines(content);
    for (size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      CaseRecord rec;
      std::string reason;
      nlohmann::json obj = nlohmann::json::parse(lines[i], nullptr, false);
      if (obj.is_discarded() || !obj.is_object()) {
        reason = "invalid JSON object";
      } else if (detail::record_from_json(obj, rec, reason)) {
        rec.source_path = path.string();
        records.push_back(std::move(rec));
        continue;
      }
      rejects.push_back({path.string(), i + 1, reason});
    }
    return records;
  }

  const auto rows = io::parse_csv(content);
  if (rows.empty()) return records;
  if (rows[0] != detail::kCsvHeader) {
    throw DataError("csv header mismatch in " + path.string() +
                    " (want case_id,district,decision,bail_amount,text)");
  }
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    std::string reason;
    if (row.size() != detail::kCsvHeader.size()) {
      reason = "expected 5 fields, got " + std::to_string(row.size());
    } else {
      CaseRecord rec;
      rec.case_id = row[0];
      rec.district = row[1];
      rec.text = row[4];
      bool ok = decision_from_string(row[2], rec.decision);
      if (!ok) {
        reason = "unknown decision value: " + row[2];
      } else {
        try {
          size_t pos = 0;
          rec.bail_amount = std::stoll(row[3], &pos);
          if (pos != row[3].size()) throw std::invalid_argument(row[3]);
        } catch (const std::exception&) {
          reason = "bail_amount is not an integer: " + row[3];
          ok = false;
        }
      }
      if (ok && detail::validate_record(rec, reason)) {
        rec.source_path = path.string();
        records.push_back(std::move(rec));
        continue;
      }
    }
    rejects.push_back({path.string(), i + 1, reason});
  }
  return records;
}

inline nlohmann::json to_json(const CaseRecord& rec) {
  return nlohmann::json{{"case_id", rec.case_id},
                        {"district", rec.district},
                        {"decision", to_string(rec.decision)},
                        {"bail_amount", rec.bail_amount},
                        {"text", rec.text}};
}

inline std::string to_jsonl(const std::vector<CaseRecord>& records) {
  std::string out;
  for (const auto& rec : records) {
    out += to_json(rec).dump();
    out.push_back('\n');
  }
  return out;
}

inline std::string rejects_to_jsonl(const std::vector<Reject>& rejects) {
  std::string out;
  for (const auto& r : rejects) {
    out += nlohmann::json{{"source_path", r.source_path},
                          {"line_number", r.line_number},
                          {"reason", r.reason}}
               .dump();
    out.push_back('\n');
  }
  return out;
}

/// Builds the per-district inventory from (district, file) pairs. byte_size
/// sums on-disk sizes; case_count counts parseable records.
inline DistrictInventory inventory(
    const std::vector<std::pair<std::string, std::filesystem::path>>& paths,
    CorpusFormat format) {
  DistrictInventory inv;
  for (const auto& [district, path] : paths) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) {
      throw IoError("cannot stat corpus file for district '" + district +
                    "': " + path.string());
    }
    std::vector<Reject> rejects;
    const auto records = load_corpus(path, format, rejects);
    auto& stats = inv.entries[district];
    stats.case_count += records.size();
    stats.byte_size += size;
  }
  return inv;
}

enum class SelectionKey { kByteSize, kCaseCount };

/// Picks the k_high largest and k_low smallest districts by the given key.
/// high is descending, low ascending, ties broken by district name so the
/// result is a pure function of the inventory.
inline std::pair<std::vector<std::string>, std::vector<std::string>>
select_districts(const DistrictInventory& inv, size_t k_high, size_t k_low,
                 SelectionKey key) {
  if (inv.entries.size() < k_high + k_low) {
    throw DataError("district selection needs " +
                    std::to_string(k_high + k_low) + " districts, corpus has " +
                    std::to_string(inv.entries.size()));
  }
  std::vector<std::pair<std::string, uint64_t>> ranked;
  ranked.reserve(inv.entries.size());
  for (const auto& [district, stats] : inv.entries) {
    ranked.emplace_back(district, key == SelectionKey::kByteSize
                                      ? stats.byte_size
                                      : stats.case_count);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });

  std::vector<std::string> high, low;
  high.reserve(k_high);
  low.reserve(k_low);
  for (size_t i = 0; i < k_high; ++i) high.push_back(ranked[i].first);
  // Bottom k_low of the descending ranking, re-sorted ascending by
  // (value, name) so ties keep lexicographic order.
  std::vector<std::pair<std::string, uint64_t>> bottom(
      ranked.end() - static_cast<ptrdiff_t>(k_low), ranked.end());
  std::sort(bottom.begin(), bottom.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  for (auto& [district, value] : bottom) low.push_back(std::move(district));
  return {std::move(high), std::move(low)};
}

inline LabelDistribution label_distribution(
    const std::vector<CaseRecord>& records) {
  LabelDistribution dist;
  for (const auto& rec : records) {
    auto& counts = dist.per_district[rec.district];
    switch (rec.decision) {
      case Decision::kGranted: ++counts.granted; break;
      case Decision::kDismissed: ++counts.dismissed; break;
      case Decision::kDontKnow: ++counts.dont_know; break;
    }
  }
  return dist;
}

inline std::string label_distribution_csv(const LabelDistribution& dist) {
  std::string out = "district,granted,dismissed,dont_know\n";
  for (const auto& [district, c] : dist.per_district) {
    out += io::csv_row({district, std::to_string(c.granted),
                        std::to_string(c.dismissed),
                        std::to_string(c.dont_know)});
  }
  return out;
}

inline std::string inventory_csv(const DistrictInventory& inv) {
  std::string out = "district,case_count,byte_size\n";
  for (const auto& [district, stats] : inv.entries) {
    out += io::csv_row({district, std::to_string(stats.case_count),
                        std::to_string(stats.byte_size)});
  }
  return out;
}

}  // namespace bailcnn
