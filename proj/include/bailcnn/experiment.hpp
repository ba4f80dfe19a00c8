#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bailcnn/checkpoint.hpp"
#include "bailcnn/corpus.hpp"
#include "bailcnn/errors.hpp"
#include "bailcnn/metrics.hpp"
#include "bailcnn/model.hpp"
#include "bailcnn/rng.hpp"
#include "bailcnn/sanitizer.hpp"
#include "bailcnn/tokenizer.hpp"

namespace bailcnn {

/// Token-id matrix plus labels, ready for the model. `len` is the pad
/// length every row was encoded to.
struct EncodedDataset {
  size_t len = 0;
  std::vector<int32_t> ids;      // size() * len, row-major
  std::vector<uint8_t> labels;   // 0 = Granted, 1 = Dismissed
  std::vector<std::string> case_ids;

  size_t size() const { return labels.size(); }
  const int32_t* row(size_t i) const { return ids.data() + i * len; }
};

struct TrainHyper {
  size_t epochs = 10;
  size_t batch_size = 32;
  double lr = 0.001;
  uint64_t seed = 42;
  size_t max_len_cap = 4096;
  /// 0 validates on the training set itself (the published protocol);
  /// > 0 holds out that fraction of the training data for validation.
  double val_fraction = 0.0;
  /// Balanced per-class loss weights (off by default; the published run
  /// uses none despite the label imbalance).
  bool class_weights = false;
  /// Stop after this many epochs without validation-accuracy improvement
  /// (0 disables early stopping).
  size_t patience = 0;

  void validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
    if (val_fraction < 0.0 || val_fraction >= 1.0) {
      throw ConfigError("train: val_fraction must be in [0, 1)");
    }
  }
};

struct EpochStats {
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
};

namespace detail {

template <typename T>
std::vector<uint8_t> predict_batch(const ModelConfig& config,
                                   const Parameters<T>& params,
                                   const EncodedDataset& data,
                                   std::vector<T>* probs_out) {
  std::vector<uint8_t> preds;
  preds.reserve(data.size());
  if (probs_out) probs_out->reserve(data.size());
  ForwardCache<T> cache;
  const size_t chunk = 64;
  for (size_t start = 0; start < data.size(); start += chunk) {
    const size_t n = std::min(chunk, data.size() - start);
    const auto& probs = model_forward(config, params, data.row(start), n,
                                      Mode::kEval, nullptr, cache);
    for (size_t i = 0; i < n; ++i) {
      // Threshold 0.5, ties classified as Dismissed.
      preds.push_back(probs[i] >= T(0.5) ? 1 : 0);
      if (probs_out) probs_out->push_back(probs[i]);
    }
  }
  return preds;
}

inline double accuracy_of(const std::vector<uint8_t>& pred,
                          const std::vector<uint8_t>& truth) {
  size_t hits = 0;
  for (size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return pred.empty() ? 0.0
                      : static_cast<double>(hits) /
                            static_cast<double>(pred.size());
}

template <typename T>
std::vector<T> balanced_weights(const std::vector<uint8_t>& labels) {
  const double n = static_cast<double>(labels.size());
  double positives = 0;
  for (uint8_t l : labels) positives += l;
  const double negatives = n - positives;
  const double w1 = positives > 0 ? n / (2.0 * positives) : 0.0;
  const double w0 = negatives > 0 ? n / (2.0 * negatives) : 0.0;
  std::vector<T> weights(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    weights[i] = static_cast<T>(labels[i] ? w1 : w0);
  }
  return weights;
}

}  // namespace detail

/// Minibatch Adam on BCE. Shuffles per epoch with a seed-derived stream;
/// everything runs single-threaded in a fixed order so the same seed
/// always produces bit-identical parameters.
template <typename T>
TrainHistory train(const ModelConfig& config, Parameters<T>& params,
                   const EncodedDataset& data, const TrainHyper& hyper) {
  hyper.validate();
  config.validate();
  if (data.size() == 0) throw DataError("train: empty training set");
  if (data.len != config.max_len) {
    throw ConfigError("train: dataset pad length " + std::to_string(data.len) +
                      " does not match model max_len " +
                      std::to_string(config.max_len));
  }

  // Optional holdout for validation; default validates on the training
  // data itself.
  std::vector<size_t> fit_idx(data.size());
  for (size_t i = 0; i < fit_idx.size(); ++i) fit_idx[i] = i;
  std::vector<size_t> val_idx;
  if (hyper.val_fraction > 0.0) {
    Rng holdout_rng = Rng::derive(hyper.seed, RngStream::kHoldout);
    holdout_rng.shuffle(fit_idx);
    const size_t n_val = std::min(
        data.size() - 1,
        static_cast<size_t>(static_cast<double>(data.size()) *
                            hyper.val_fraction));
    val_idx.assign(fit_idx.end() - static_cast<ptrdiff_t>(n_val),
                   fit_idx.end());
    fit_idx.resize(fit_idx.size() - n_val);
  } else {
    val_idx = fit_idx;
  }

  std::vector<T> weights;
  if (hyper.class_weights) {
    weights = detail::balanced_weights<T>(data.labels);
  }

  AdamConfig adam_config;
  adam_config.lr = hyper.lr;
  AdamState<T> adam = AdamState<T>::init(config, adam_config);
  Rng dropout_rng = Rng::derive(hyper.seed, RngStream::kDropout);

  auto gather = [&](const std::vector<size_t>& idx, size_t start, size_t n,
                    std::vector<int32_t>& ids, std::vector<uint8_t>& labels,
                    std::vector<T>& batch_weights) {
    ids.resize(n * data.len);
    labels.resize(n);
    if (!weights.empty()) batch_weights.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const size_t r = idx[start + i];
      std::copy(data.row(r), data.row(r) + data.len,
                ids.begin() + static_cast<ptrdiff_t>(i * data.len));
      labels[i] = data.labels[r];
      if (!weights.empty()) batch_weights[i] = weights[r];
    }
  };

  TrainHistory history;
  double best_val = -1.0;
  size_t epochs_since_best = 0;

  ForwardCache<T> cache;
  std::vector<int32_t> batch_ids;
  std::vector<uint8_t> batch_labels;
  std::vector<T> batch_weights;

  for (size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng shuffle_rng = Rng::derive(hyper.seed, RngStream::kShuffle, epoch);
    shuffle_rng.shuffle(fit_idx);

    double loss_sum = 0.0;
    size_t hit = 0;
    for (size_t start = 0; start < fit_idx.size();
         start += hyper.batch_size) {
      const size_t n = std::min(hyper.batch_size, fit_idx.size() - start);
      gather(fit_idx, start, n, batch_ids, batch_labels, batch_weights);

      const auto& probs =
          model_forward(config, params, batch_ids.data(), n, Mode::kTrain,
                        &dropout_rng, cache);
      const T loss = bce_loss(cache.probs, batch_labels,
                              weights.empty() ? nullptr : &batch_weights);
      if (!std::isfinite(static_cast<double>(loss))) {
        throw NumericError("train: non-finite loss " +
                           std::to_string(static_cast<double>(loss)) +
                           " at epoch " + std::to_string(epoch + 1) +
                           ", batch " +
                           std::to_string(start / hyper.batch_size + 1));
      }
      loss_sum += static_cast<double>(loss) * static_cast<double>(n);
      for (size_t i = 0; i < n; ++i) {
        hit += (probs[i] >= T(0.5) ? 1 : 0) == batch_labels[i];
      }

      Parameters<T> grads = model_backward(
          config, params, cache, batch_labels,
          weights.empty() ? nullptr : &batch_weights);
      adam_step(params, grads, adam);
    }

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(fit_idx.size());
    stats.train_accuracy =
        static_cast<double>(hit) / static_cast<double>(fit_idx.size());

    // Validation: eval-mode forward over val_idx.
    {
      std::vector<uint8_t> preds, truths;
      preds.reserve(val_idx.size());
      truths.reserve(val_idx.size());
      const size_t chunk = 64;
      for (size_t start = 0; start < val_idx.size(); start += chunk) {
        const size_t n = std::min(chunk, val_idx.size() - start);
        gather(val_idx, start, n, batch_ids, batch_labels, batch_weights);
        const auto& probs = model_forward(config, params, batch_ids.data(),
                                          n, Mode::kEval, nullptr, cache);
        for (size_t i = 0; i < n; ++i) {
          preds.push_back(probs[i] >= T(0.5) ? 1 : 0);
          truths.push_back(batch_labels[i]);
        }
      }
      stats.val_accuracy = detail::accuracy_of(preds, truths);
    }

    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    history.epochs.push_back(stats);

    if (hyper.patience > 0) {
      if (stats.val_accuracy > best_val) {
        best_val = stats.val_accuracy;
        epochs_since_best = 0;
      } else if (++epochs_since_best >= hyper.patience) {
        break;
      }
    }
  }
  return history;
}

/// Eval-mode predictions (threshold 0.5, ties Dismissed) scored with the
/// metrics module.
template <typename T>
EvalReport evaluate(const ModelConfig& config, const Parameters<T>& params,
                    const EncodedDataset& test_set) {
  if (test_set.size() == 0) throw DataError("evaluate: empty test set");
  const auto preds = detail::predict_batch<T>(config, params, test_set,
                                              nullptr);
  return compute_metrics(confusion(preds, test_set.labels));
}

template <typename T>
ConfusionMatrix2 test_confusion(const ModelConfig& config,
                                const Parameters<T>& params,
                                const EncodedDataset& test_set) {
  if (test_set.size() == 0) throw DataError("evaluate: empty test set");
  const auto preds = detail::predict_batch<T>(config, params, test_set,
                                              nullptr);
  return confusion(preds, test_set.labels);
}

enum class ExperimentMode { kPerDistrict, kPooledHigh, kPooledLow, kPooledAll };

inline const char* to_string(ExperimentMode m) {
  switch (m) {
    case ExperimentMode::kPerDistrict: return "per_district";
    case ExperimentMode::kPooledHigh: return "pooled_high";
    case ExperimentMode::kPooledLow: return "pooled_low";
    case ExperimentMode::kPooledAll: return "pooled_all";
  }
  return "?";
}

struct ExperimentPlan {
  ExperimentMode mode = ExperimentMode::kPooledAll;
  /// For kPerDistrict: exactly one district per run. For the pooled
  /// modes: the candidate pool (selection picks from it); empty means
  /// every district in the corpus.
  std::vector<std::string> districts;
  size_t k_high = 10;
  size_t k_low = 10;
  SelectionKey selection_key = SelectionKey::kCaseCount;
  TrainHyper hyper;
  EncodeConfig encode;
  Ratio split_ratio;
  bool stratified_split = false;
  /// Pad length from train-only documents instead of train+test.
  bool pad_from_train_only = false;

  void validate() const {
    hyper.validate();
    if (mode == ExperimentMode::kPerDistrict && districts.size() != 1) {
      throw ConfigError(
          "experiment: per-district mode runs one district at a time");
    }
  }
};

struct DropSummary {
  std::map<std::string, uint64_t> by_rule;
  uint64_t total = 0;
};

struct RunResult {
  ExperimentPlan plan;
  std::vector<std::string> districts_used;
  size_t pad_len = 0;
  std::string checkpoint_path;
  ConfusionMatrix2 confusion;
  EvalReport report;
  DropSummary drops;
  TrainHistory history;
  SplitDataset split;  // case ids + membership, for the audit manifest
  /// high/low/"" — set by callers that know the selection context, used
  /// by the district table formatter.
  std::string section;
};

namespace detail {

inline uint64_t district_seed(uint64_t seed, const std::string& district) {
  // FNV-1a over the district name, folded into the split stream seed so
  // each district shuffles independently but reproducibly.
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : district) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return seed ^ h;
}

}  // namespace detail

/// Splits each district 80:20 on its own (so per-district train/test
/// counts match the published per-district arithmetic) and pools the
/// results. Order: districts in the given order, train-then-test within.
inline SplitDataset split_by_district(const std::vector<CleanCase>& clean,
                                      const std::vector<std::string>& districts,
                                      Ratio ratio, uint64_t seed,
                                      bool stratified) {
  SplitDataset pooled;
  pooled.ratio = ratio;
  pooled.seed = seed;
  for (const auto& district : districts) {
    std::vector<CleanCase> subset;
    for (const auto& c : clean) {
      if (c.district == district) subset.push_back(c);
    }
    if (subset.empty()) continue;
    SplitDataset part = split(subset, ratio,
                              detail::district_seed(seed, district),
                              stratified);
    std::move(part.train.begin(), part.train.end(),
              std::back_inserter(pooled.train));
    std::move(part.test.begin(), part.test.end(),
              std::back_inserter(pooled.test));
  }
  return pooled;
}

/// Encodes both splits at the pad length the run calls for:
/// min(longest document, cap), raised to the smallest length the conv
/// stack accepts when the corpus is very short.
inline std::pair<EncodedDataset, EncodedDataset> encode_splits(
    const SplitDataset& split_data, const Vocabulary& vocab,
    const EncodeConfig& encode_config, size_t cap, bool pad_from_train_only,
    size_t kernel_size, size_t pool_size, size_t* pad_len_out) {
  size_t longest = 0;
  for (const auto& c : split_data.train) {
    longest = std::max(longest, token_count(c.text, vocab, encode_config));
  }
  if (!pad_from_train_only) {
    for (const auto& c : split_data.test) {
      longest = std::max(longest, token_count(c.text, vocab, encode_config));
    }
  }
  size_t pad_len = std::min(longest, cap);
  pad_len = std::max(pad_len, ModelConfig::min_max_len(kernel_size, pool_size));
  if (pad_len_out) *pad_len_out = pad_len;

  EncodeConfig row_config = encode_config;
  row_config.max_len = pad_len;
  auto encode_set = [&](const std::vector<CleanCase>& cases) {
    EncodedDataset out;
    out.len = pad_len;
    out.ids.reserve(cases.size() * pad_len);
    out.labels.reserve(cases.size());
    for (const auto& c : cases) {
      TokenSequence seq = encode(c.text, vocab, row_config);
      out.ids.insert(out.ids.end(), seq.ids.begin(), seq.ids.end());
      out.labels.push_back(static_cast<uint8_t>(c.label));
      out.case_ids.push_back(c.case_id);
    }
    return out;
  };
  return {encode_set(split_data.train), encode_set(split_data.test)};
}

/// The full pipeline for one run: filter districts, sieve, split 80:20,
/// set the pad length from the longest document, train, evaluate on the
/// held-out split, and write the checkpoint. Deterministic given
/// (plan, corpus, vocab).
inline RunResult run_experiment(const ExperimentPlan& plan,
                                const std::vector<CaseRecord>& corpus,
                                const Vocabulary& vocab,
                                const std::filesystem::path& checkpoint_path,
                                const DistrictInventory* inventory = nullptr) {
  plan.validate();

  // Resolve the district list for this run. Selection works off the
  // supplied inventory when there is one (required for byte-size keys);
  // otherwise counts are rebuilt from the records themselves.
  std::vector<std::string> districts;
  if (plan.mode == ExperimentMode::kPerDistrict) {
    districts = plan.districts;
  } else {
    DistrictInventory counted;
    if (!inventory) {
      for (const auto& rec : corpus) {
        if (!plan.districts.empty() &&
            std::find(plan.districts.begin(), plan.districts.end(),
                      rec.district) == plan.districts.end()) {
          continue;
        }
        ++counted.entries[rec.district].case_count;
      }
      if (plan.selection_key == SelectionKey::kByteSize &&
          plan.mode != ExperimentMode::kPooledAll) {
        throw ConfigError(
            "experiment: byte-size selection needs the per-district file "
            "inventory from ingest");
      }
    }
    const DistrictInventory& inv = inventory ? *inventory : counted;
    if (plan.mode == ExperimentMode::kPooledAll) {
      for (const auto& [district, stats] : inv.entries) {
        districts.push_back(district);
      }
    } else {
      auto [high, low] =
          select_districts(inv, plan.k_high, plan.k_low, plan.selection_key);
      districts =
          plan.mode == ExperimentMode::kPooledHigh ? high : low;
    }
  }
  if (districts.empty()) {
    throw DataError("experiment: no districts selected");
  }

  std::vector<CaseRecord> selected;
  for (const auto& rec : corpus) {
    if (std::find(districts.begin(), districts.end(), rec.district) !=
        districts.end()) {
      selected.push_back(rec);
    }
  }
  if (selected.empty()) {
    throw DataError("experiment: no records in the selected districts");
  }

  auto [clean, drop_log] = sanitize_corpus(selected);
  if (clean.empty()) {
    throw DataError("experiment: nothing survived sanitization");
  }

  RunResult result;
  result.plan = plan;
  result.districts_used = districts;
  for (const auto& e : drop_log.entries) {
    ++result.drops.by_rule[to_string(e.rule)];
    ++result.drops.total;
  }

  result.split = split_by_district(clean, districts, plan.split_ratio,
                                   plan.hyper.seed, plan.stratified_split);
  if (result.split.test.empty()) {
    throw DataError("experiment: test split is empty (" +
                    std::to_string(clean.size()) +
                    " clean cases is too few)");
  }

  ModelConfig config;
  config.vocab_size = vocab.size();
  auto [train_set, test_set] = encode_splits(
      result.split, vocab, plan.encode, plan.hyper.max_len_cap,
      plan.pad_from_train_only, config.kernel_size, config.pool_size,
      &result.pad_len);
  config.max_len = result.pad_len;
  config.validate();

  Parameters<float> params = init_params<float>(config, plan.hyper.seed);
  result.history = train(config, params, train_set, plan.hyper);

  const auto preds =
      detail::predict_batch<float>(config, params, test_set, nullptr);
  result.confusion = confusion(preds, test_set.labels);
  result.report = compute_metrics(result.confusion);

  save_checkpoint(params, config, checkpoint_path);
  result.checkpoint_path = checkpoint_path.string();
  return result;
}

inline std::string history_csv(const TrainHistory& history) {
  std::string out = "epoch,train_loss,train_accuracy,val_accuracy,seconds\n";
  char buf[160];
  for (size_t i = 0; i < history.epochs.size(); ++i) {
    const auto& e = history.epochs[i];
    std::snprintf(buf, sizeof(buf), "%zu,%.8f,%.8f,%.8f,%.3f\n", i + 1,
                  e.train_loss, e.train_accuracy, e.val_accuracy, e.seconds);
    out += buf;
  }
  return out;
}

inline nlohmann::json run_result_json(const RunResult& r) {
  nlohmann::json drops;
  for (const auto& [rule, count] : r.drops.by_rule) drops[rule] = count;
  return nlohmann::json{
      {"plan",
       {{"mode", to_string(r.plan.mode)},
        {"districts", r.districts_used},
        {"selection_key", r.plan.selection_key == SelectionKey::kByteSize
                              ? "byte_size"
                              : "case_count"},
        {"k_high", r.plan.k_high},
        {"k_low", r.plan.k_low},
        {"epochs", r.plan.hyper.epochs},
        {"batch_size", r.plan.hyper.batch_size},
        {"lr", r.plan.hyper.lr},
        {"seed", r.plan.hyper.seed},
        {"max_len_cap", r.plan.hyper.max_len_cap},
        {"split_ratio", {{"num", r.plan.split_ratio.num},
                         {"den", r.plan.split_ratio.den}}},
        {"stratified_split", r.plan.stratified_split},
        {"class_weights", r.plan.hyper.class_weights},
        {"val_fraction", r.plan.hyper.val_fraction}}},
      {"pad_len", r.pad_len},
      {"checkpoint", r.checkpoint_path},
      {"train_size", r.split.train.size()},
      {"test_size", r.split.test.size()},
      {"drops", {{"total", r.drops.total}, {"by_rule", drops}}},
      {"confusion", to_json(r.confusion)},
      {"metrics", to_json(r.report)},
      {"section", r.section}};
}

/// One row of the district table.
struct DistrictResult {
  std::string district;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::string section;  // "high", "low" or ""
};

inline DistrictResult district_result_of(const RunResult& r) {
  DistrictResult row;
  row.district = r.districts_used.size() == 1 ? r.districts_used[0]
                                              : to_string(r.plan.mode);
  row.accuracy = r.report.accuracy;
  row.macro_f1 = r.report.macro_f1;
  row.section = r.section;
  return row;
}

/// District table in the published layout: a high-count section, then a
/// low-count section, two decimals, rows in input order. Rows without a
/// section land in a trailing ungrouped block.
inline std::string district_table_markdown(
    const std::vector<DistrictResult>& rows) {
  std::string out = "| District | Accuracy | Macro F1 |\n|---|---|---|\n";
  auto emit = [&](const std::string& section, const char* title) {
    bool any = false;
    for (const auto& r : rows) {
      if (r.section != section) continue;
      if (!any && title) {
        out += std::string("| **") + title + "** | | |\n";
        any = true;
      }
      out += "| " + r.district + " | " + detail::fixed2(r.accuracy) + " | " +
             detail::fixed2(r.macro_f1) + " |\n";
    }
  };
  emit("high", "Highest number of case documents");
  emit("low", "Lowest number of case documents");
  emit("", nullptr);
  return out;
}

inline std::string district_table_csv(
    const std::vector<DistrictResult>& rows) {
  std::string out = "district,section,accuracy,macro_f1\n";
  for (const auto& r : rows) {
    out += io::csv_row({r.district, r.section, detail::fixed2(r.accuracy),
                        detail::fixed2(r.macro_f1)});
  }
  return out;
}

}  // namespace bailcnn
