// bailcnn: corpus ingestion, sanitization, CNN training and evaluation
// for Hindi bail-order outcome prediction, as one CLI.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bailcnn/bailcnn.hpp"

namespace fs = std::filesystem;
using namespace bailcnn;

namespace {

struct CorpusInput {
  std::vector<CaseRecord> records;
  std::vector<Reject> rejects;
  DistrictInventory inventory;
  bool per_district_files = false;
};

CorpusFormat parse_format(const std::string& name) {
  if (name == "jsonl") return CorpusFormat::kJsonl;
  if (name == "csv") return CorpusFormat::kCsv;
  throw DataError("unknown corpus format: " + name);
}

/// Reads either a directory of per-district files (<district>.jsonl or
/// .csv, district = file stem) or one combined file. Directory input
/// gives a file-size inventory; combined input falls back to the size of
/// each district's canonical serialization.
CorpusInput read_corpus(const fs::path& path, const std::string& format_name) {
  CorpusInput input;
  if (fs::is_directory(path)) {
    input.per_district_files = true;
    std::vector<std::pair<std::string, fs::path>> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (!entry.is_regular_file()) continue;
      const auto ext = entry.path().extension().string();
      if (ext == ".jsonl" || ext == ".csv") {
        files.emplace_back(entry.path().stem().string(), entry.path());
      }
    }
    if (files.empty()) {
      throw DataError("no .jsonl or .csv corpus files in " + path.string());
    }
    std::sort(files.begin(), files.end());
    for (const auto& [district, file] : files) {
      const auto format = file.extension() == ".csv" ? CorpusFormat::kCsv
                                                     : CorpusFormat::kJsonl;
      auto records = load_corpus(file, format, input.rejects);
      auto& stats = input.inventory.entries[district];
      stats.case_count += records.size();
      stats.byte_size += fs::file_size(file);
      std::move(records.begin(), records.end(),
                std::back_inserter(input.records));
    }
    return input;
  }

  input.records = load_corpus(path, parse_format(format_name), input.rejects);
  for (const auto& rec : input.records) {
    auto& stats = input.inventory.entries[rec.district];
    ++stats.case_count;
    stats.byte_size += to_json(rec).dump().size() + 1;
  }
  return input;
}

void ensure_out_dir(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + out.string());
}

ExperimentMode parse_mode(const std::string& name) {
  if (name == "per-district") return ExperimentMode::kPerDistrict;
  if (name == "pooled-high") return ExperimentMode::kPooledHigh;
  if (name == "pooled-low") return ExperimentMode::kPooledLow;
  if (name == "pooled-all") return ExperimentMode::kPooledAll;
  throw DataError("unknown mode: " + name +
                  " (want per-district, pooled-high, pooled-low, pooled-all)");
}

std::vector<std::string> split_csv_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  for (char c : value) {
    if (c == ',') {
      if (!item.empty()) out.push_back(item);
      item.clear();
    } else {
      item.push_back(c);
    }
  }
  if (!item.empty()) out.push_back(item);
  return out;
}

/// Table-1-style per-district counts for the sanitized corpus.
std::string counts_csv(const std::vector<CleanCase>& clean, Ratio ratio) {
  std::map<std::string, uint64_t> totals;
  for (const auto& c : clean) ++totals[c.district];
  std::string out = "district,total,train,test\n";
  uint64_t sum_total = 0, sum_train = 0;
  for (const auto& [district, total] : totals) {
    const uint64_t train = total * ratio.num / ratio.den;
    out += io::csv_row({district, std::to_string(total),
                        std::to_string(train), std::to_string(total - train)});
    sum_total += total;
    sum_train += train;
  }
  out += io::csv_row({"TOTAL", std::to_string(sum_total),
                      std::to_string(sum_train),
                      std::to_string(sum_total - sum_train)});
  return out;
}

struct TrainOptions {
  std::string corpus;
  std::string vocab;
  std::string out = "out";
  std::string format = "jsonl";
  std::string mode = "pooled-all";
  std::string districts;
  std::string selection_key = "case_count";
  size_t k_high = 10;
  size_t k_low = 10;
  TrainHyper hyper;
  bool stratified = false;
  bool pad_from_train_only = false;
};

void write_run_artifacts(const fs::path& dir, const RunResult& result) {
  io::write_file(dir / "report.json", run_result_json(result).dump(2) + "\n");
  io::write_file(dir / "history.csv", history_csv(result.history));
  io::write_file(dir / "split.csv", split_manifest_csv(result.split));
}

int cmd_train(const TrainOptions& opt) {
  ensure_out_dir(opt.out);
  std::cout << "seed: " << opt.hyper.seed << "\n";

  const CorpusInput input = read_corpus(opt.corpus, opt.format);
  const Vocabulary vocab = load_vocab(opt.vocab);

  ExperimentPlan plan;
  plan.mode = parse_mode(opt.mode);
  plan.districts = split_csv_list(opt.districts);
  plan.k_high = opt.k_high;
  plan.k_low = opt.k_low;
  plan.selection_key = opt.selection_key == "byte_size"
                           ? SelectionKey::kByteSize
                           : SelectionKey::kCaseCount;
  plan.hyper = opt.hyper;
  plan.stratified_split = opt.stratified;
  plan.pad_from_train_only = opt.pad_from_train_only;

  if (plan.mode != ExperimentMode::kPerDistrict) {
    RunResult result = run_experiment(plan, input.records, vocab,
                                      fs::path(opt.out) / "model.ckpt",
                                      &input.inventory);
    write_run_artifacts(opt.out, result);
    io::write_file(fs::path(opt.out) / "drops.jsonl", [&] {
      std::string text;
      for (const auto& [rule, count] : result.drops.by_rule) {
        text += nlohmann::json{{"rule", rule}, {"count", count}}.dump() + "\n";
      }
      return text;
    }());
    std::cout << "pad_len: " << result.pad_len << "\n"
              << "test accuracy: " << result.report.accuracy << "\n";
    return 0;
  }

  // Independent per-district runs. Sections for the table come from the
  // same selection the pooled modes use, when the corpus is big enough.
  std::vector<std::string> districts = plan.districts;
  if (districts.empty()) {
    for (const auto& [district, stats] : input.inventory.entries) {
      districts.push_back(district);
    }
  }
  std::set<std::string> high_set, low_set;
  if (input.inventory.entries.size() >= plan.k_high + plan.k_low) {
    auto [high, low] = select_districts(input.inventory, plan.k_high,
                                        plan.k_low, plan.selection_key);
    high_set.insert(high.begin(), high.end());
    low_set.insert(low.begin(), low.end());
  }

  std::vector<DistrictResult> rows;
  for (const auto& district : districts) {
    ExperimentPlan one = plan;
    one.districts = {district};
    const fs::path dir = fs::path(opt.out) / district;
    ensure_out_dir(dir);
    RunResult result = run_experiment(one, input.records, vocab,
                                      dir / "model.ckpt", &input.inventory);
    result.section = high_set.count(district)  ? "high"
                     : low_set.count(district) ? "low"
                                               : "";
    write_run_artifacts(dir, result);
    rows.push_back(district_result_of(result));
    std::cout << district << ": accuracy "
              << detail::fixed2(result.report.accuracy) << ", macro F1 "
              << detail::fixed2(result.report.macro_f1) << "\n";
  }
  io::write_file(fs::path(opt.out) / "district_table.md",
                 district_table_markdown(rows));
  io::write_file(fs::path(opt.out) / "district_table.csv",
                 district_table_csv(rows));
  return 0;
}

/// Test rows of a split manifest, encoded at the checkpoint's pad length.
EncodedDataset encoded_test_set(const std::vector<CleanCase>& clean,
                                const std::string& split_csv,
                                const Vocabulary& vocab,
                                const ModelConfig& config) {
  const auto rows = io::parse_csv(io::read_file(split_csv));
  if (rows.empty() || rows[0] != std::vector<std::string>{"case_id", "subset"}) {
    throw DataError("split manifest: want header case_id,subset");
  }
  std::set<std::string> test_ids;
  for (size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 2) throw DataError("split manifest: bad row");
    if (rows[i][1] == "test") test_ids.insert(rows[i][0]);
  }
  EncodeConfig encode_config;
  encode_config.max_len = config.max_len;
  EncodedDataset out;
  out.len = config.max_len;
  for (const auto& c : clean) {
    if (!test_ids.count(c.case_id)) continue;
    TokenSequence seq = encode(c.text, vocab, encode_config);
    out.ids.insert(out.ids.end(), seq.ids.begin(), seq.ids.end());
    out.labels.push_back(static_cast<uint8_t>(c.label));
    out.case_ids.push_back(c.case_id);
  }
  if (out.size() == 0) {
    throw DataError("split manifest: no test cases matched the clean file");
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bail-outcome prediction pipeline: ingestion, sanitization, "
               "WordPiece tokenization, CNN training and evaluation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from an INI/TOML config file");

  // ---- ingest ----
  std::string in_corpus, in_format = "jsonl", in_out = "out";
  auto* ingest = app.add_subcommand(
      "ingest", "Read a raw corpus, emit canonical JSONL plus inventory and "
                "label-distribution tables");
  ingest->add_option("--corpus", in_corpus,
                     "Corpus file or directory of per-district files")
      ->required();
  ingest->add_option("--format", in_format, "Input format: jsonl or csv")
      ->check(CLI::IsMember({"jsonl", "csv"}));
  ingest->add_option("--out", in_out, "Output directory");

  // ---- sanitize ----
  std::string sa_corpus, sa_format = "jsonl", sa_out = "out";
  uint64_t sa_seed = 42;
  bool sa_stratified = false;
  auto* sanitize = app.add_subcommand(
      "sanitize", "Apply the consistency sieves, binarize labels and write "
                  "the 80:20 split manifest");
  sanitize->add_option("--corpus", sa_corpus, "Corpus file or directory")
      ->required();
  sanitize->add_option("--format", sa_format, "Input format: jsonl or csv")
      ->check(CLI::IsMember({"jsonl", "csv"}));
  sanitize->add_option("--out", sa_out, "Output directory");
  sanitize->add_option("--seed", sa_seed, "Split shuffle seed");
  sanitize->add_flag("--stratified", sa_stratified,
                     "Stratify the split by label");

  // ---- train ----
  TrainOptions tr;
  auto* train_cmd = app.add_subcommand(
      "train", "Run one experiment: select districts, sanitize, split, "
               "train the CNN and evaluate on the held-out split");
  train_cmd->add_option("--corpus", tr.corpus, "Corpus file or directory")
      ->required();
  train_cmd->add_option("--vocab", tr.vocab, "WordPiece vocabulary file")
      ->required();
  train_cmd->add_option("--out", tr.out, "Output directory");
  train_cmd->add_option("--format", tr.format, "Input format: jsonl or csv")
      ->check(CLI::IsMember({"jsonl", "csv"}));
  train_cmd->add_option(
      "--mode", tr.mode,
      "per-district, pooled-high, pooled-low or pooled-all");
  train_cmd->add_option("--districts", tr.districts,
                        "Comma-separated district list (default: all)");
  train_cmd->add_option("--k-high", tr.k_high,
                        "High-count districts to select");
  train_cmd->add_option("--k-low", tr.k_low, "Low-count districts to select");
  train_cmd->add_option("--selection-key", tr.selection_key,
                        "District ranking key")
      ->check(CLI::IsMember({"case_count", "byte_size"}));
  train_cmd->add_option("--epochs", tr.hyper.epochs, "Training epochs");
  train_cmd->add_option("--batch-size", tr.hyper.batch_size, "Minibatch size");
  train_cmd->add_option("--lr", tr.hyper.lr, "Adam learning rate");
  train_cmd->add_option("--seed", tr.hyper.seed, "Run seed");
  train_cmd->add_option("--max-len-cap", tr.hyper.max_len_cap,
                        "Upper bound on the pad length");
  train_cmd->add_option("--val-fraction", tr.hyper.val_fraction,
                        "Holdout fraction for validation (default: validate "
                        "on the training set)");
  train_cmd->add_flag("--class-weights", tr.hyper.class_weights,
                      "Weight the loss by inverse class frequency");
  train_cmd->add_option("--patience", tr.hyper.patience,
                        "Early-stopping patience in epochs (0 = off)");
  train_cmd->add_flag("--stratified", tr.stratified,
                      "Stratify the split by label");
  train_cmd->add_flag("--pad-from-train-only", tr.pad_from_train_only,
                      "Compute the pad length from train documents only");

  // ---- evaluate ----
  std::string ev_ckpt, ev_clean, ev_split, ev_vocab, ev_out = "out";
  auto* evaluate_cmd = app.add_subcommand(
      "evaluate", "Score a checkpoint on the test rows of a split manifest");
  evaluate_cmd->add_option("--checkpoint", ev_ckpt, "Checkpoint file")
      ->required();
  evaluate_cmd->add_option("--clean", ev_clean, "Sanitized clean.jsonl")
      ->required();
  evaluate_cmd->add_option("--split", ev_split, "split.csv manifest")
      ->required();
  evaluate_cmd->add_option("--vocab", ev_vocab, "WordPiece vocabulary file")
      ->required();
  evaluate_cmd->add_option("--out", ev_out, "Output directory");

  // ---- predict ----
  std::string pr_ckpt, pr_vocab, pr_text, pr_input;
  auto* predict_cmd = app.add_subcommand(
      "predict", "Probability and label for one document");
  predict_cmd->add_option("--checkpoint", pr_ckpt, "Checkpoint file")
      ->required();
  predict_cmd->add_option("--vocab", pr_vocab, "WordPiece vocabulary file")
      ->required();
  predict_cmd->add_option("--text", pr_text, "Document text");
  predict_cmd->add_option("--input", pr_input, "Read the document from a file");

  // ---- report ----
  std::vector<std::string> rp_files;
  std::string rp_out = "out";
  auto* report_cmd = app.add_subcommand(
      "report", "Combine run reports into the district table");
  report_cmd->add_option("reports", rp_files, "report.json files")
      ->required();
  report_cmd->add_option("--out", rp_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*ingest) {
      ensure_out_dir(in_out);
      const CorpusInput input = read_corpus(in_corpus, in_format);
      io::write_file(fs::path(in_out) / "cases.jsonl",
                     to_jsonl(input.records));
      io::write_file(fs::path(in_out) / "rejects.jsonl",
                     rejects_to_jsonl(input.rejects));
      io::write_file(fs::path(in_out) / "inventory.csv",
                     inventory_csv(input.inventory));
      io::write_file(fs::path(in_out) / "label_dist.csv",
                     label_distribution_csv(label_distribution(input.records)));
      std::cout << "records: " << input.records.size()
                << ", rejects: " << input.rejects.size() << "\n";
    } else if (*sanitize) {
      ensure_out_dir(sa_out);
      std::cout << "seed: " << sa_seed << "\n";
      const CorpusInput input = read_corpus(sa_corpus, sa_format);
      auto [clean, log] = sanitize_corpus(input.records);
      io::write_file(fs::path(sa_out) / "clean.jsonl", clean_to_jsonl(clean));
      io::write_file(fs::path(sa_out) / "drops.jsonl",
                     drop_log_to_jsonl(log));
      io::write_file(fs::path(sa_out) / "counts.csv",
                     counts_csv(clean, Ratio{}));
      if (!clean.empty()) {
        std::vector<std::string> districts;
        for (const auto& [d, s] : input.inventory.entries) {
          districts.push_back(d);
        }
        const SplitDataset sp = split_by_district(clean, districts, Ratio{},
                                                  sa_seed, sa_stratified);
        io::write_file(fs::path(sa_out) / "split.csv",
                       split_manifest_csv(sp));
      }
      std::cout << "clean: " << clean.size()
                << ", dropped: " << log.entries.size() << "\n";
    } else if (*train_cmd) {
      return cmd_train(tr);
    } else if (*evaluate_cmd) {
      ensure_out_dir(ev_out);
      auto [params, config] = load_checkpoint(ev_ckpt);
      const Vocabulary vocab = load_vocab(ev_vocab);
      const auto clean = clean_from_jsonl(io::read_file(ev_clean));
      const EncodedDataset test =
          encoded_test_set(clean, ev_split, vocab, config);
      const ConfusionMatrix2 cm = test_confusion(config, params, test);
      const EvalReport report = compute_metrics(cm);
      nlohmann::json out{{"confusion", to_json(cm)},
                         {"metrics", to_json(report)},
                         {"test_size", test.size()}};
      io::write_file(fs::path(ev_out) / "report.json", out.dump(2) + "\n");
      std::cout << report_markdown(cm, report);
    } else if (*predict_cmd) {
      if (pr_text.empty() == pr_input.empty()) {
        std::cerr << "predict: provide exactly one of --text or --input\n";
        return 1;
      }
      auto [params, config] = load_checkpoint(pr_ckpt);
      const Vocabulary vocab = load_vocab(pr_vocab);
      const std::string text =
          pr_text.empty() ? io::read_file(pr_input) : pr_text;
      EncodeConfig encode_config;
      encode_config.max_len = config.max_len;
      const TokenSequence seq = encode(text, vocab, encode_config);
      ForwardCache<float> cache;
      const auto& probs = model_forward(config, params, seq.ids.data(), 1,
                                        Mode::kEval, nullptr, cache);
      const double p = probs[0];
      nlohmann::json out{{"probability_dismissed", p},
                         {"label", p >= 0.5 ? "dismissed" : "granted"},
                         {"real_length", seq.real_length},
                         {"truncated", seq.truncated}};
      std::cout << out.dump() << "\n";
    } else if (*report_cmd) {
      ensure_out_dir(rp_out);
      std::vector<DistrictResult> rows;
      for (const auto& file : rp_files) {
        const auto j = nlohmann::json::parse(io::read_file(file));
        DistrictResult row;
        const auto& districts = j.at("plan").at("districts");
        row.district = districts.size() == 1
                           ? districts[0].get<std::string>()
                           : j.at("plan").at("mode").get<std::string>();
        row.accuracy = j.at("metrics").at("accuracy").get<double>();
        row.macro_f1 = j.at("metrics").at("macro_f1").get<double>();
        row.section = j.value("section", "");
        rows.push_back(std::move(row));
      }
      const std::string table = district_table_markdown(rows);
      io::write_file(fs::path(rp_out) / "district_table.md", table);
      io::write_file(fs::path(rp_out) / "district_table.csv",
                     district_table_csv(rows));
      std::cout << table;
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
