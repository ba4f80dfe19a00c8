#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bailcnn/errors.hpp"
#include "bailcnn/io.hpp"
#include "bailcnn/unicode.hpp"

namespace bailcnn {

inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kContinuationPrefix = "##";

/// WordPiece vocabulary: one token per line in the file, id = line index.
/// [PAD] must sit on line 0 and [UNK] must be present somewhere.
struct Vocabulary {
  std::unordered_map<std::string, int32_t> token_to_id;
  int32_t pad_id = 0;
  int32_t unk_id = -1;

  size_t size() const { return token_to_id.size(); }

  int32_t id_of(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? -1 : it->second;
  }
};

struct EncodeConfig {
  size_t max_len = 0;
  bool lowercase = true;
  // Accent stripping corrupts Devanagari dependent vowel signs, so it is
  // off by default even for an uncased vocabulary.
  bool strip_accents = false;
  size_t max_word_chars = 100;
};

/// Fixed-length id row. Positions >= real_length hold the pad id.
struct TokenSequence {
  std::vector<int32_t> ids;
  size_t real_length = 0;
  bool truncated = false;
};

inline Vocabulary load_vocab(const std::filesystem::path& path) {
  const std::string content = io::read_file(path);
  auto lines = io::split_lines(content);
  // One trailing empty line is the final newline, not an empty token.
  if (!lines.empty() && lines.back().empty()) lines.pop_back();

  Vocabulary vocab;
  vocab.token_to_id.reserve(lines.size());
  for (size_t i = 0; i < lines.size(); ++i) {
    const std::string& token = lines[i];
    if (token.empty()) {
      throw DataError("vocab: empty token on line " + std::to_string(i + 1) +
                      " of " + path.string());
    }
    auto [it, inserted] = vocab.token_to_id.emplace(token,
                                                    static_cast<int32_t>(i));
    if (!inserted) {
      throw DataError("vocab: duplicate token '" + token + "' on lines " +
                      std::to_string(it->second + 1) + " and " +
                      std::to_string(i + 1) + " of " + path.string());
    }
  }
  auto unk = vocab.token_to_id.find(std::string(kUnkToken));
  if (unk == vocab.token_to_id.end()) {
    throw DataError("vocab: missing [UNK] token in " + path.string());
  }
  vocab.unk_id = unk->second;
  auto pad = vocab.token_to_id.find(std::string(kPadToken));
  if (pad == vocab.token_to_id.end() || pad->second != 0) {
    throw DataError("vocab: [PAD] must be the first line of " + path.string());
  }
  vocab.pad_id = 0;
  return vocab;
}

/// Pre-split before WordPiece: NFC normalize, drop control characters,
/// optionally lowercase and strip accents, then cut on Unicode whitespace
/// with punctuation emitted as single-character words.
inline std::vector<std::string> basic_tokenize(std::string_view text,
                                               const EncodeConfig& config) {
  std::vector<uint32_t> cps = unicode::nfc(unicode::decode_utf8(text));

  std::vector<uint32_t> cleaned;
  cleaned.reserve(cps.size());
  for (uint32_t cp : cps) {
    if (cp == 0 || cp == unicode::kReplacement || unicode::is_control(cp)) {
      continue;
    }
    if (config.lowercase) {
      unicode::append_lowercase(cleaned, cp);
    } else {
      cleaned.push_back(cp);
    }
  }
  if (config.strip_accents) {
    std::vector<uint32_t> stripped;
    stripped.reserve(cleaned.size());
    for (uint32_t cp : unicode::nfd(cleaned)) {
      if (!unicode::is_nonspacing_mark(cp)) stripped.push_back(cp);
    }
    cleaned = std::move(stripped);
  }

  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  };
  for (uint32_t cp : cleaned) {
    if (unicode::is_whitespace(cp)) {
      flush();
    } else if (unicode::is_punctuation(cp)) {
      flush();
      std::string punct;
      unicode::append_utf8(punct, cp);
      words.push_back(std::move(punct));
    } else {
      unicode::append_utf8(current, cp);
    }
  }
  flush();
  return words;
}

/// Greedy longest-match-first segmentation. Pieces after the first carry
/// the ## prefix; any unmatched position (or an over-long word) collapses
/// the whole word to [UNK].
inline std::vector<std::string> wordpiece(const std::string& word,
                                          const Vocabulary& vocab,
                                          const EncodeConfig& config) {
  const std::vector<uint32_t> cps = unicode::decode_utf8(word);
  if (cps.empty() || cps.size() > config.max_word_chars) {
    return {std::string(kUnkToken)};
  }
  std::vector<std::string> pieces;
  size_t start = 0;
  while (start < cps.size()) {
    size_t end = cps.size();
    std::string match;
    while (start < end) {
      std::string candidate;
      if (start > 0) candidate = kContinuationPrefix;
      for (size_t i = start; i < end; ++i) {
        unicode::append_utf8(candidate, cps[i]);
      }
      if (vocab.token_to_id.count(candidate)) {
        match = std::move(candidate);
        break;
      }
      --end;
    }
    if (match.empty()) return {std::string(kUnkToken)};
    pieces.push_back(std::move(match));
    start = end;
  }
  return pieces;
}

/// Full encode: basic_tokenize -> wordpiece -> id lookup -> truncate to
/// max_len -> right-pad with the pad id. Empty text yields an all-pad row
/// with real_length 0; the sanitizer's empty-text rule keeps those out of
/// training data.
inline TokenSequence encode(std::string_view text, const Vocabulary& vocab,
                            const EncodeConfig& config) {
  if (config.max_len < 5) {
    throw ConfigError("encode: max_len must be at least the kernel size (5)");
  }
  TokenSequence seq;
  seq.ids.reserve(config.max_len);
  for (const auto& word : basic_tokenize(text, config)) {
    if (seq.ids.size() >= config.max_len) {
      seq.truncated = true;
      break;
    }
    for (const auto& piece : wordpiece(word, vocab, config)) {
      if (seq.ids.size() >= config.max_len) {
        seq.truncated = true;
        break;
      }
      seq.ids.push_back(vocab.id_of(piece));
    }
  }
  seq.real_length = seq.ids.size();
  seq.ids.resize(config.max_len, vocab.pad_id);
  return seq;
}

/// Count of real (pre-padding) tokens, used for the corpus pad-length rule.
inline size_t token_count(std::string_view text, const Vocabulary& vocab,
                          const EncodeConfig& config) {
  size_t count = 0;
  for (const auto& word : basic_tokenize(text, config)) {
    count += wordpiece(word, vocab, config).size();
  }
  return count;
}

// ---- encoded-corpus cache ----
// Binary layout, little-endian: u32 doc count, u32 max_len, then
// count*max_len row-major int32 ids.

inline std::string encoded_cache_bytes(const std::vector<TokenSequence>& docs,
                                       size_t max_len) {
  std::string out;
  out.reserve(8 + docs.size() * max_len * 4);
  io::put_u32le(out, static_cast<uint32_t>(docs.size()));
  io::put_u32le(out, static_cast<uint32_t>(max_len));
  for (const auto& doc : docs) {
    if (doc.ids.size() != max_len) {
      throw DataError("encoded cache: row length mismatch");
    }
    for (int32_t id : doc.ids) {
      io::put_u32le(out, static_cast<uint32_t>(id));
    }
  }
  return out;
}

inline std::vector<TokenSequence> encoded_cache_parse(std::string_view bytes) {
  if (bytes.size() < 8) throw DataError("encoded cache: truncated header");
  const uint32_t count = io::get_u32le(bytes, 0);
  const uint32_t max_len = io::get_u32le(bytes, 4);
  const size_t want = 8 + static_cast<size_t>(count) * max_len * 4;
  if (bytes.size() != want) {
    throw DataError("encoded cache: size mismatch (want " +
                    std::to_string(want) + " bytes, have " +
                    std::to_string(bytes.size()) + ")");
  }
  std::vector<TokenSequence> docs(count);
  size_t offset = 8;
  for (auto& doc : docs) {
    doc.ids.resize(max_len);
    for (uint32_t i = 0; i < max_len; ++i, offset += 4) {
      doc.ids[i] = static_cast<int32_t>(io::get_u32le(bytes, offset));
    }
    doc.real_length = max_len;
  }
  return docs;
}

}  // namespace bailcnn
