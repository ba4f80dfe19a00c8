#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bailcnn/unicode_data.hpp"

namespace bailcnn::unicode {

inline constexpr uint32_t kReplacement = 0xFFFD;

/// Decodes UTF-8 into codepoints. Invalid byte sequences become U+FFFD,
/// one replacement per rejected byte, so decoding never throws.
inline std::vector<uint32_t> decode_utf8(std::string_view text) {
  std::vector<uint32_t> out;
  out.reserve(text.size());
  size_t i = 0;
  const auto* bytes = reinterpret_cast<const unsigned char*>(text.data());
  while (i < text.size()) {
    unsigned char b0 = bytes[i];
    uint32_t cp = 0;
    size_t len = 0;
    if (b0 < 0x80) {
      cp = b0;
      len = 1;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      len = 2;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      len = 3;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      len = 4;
    } else {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    if (i + len > text.size()) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    bool ok = true;
    for (size_t k = 1; k < len; ++k) {
      unsigned char bk = bytes[i + k];
      if ((bk & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (bk & 0x3F);
    }
    // Reject overlong forms, surrogates and out-of-range values.
    static constexpr uint32_t kMinForLen[5] = {0, 0, 0x80, 0x800, 0x10000};
    if (!ok || cp < kMinForLen[len] || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF)) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline void append_utf8(std::string& out, uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline std::string encode_utf8(const std::vector<uint32_t>& cps) {
  std::string out;
  out.reserve(cps.size());
  for (uint32_t cp : cps) append_utf8(out, cp);
  return out;
}

namespace detail {

inline bool in_ranges(const unicode_data::CpRange* ranges, size_t count,
                      uint32_t cp) {
  const auto* end = ranges + count;
  auto it = std::upper_bound(ranges, end, cp,
                             [](uint32_t v, const unicode_data::CpRange& r) {
                               return v < r.lo;
                             });
  return it != ranges && cp <= (it - 1)->hi;
}

}  // namespace detail

inline bool is_whitespace(uint32_t cp) {
  const auto* begin = unicode_data::kWhitespace;
  const auto* end = begin + unicode_data::kWhitespace_count;
  return std::binary_search(begin, end, cp);
}

/// Punctuation per the reference tokenizer: Unicode category P plus every
/// ASCII character that is neither a letter, a digit nor whitespace (so $,
/// =, +, ~ split words too).
inline bool is_punctuation(uint32_t cp) {
  if ((cp >= 33 && cp <= 47) || (cp >= 58 && cp <= 64) ||
      (cp >= 91 && cp <= 96) || (cp >= 123 && cp <= 126)) {
    return true;
  }
  return detail::in_ranges(unicode_data::kPunctuation,
                           unicode_data::kPunctuation_count, cp);
}

/// Cc/Cf minus tab, LF and CR (those count as whitespace).
inline bool is_control(uint32_t cp) {
  return detail::in_ranges(unicode_data::kControl,
                           unicode_data::kControl_count, cp);
}

/// Nonspacing combining marks (category Mn), dropped by accent stripping.
inline bool is_nonspacing_mark(uint32_t cp) {
  return detail::in_ranges(unicode_data::kMarkNonspacing,
                           unicode_data::kMarkNonspacing_count, cp);
}

inline uint8_t combining_class(uint32_t cp) {
  const auto* begin = unicode_data::kCombiningClass;
  const auto* end = begin + unicode_data::kCombiningClass_count;
  auto it = std::upper_bound(begin, end, cp,
                             [](uint32_t v, const unicode_data::CccRange& r) {
                               return v < r.lo;
                             });
  if (it != begin && cp <= (it - 1)->hi) return (it - 1)->ccc;
  return 0;
}

/// Appends the simple lowercase expansion of cp (1..3 codepoints).
inline void append_lowercase(std::vector<uint32_t>& out, uint32_t cp) {
  const auto* begin = unicode_data::kLowercase;
  const auto* end = begin + unicode_data::kLowercase_count;
  auto it = std::lower_bound(begin, end, cp,
                             [](const unicode_data::Lower& l, uint32_t v) {
                               return l.cp < v;
                             });
  if (it != end && it->cp == cp) {
    out.push_back(it->l0);
    if (it->l1) out.push_back(it->l1);
    if (it->l2) out.push_back(it->l2);
  } else {
    out.push_back(cp);
  }
}

namespace detail {

// Hangul syllable decomposition/composition is algorithmic (UAX #15 §3.12).
inline constexpr uint32_t kHangulSBase = 0xAC00;
inline constexpr uint32_t kHangulLBase = 0x1100;
inline constexpr uint32_t kHangulVBase = 0x1161;
inline constexpr uint32_t kHangulTBase = 0x11A7;
inline constexpr uint32_t kHangulLCount = 19;
inline constexpr uint32_t kHangulVCount = 21;
inline constexpr uint32_t kHangulTCount = 28;
inline constexpr uint32_t kHangulNCount = kHangulVCount * kHangulTCount;
inline constexpr uint32_t kHangulSCount = kHangulLCount * kHangulNCount;

inline void decompose_cp(uint32_t cp, std::vector<uint32_t>& out) {
  if (cp >= kHangulSBase && cp < kHangulSBase + kHangulSCount) {
    uint32_t index = cp - kHangulSBase;
    out.push_back(kHangulLBase + index / kHangulNCount);
    out.push_back(kHangulVBase + (index % kHangulNCount) / kHangulTCount);
    uint32_t t = index % kHangulTCount;
    if (t != 0) out.push_back(kHangulTBase + t);
    return;
  }
  const auto* begin = unicode_data::kDecompositions;
  const auto* end = begin + unicode_data::kDecompositions_count;
  auto it = std::lower_bound(begin, end, cp,
                             [](const unicode_data::Decomp& d, uint32_t v) {
                               return d.cp < v;
                             });
  if (it != end && it->cp == cp) {
    decompose_cp(it->first, out);
    if (it->second) decompose_cp(it->second, out);
    return;
  }
  out.push_back(cp);
}

inline uint32_t compose_pair(uint32_t a, uint32_t b) {
  if (a >= kHangulLBase && a < kHangulLBase + kHangulLCount &&
      b >= kHangulVBase && b < kHangulVBase + kHangulVCount) {
    return kHangulSBase +
           ((a - kHangulLBase) * kHangulVCount + (b - kHangulVBase)) *
               kHangulTCount;
  }
  if (a >= kHangulSBase && a < kHangulSBase + kHangulSCount &&
      (a - kHangulSBase) % kHangulTCount == 0 && b > kHangulTBase &&
      b < kHangulTBase + kHangulTCount) {
    return a + (b - kHangulTBase);
  }
  const auto* begin = unicode_data::kCompositions;
  const auto* end = begin + unicode_data::kCompositions_count;
  auto it = std::lower_bound(
      begin, end, std::make_pair(a, b),
      [](const unicode_data::Compose& c, const std::pair<uint32_t, uint32_t>& v) {
        return c.first != v.first ? c.first < v.first : c.second < v.second;
      });
  if (it != end && it->first == a && it->second == b) return it->composed;
  return 0;
}

}  // namespace detail

/// Canonical decomposition plus canonical reordering (NFD).
inline std::vector<uint32_t> nfd(const std::vector<uint32_t>& cps) {
  std::vector<uint32_t> out;
  out.reserve(cps.size());
  for (uint32_t cp : cps) detail::decompose_cp(cp, out);
  // Canonical ordering: bubble adjacent marks with decreasing nonzero ccc.
  for (size_t i = 1; i < out.size(); ++i) {
    uint8_t ccc = combining_class(out[i]);
    if (ccc == 0) continue;
    size_t j = i;
    while (j > 0) {
      uint8_t prev = combining_class(out[j - 1]);
      if (prev == 0 || prev <= ccc) break;
      std::swap(out[j - 1], out[j]);
      --j;
    }
  }
  return out;
}

/// Canonical composition (NFC) per UAX #15: decompose, reorder, then
/// recombine starters with unblocked marks. Composition exclusions are
/// baked into the generated pair table.
inline std::vector<uint32_t> nfc(const std::vector<uint32_t>& cps) {
  std::vector<uint32_t> buf = nfd(cps);
  if (buf.empty()) return buf;
  std::vector<uint32_t> out;
  out.reserve(buf.size());
  ptrdiff_t last_starter = -1;
  uint8_t last_ccc = 0;
  for (uint32_t cp : buf) {
    uint8_t ccc = combining_class(cp);
    if (last_starter >= 0) {
      bool blocked = (last_ccc != 0 && last_ccc >= ccc);
      if (!blocked) {
        uint32_t composed = detail::compose_pair(out[last_starter], cp);
        if (composed != 0) {
          out[last_starter] = composed;
          continue;
        }
      }
    }
    if (ccc == 0) {
      last_starter = static_cast<ptrdiff_t>(out.size());
      last_ccc = 0;
    } else {
      last_ccc = ccc;
    }
    out.push_back(cp);
  }
  return out;
}

inline std::string nfc_utf8(std::string_view text) {
  return encode_utf8(nfc(decode_utf8(text)));
}

}  // namespace bailcnn::unicode
