// Copyright 2026 The smab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// UTF-8 helpers shared by the corpus tokenizer, the synthetic oracles and the
// attack utilities. Character classes come from glibc's C.UTF-8 locale.

#pragma once

#include <charconv>
#include <cmath>
#include <clocale>
#include <cstddef>
#include <cstdint>
#include <cwctype>
#include <locale.h>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>
#include <wctype.h>

namespace smab::text {

struct Span {
  std::size_t begin = 0;  // byte offset, inclusive
  std::size_t end = 0;    // byte offset, exclusive

  friend bool operator==(const Span&, const Span&) = default;
};

struct RawToken {
  std::string text;  // surface form, unmodified
  Span span;
};

namespace detail {

inline locale_t utf8_locale() {
  static const locale_t loc = [] {
    locale_t l = newlocale(LC_CTYPE_MASK, "C.UTF-8", static_cast<locale_t>(nullptr));
    if (l == static_cast<locale_t>(nullptr)) {
      l = newlocale(LC_CTYPE_MASK, "C.utf8", static_cast<locale_t>(nullptr));
    }
    return l;
  }();
  return loc;
}

}  // namespace detail

/// Decodes one code point starting at `pos`; malformed bytes decode as U+FFFD
/// with length 1.
inline char32_t decode_utf8(std::string_view s, std::size_t pos, std::size_t& len) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  auto cont = [&](std::size_t i) -> int {
    if (pos + i >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[pos + i]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    len = 1;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0) {
    const int c1 = cont(1);
    if (c1 >= 0) {
      len = 2;
      return static_cast<char32_t>(((b0 & 0x1F) << 6) | c1);
    }
  } else if ((b0 & 0xF0) == 0xE0) {
    const int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) {
      len = 3;
      return static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2);
    }
  } else if ((b0 & 0xF8) == 0xF0) {
    const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
      len = 4;
      return static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3);
    }
  }
  len = 1;
  return U'�';
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

inline bool is_space(char32_t cp) {
  if (cp < 0x80) return cp == ' ' || (cp >= '\t' && cp <= '\r');
  return iswspace_l(static_cast<wint_t>(cp), detail::utf8_locale());
}

/// Whitespace, punctuation, symbols and control characters separate words.
inline bool is_separator(char32_t cp) {
  if (cp < 0x80) {
    const auto c = static_cast<unsigned char>(cp);
    return !((c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'));
  }
  const auto wc = static_cast<wint_t>(cp);
  const locale_t loc = detail::utf8_locale();
  return iswspace_l(wc, loc) || iswpunct_l(wc, loc) || iswcntrl_l(wc, loc) || cp == U'�';
}

inline std::string to_lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  const locale_t loc = detail::utf8_locale();
  for (std::size_t i = 0; i < s.size();) {
    std::size_t len = 0;
    const char32_t cp = decode_utf8(s, i, len);
    if (cp < 0x80) {
      out += static_cast<char>(cp >= 'A' && cp <= 'Z' ? cp + ('a' - 'A') : cp);
    } else if (cp == U'�') {
      out.append(s.substr(i, len));
    } else {
      append_utf8(out, static_cast<char32_t>(towlower_l(static_cast<wint_t>(cp), loc)));
    }
    i += len;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

/// Splits `s` into maximal runs of non-whitespace bytes.
inline std::vector<RawToken> split_whitespace(std::string_view s) {
  std::vector<RawToken> out;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t len = 0;
    while (i < s.size() && is_space(decode_utf8(s, i, len))) i += len;
    if (i >= s.size()) break;
    const std::size_t start = i;
    while (i < s.size() && !is_space(decode_utf8(s, i, len))) i += len;
    out.push_back({std::string(s.substr(start, i - start)), {start, i}});
  }
  return out;
}

inline bool starts_with_icase(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    char c = s[i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + ('a' - 'A'));
    if (c != prefix[i]) return false;
  }
  return true;
}

inline bool looks_like_url(std::string_view chunk) {
  return starts_with_icase(chunk, "http://") || starts_with_icase(chunk, "https://") ||
         starts_with_icase(chunk, "www.");
}

/// Word tokenizer: whitespace and punctuation split, punctuation dropped.
/// When `strip_urls` is set, whitespace-delimited chunks that look like URLs
/// are skipped entirely. Spans index into `s`.
inline std::vector<RawToken> tokenize(std::string_view s, bool strip_urls = false) {
  std::vector<RawToken> out;
  auto emit_words = [&](std::size_t from, std::size_t to) {
    std::size_t i = from;
    while (i < to) {
      std::size_t len = 0;
      while (i < to && is_separator(decode_utf8(s, i, len))) i += len;
      if (i >= to) break;
      const std::size_t start = i;
      while (i < to && !is_separator(decode_utf8(s, i, len))) i += len;
      out.push_back({std::string(s.substr(start, i - start)), {start, i}});
    }
  };
  if (!strip_urls) {
    emit_words(0, s.size());
    return out;
  }
  for (const RawToken& chunk : split_whitespace(s)) {
    if (looks_like_url(chunk.text)) continue;
    emit_words(chunk.span.begin, chunk.span.end);
  }
  return out;
}

/// Replaces the bytes covered by `span` with `replacement`.
inline std::string splice(std::string_view s, Span span, std::string_view replacement) {
  std::string out;
  out.reserve(s.size() + replacement.size());
  out.append(s.substr(0, span.begin));
  out.append(replacement);
  out.append(s.substr(span.end));
  return out;
}

inline std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return 0;
  std::size_t n = 0;
  for (std::size_t pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

/// Shortest decimal representation that round-trips to the same double;
/// integral values keep a trailing ".0".
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string out(buf, res.ptr);
  if (std::isfinite(v) && out.find_first_of(".e") == std::string::npos) out += ".0";
  return out;
}

}  // namespace smab::text
