#pragma once

// Text utilities shared by every module: error types, UTF-8 <-> code point
// conversion, term normalization and the TSV escape convention.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

namespace disner {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input that could not be parsed. `line` is 1-based, 0 if unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Well-formed input that violates a contract. Carries every violation found.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> issues)
      : Error(join(issues)), issues_(std::move(issues)) {}
  explicit ValidationError(const std::string& issue) : ValidationError(std::vector<std::string>{issue}) {}
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string out;
    for (const auto& i : issues) {
      if (!out.empty()) out += "; ";
      out += i;
    }
    return out;
  }
  std::vector<std::string> issues_;
};

// ---------------------------------------------------------------------------
// UTF-8

inline std::u32string utf8_to_u32(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  int32_t i = 0;
  const auto n = static_cast<int32_t>(s.size());
  const auto* p = reinterpret_cast<const uint8_t*>(s.data());
  while (i < n) {
    UChar32 c;
    U8_NEXT(p, i, n, c);
    out.push_back(c < 0 ? U'\uFFFD' : static_cast<char32_t>(c));
  }
  return out;
}

inline std::string u32_to_utf8(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t c : s) {
    uint8_t buf[4];
    int32_t len = 0;
    U8_APPEND_UNSAFE(buf, len, static_cast<UChar32>(c));
    out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(len));
  }
  return out;
}

// Length in Unicode scalar values.
inline std::size_t char_length(std::string_view s) { return utf8_to_u32(s).size(); }

// Substring [begin, end) in scalar-value offsets.
inline std::string char_slice(std::string_view s, std::size_t begin, std::size_t end) {
  auto u = utf8_to_u32(s);
  if (begin > end || end > u.size()) throw Error("character slice out of range");
  return u32_to_utf8(std::u32string_view(u).substr(begin, end - begin));
}

// ---------------------------------------------------------------------------
// Normalization

namespace detail {

inline icu::UnicodeString to_icu(std::u32string_view s) {
  return icu::UnicodeString::fromUTF32(reinterpret_cast<const UChar32*>(s.data()),
                                       static_cast<int32_t>(s.size()));
}

inline std::u32string from_icu(const icu::UnicodeString& s) {
  std::u32string out;
  out.reserve(static_cast<std::size_t>(s.length()));
  for (int32_t i = 0; i < s.length();) {
    UChar32 c = s.char32At(i);
    out.push_back(static_cast<char32_t>(c));
    i += U16_LENGTH(c);
  }
  return out;
}

inline const icu::Normalizer2& nfc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || n == nullptr) throw Error("ICU NFC normalizer unavailable");
  return *n;
}

// NFC, default case folding, NFC again (folding may leave decomposed forms).
inline std::u32string fold_nfc(std::u32string_view s) {
  UErrorCode status = U_ZERO_ERROR;
  const auto& n = nfc();
  icu::UnicodeString u = n.normalize(to_icu(s), status);
  u.foldCase(U_FOLD_CASE_DEFAULT);
  u = n.normalize(u, status);
  if (U_FAILURE(status)) throw Error("ICU normalization failed");
  return from_icu(u);
}

}  // namespace detail

inline bool is_space(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)); }

inline std::u32string normalize_u32(std::u32string_view term) {
  std::u32string folded = detail::fold_nfc(term);
  std::u32string out;
  out.reserve(folded.size());
  bool pending_space = false;
  for (char32_t c : folded) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(U' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

// NFC + case folding + whitespace trim/collapse. Idempotent.
inline std::string normalize(std::string_view term) { return u32_to_utf8(normalize_u32(utf8_to_u32(term))); }

// Normalized form of a single word together with, for each output character,
// the [begin, end) range of input characters it came from. Input is split
// into clusters (starter + combining marks); each cluster is normalized on
// its own so every output character traces back to exactly one cluster.
struct MappedText {
  std::u32string text;
  std::vector<std::pair<std::size_t, std::size_t>> source;
  // true when output position i starts a cluster
  std::vector<bool> cluster_start;
};

inline MappedText normalize_mapped(std::u32string_view word) {
  MappedText out;
  std::size_t i = 0;
  while (i < word.size()) {
    std::size_t j = i + 1;
    while (j < word.size() && u_getCombiningClass(static_cast<UChar32>(word[j])) != 0) ++j;
    std::u32string piece = detail::fold_nfc(word.substr(i, j - i));
    for (std::size_t k = 0; k < piece.size(); ++k) {
      out.text.push_back(piece[k]);
      out.source.emplace_back(i, j);
      out.cluster_start.push_back(k == 0);
    }
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------
// TSV escape convention: `\n`, `\t` and `\\` are written as two-character
// escapes inside a field.

inline std::string escape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\\': out += "\\\\"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string unescape_field(std::string_view s, std::size_t line = 0) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out.push_back(s[i]);
      continue;
    }
    if (i + 1 == s.size()) throw ParseError("dangling backslash escape", line);
    switch (s[++i]) {
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case '\\': out.push_back('\\'); break;
      default: throw ParseError(std::string("unknown escape \\") + s[i], line);
    }
  }
  return out;
}

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t start = 0;
  for (;;) {
    auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      cols.push_back(line.substr(start));
      return cols;
    }
    cols.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

// Lines of a `\n`-terminated text; a final terminator does not yield an
// extra empty line.
inline std::vector<std::string_view> split_lines(std::string_view content) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < content.size()) {
    auto pos = content.find('\n', start);
    if (pos == std::string_view::npos) {
      lines.push_back(content.substr(start));
      break;
    }
    lines.push_back(content.substr(start, pos - start));
    start = pos + 1;
  }
  return lines;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write file: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error("write failed: " + path);
}

inline long long parse_int(std::string_view s, std::size_t line, std::string_view what) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError(std::string(what) + ": not an integer: '" + std::string(s) + "'", line);
  return v;
}

}  // namespace disner
