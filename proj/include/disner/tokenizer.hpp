#pragma once

// Offset-preserving tweet tokenizer. Hashtag and username bodies are split
// first on camel case, underscores and letter/digit transitions, then on
// gazetteer matches (longest substring, list priority order).

#include <string>
#include <string_view>
#include <vector>

#include <unicode/uchar.h>

#include "disner/corpus.hpp"
#include "disner/gazetteer.hpp"
#include "disner/text.hpp"

namespace disner {

enum class TokenKind { word, number, punct, hashtag_sigil, mention_sigil, url, composite_piece };

inline std::string_view to_string(TokenKind k) {
  switch (k) {
    case TokenKind::word: return "word";
    case TokenKind::number: return "number";
    case TokenKind::punct: return "punct";
    case TokenKind::hashtag_sigil: return "hashtag_sigil";
    case TokenKind::mention_sigil: return "mention_sigil";
    case TokenKind::url: return "url";
    case TokenKind::composite_piece: return "composite_piece";
  }
  return "?";
}

struct Token {
  std::string text;  // UTF-8, equals the tweet slice [begin, end)
  std::size_t begin = 0;
  std::size_t end = 0;
  TokenKind kind = TokenKind::word;

  bool operator==(const Token&) const = default;
};

struct TokenSequence {
  std::string tweet_id;
  std::vector<Token> tokens;

  std::size_t size() const { return tokens.size(); }
  bool operator==(const TokenSequence&) const = default;
};

namespace detail {

inline bool is_mark(char32_t c) { return (U_GET_GC_MASK(static_cast<UChar32>(c)) & U_GC_M_MASK) != 0; }
inline bool is_letter(char32_t c) { return u_isalpha(static_cast<UChar32>(c)) || is_mark(c); }
inline bool is_digit(char32_t c) { return u_isdigit(static_cast<UChar32>(c)); }
inline bool is_body_char(char32_t c) { return is_letter(c) || is_digit(c) || c == U'_'; }

enum class Case { none, upper, lower };

inline Case case_of(char32_t c) {
  const auto u = static_cast<UChar32>(c);
  if (u_isupper(u) || u_istitle(u)) return Case::upper;
  if (u_islower(u)) return Case::lower;
  return Case::none;
}

inline bool starts_with_url(std::u32string_view s) {
  auto lower_ascii = [](char32_t c) { return (c >= U'A' && c <= U'Z') ? c + 32 : c; };
  for (std::u32string_view prefix : {std::u32string_view(U"http://"), std::u32string_view(U"https://")}) {
    if (s.size() < prefix.size()) continue;
    bool ok = true;
    for (std::size_t i = 0; i < prefix.size() && ok; ++i) ok = lower_ascii(s[i]) == prefix[i];
    if (ok) return true;
  }
  return false;
}

inline Token make_token(std::u32string_view text, std::size_t begin, std::size_t end, TokenKind kind) {
  return Token{u32_to_utf8(text.substr(begin, end - begin)), begin, end, kind};
}

// Stage 1 boundaries: camel case, `_`, letter/digit transitions.
inline std::vector<std::pair<std::size_t, std::size_t>> camel_pieces(std::u32string_view body) {
  const std::size_t n = body.size();
  std::vector<Case> cases(n, Case::none);
  for (std::size_t i = 0; i < n; ++i) cases[i] = (is_mark(body[i]) && i > 0) ? cases[i - 1] : case_of(body[i]);
  auto next_base = [&](std::size_t i) {
    ++i;
    while (i < n && is_mark(body[i])) ++i;
    return i;
  };

  std::vector<std::pair<std::size_t, std::size_t>> pieces;
  std::size_t start = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    bool cut = i == n;
    if (!cut) {
      const char32_t prev = body[i - 1], cur = body[i];
      if (cur == U'_' || prev == U'_') {
        cut = true;
      } else if (!is_mark(cur)) {
        if (is_digit(cur) != is_digit(prev)) {
          cut = true;
        } else if (cases[i] == Case::upper && cases[i - 1] == Case::lower) {
          cut = true;
        } else if (cases[i] == Case::upper && cases[i - 1] == Case::upper) {
          const auto j = next_base(i);
          cut = j < n && cases[j] == Case::lower;
        }
      }
    }
    if (cut) {
      pieces.emplace_back(start, i);
      start = i;
    }
  }
  return pieces;
}

inline void gazetteer_split(std::u32string_view text, std::size_t begin, std::size_t end, const GazetteerSet* gaz,
                            std::vector<Token>& out) {
  if (begin >= end) return;
  const auto piece = text.substr(begin, end - begin);
  if (gaz != nullptr) {
    if (auto m = gaz->longest_substring_match(piece); m && (m->begin > 0 || m->end < piece.size())) {
      gazetteer_split(text, begin, begin + m->begin, gaz, out);
      out.push_back(make_token(text, begin + m->begin, begin + m->end, TokenKind::composite_piece));
      gazetteer_split(text, begin + m->end, end, gaz, out);
      return;
    }
  }
  out.push_back(make_token(text, begin, end, TokenKind::composite_piece));
}

inline std::vector<Token> split_composite(std::u32string_view text, std::size_t body_begin, std::size_t body_end,
                                          const GazetteerSet* gaz) {
  std::vector<Token> out;
  const auto body = text.substr(body_begin, body_end - body_begin);
  for (auto [b, e] : camel_pieces(body)) {
    if (e - b == 1 && body[b] == U'_') {
      out.push_back(make_token(text, body_begin + b, body_begin + e, TokenKind::punct));
      continue;
    }
    gazetteer_split(text, body_begin + b, body_begin + e, gaz, out);
  }
  return out;
}

}  // namespace detail

// Splits a hashtag/username body. Offsets are shifted by `body_begin` so they
// refer to the enclosing tweet. A null or empty gazetteer set disables the
// gazetteer stage.
inline std::vector<Token> split_composite(std::string_view body, std::size_t body_begin, const GazetteerSet* gaz) {
  auto u = utf8_to_u32(body);
  auto tokens = detail::split_composite(u, 0, u.size(), gaz);
  for (auto& t : tokens) {
    t.begin += body_begin;
    t.end += body_begin;
  }
  return tokens;
}

inline TokenSequence tokenize(std::string_view text, const GazetteerSet* gaz = nullptr, std::string tweet_id = {}) {
  using namespace detail;
  const std::u32string u = utf8_to_u32(text);
  const std::u32string_view s(u);
  const std::size_t n = s.size();
  TokenSequence seq{std::move(tweet_id), {}};
  auto& out = seq.tokens;

  std::size_t i = 0;
  while (i < n) {
    const char32_t c = s[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    if ((c == U'h' || c == U'H') && starts_with_url(s.substr(i))) {
      std::size_t j = i;
      while (j < n && !is_space(s[j])) ++j;
      out.push_back(make_token(s, i, j, TokenKind::url));
      i = j;
      continue;
    }
    if ((c == U'#' || c == U'@') && i + 1 < n && (is_letter(s[i + 1]) || is_digit(s[i + 1])) && !is_mark(s[i + 1])) {
      out.push_back(make_token(s, i, i + 1, c == U'#' ? TokenKind::hashtag_sigil : TokenKind::mention_sigil));
      std::size_t j = i + 1;
      while (j < n && is_body_char(s[j])) ++j;
      auto pieces = detail::split_composite(s, i + 1, j, gaz);
      out.insert(out.end(), pieces.begin(), pieces.end());
      i = j;
      continue;
    }
    if (is_letter(c)) {
      std::size_t j = i + 1;
      while (j < n && is_letter(s[j])) ++j;
      out.push_back(make_token(s, i, j, TokenKind::word));
      i = j;
      continue;
    }
    if (is_digit(c)) {
      std::size_t j = i + 1;
      while (j < n && is_digit(s[j])) ++j;
      out.push_back(make_token(s, i, j, TokenKind::number));
      i = j;
      continue;
    }
    out.push_back(make_token(s, i, i + 1, TokenKind::punct));
    ++i;
  }
  return seq;
}

// With split_enabled=false composites are still split on camel case and
// separators, but never on gazetteer matches.
inline std::vector<TokenSequence> tokenize_corpus(const Corpus& corpus, const GazetteerSet& gaz, bool split_enabled) {
  std::vector<TokenSequence> out;
  out.reserve(corpus.size());
  const GazetteerSet* g = split_enabled ? &gaz : nullptr;
  for (const auto& t : corpus.tweets()) out.push_back(tokenize(t.text, g, t.id));
  return out;
}

inline std::vector<std::string> normalized_texts(const TokenSequence& seq) {
  std::vector<std::string> out;
  out.reserve(seq.size());
  for (const auto& t : seq.tokens) out.push_back(normalize(t.text));
  return out;
}

inline std::vector<bool> match_phrase_flags(const TokenSequence& seq, const Gazetteer& gaz) {
  const auto texts = normalized_texts(seq);
  return match_phrase_flags(std::span<const std::string>(texts), gaz);
}

// Tokens TSV: `tweet_id<TAB>begin<TAB>end<TAB>kind<TAB>text`.
inline std::string format_tokens(const std::vector<TokenSequence>& seqs) {
  std::string out;
  for (const auto& seq : seqs)
    for (const auto& t : seq.tokens)
      out += escape_field(seq.tweet_id) + '\t' + std::to_string(t.begin) + '\t' + std::to_string(t.end) + '\t' +
             std::string(to_string(t.kind)) + '\t' + escape_field(t.text) + '\n';
  return out;
}

}  // namespace disner
