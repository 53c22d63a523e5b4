#pragma once

// Character spans <-> per-token BIO tags.

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "disner/corpus.hpp"
#include "disner/tokenizer.hpp"

namespace disner {

// Class order is fixed: index 0 = B, 1 = I, 2 = O.
enum class Tag : int { B = 0, I = 1, O = 2 };
inline constexpr int kNumTags = 3;

inline char tag_char(Tag t) { return t == Tag::B ? 'B' : t == Tag::I ? 'I' : 'O'; }

struct TagSequence {
  std::string tweet_id;
  std::vector<Tag> tags;

  bool operator==(const TagSequence&) const = default;
};

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  auto operator<=>(const Span&) const = default;
};

struct SpanSet {
  std::string tweet_id;
  std::set<Span> spans;

  bool operator==(const SpanSet&) const = default;
};

struct EncodeResult {
  TagSequence tags;
  std::vector<std::string> warnings;
};

// A token is covered by a mention when their character ranges overlap. The
// first covered token becomes B, the rest I. Misaligned boundaries, mentions
// that cover nothing and mentions colliding with an earlier one produce
// warnings; colliding mentions are dropped.
inline EncodeResult encode(const TokenSequence& tokens, std::vector<Mention> mentions) {
  EncodeResult r;
  r.tags.tweet_id = tokens.tweet_id;
  r.tags.tags.assign(tokens.size(), Tag::O);
  std::stable_sort(mentions.begin(), mentions.end(),
                   [](const Mention& a, const Mention& b) { return a.begin < b.begin; });

  std::size_t last_end = 0;
  bool any = false;
  for (const auto& m : mentions) {
    if (m.tweet_id != tokens.tweet_id)
      throw Error("mention for tweet " + m.tweet_id + " encoded against tokens of tweet " + tokens.tweet_id);
    const std::string where = "tweet " + m.tweet_id + " mention " + std::to_string(m.begin) + ".." +
                              std::to_string(m.end);
    if (any && m.begin < last_end) {
      r.warnings.push_back(where + ": overlaps an earlier mention, dropped");
      continue;
    }
    std::size_t first = tokens.size(), last = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const auto& t = tokens.tokens[i];
      if (t.begin < m.end && t.end > m.begin) {
        first = std::min(first, i);
        last = i;
      }
    }
    if (first == tokens.size()) {
      r.warnings.push_back(where + ": covers no token");
      continue;
    }
    bool taken = false;
    for (std::size_t i = first; i <= last; ++i) taken = taken || r.tags.tags[i] != Tag::O;
    if (taken) {
      r.warnings.push_back(where + ": shares a token with an earlier mention, dropped");
      continue;
    }
    if (tokens.tokens[first].begin != m.begin || tokens.tokens[last].end != m.end)
      r.warnings.push_back(where + ": boundary not on a token boundary (tokens " + std::to_string(first) + ".." +
                           std::to_string(last) + ")");
    r.tags.tags[first] = Tag::B;
    for (std::size_t i = first + 1; i <= last; ++i) r.tags.tags[i] = Tag::I;
    last_end = m.end;
    any = true;
  }
  return r;
}

// Runs of B I* become spans; an I that follows O (or starts the sequence)
// opens a new span as if it were B.
inline SpanSet decode(const TokenSequence& tokens, const TagSequence& tags) {
  if (tokens.size() != tags.tags.size())
    throw Error("tweet " + tokens.tweet_id + ": " + std::to_string(tags.tags.size()) + " tags for " +
                std::to_string(tokens.size()) + " tokens");
  SpanSet out{tokens.tweet_id, {}};
  bool open = false;
  Span cur;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Tag tag = tags.tags[i];
    const auto& tok = tokens.tokens[i];
    if (tag == Tag::O) {
      if (open) out.spans.insert(cur);
      open = false;
    } else if (tag == Tag::B || !open) {
      if (open) out.spans.insert(cur);
      cur = {tok.begin, tok.end};
      open = true;
    } else {
      cur.end = tok.end;
    }
  }
  if (open) out.spans.insert(cur);
  return out;
}

// Debug tags TSV: `tweet_id<TAB>tag1 tag2 ...`.
inline std::string format_tags(const std::vector<TagSequence>& seqs) {
  std::string out;
  for (const auto& s : seqs) {
    out += escape_field(s.tweet_id) + '\t';
    for (std::size_t i = 0; i < s.tags.size(); ++i) {
      if (i) out += ' ';
      out += tag_char(s.tags[i]);
    }
    out += '\n';
  }
  return out;
}

// Exports decoded spans as mentions (corpus TSV shape) against the tweet text.
inline std::vector<Mention> spans_to_mentions(const Corpus& corpus, const std::vector<SpanSet>& spans,
                                              const std::string& category = "ENFERMEDAD") {
  std::vector<Mention> out;
  for (const auto& s : spans) {
    const auto text = utf8_to_u32(corpus.tweet(s.tweet_id).text);
    for (const auto& sp : s.spans)
      out.push_back({s.tweet_id, sp.begin, sp.end, category,
                     u32_to_utf8(std::u32string_view(text).substr(sp.begin, sp.end - sp.begin))});
  }
  return out;
}

}  // namespace disner
