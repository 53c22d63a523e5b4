#pragma once

// Tweets and gold disease mentions. All offsets are counted in Unicode
// scalar values of the tweet text.

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "disner/text.hpp"

namespace disner {

struct Tweet {
  std::string id;
  std::string text;  // UTF-8

  bool operator==(const Tweet&) const = default;
};

struct Mention {
  std::string tweet_id;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string category = "ENFERMEDAD";
  std::string extraction;

  bool operator==(const Mention&) const = default;
};

class Corpus {
 public:
  Corpus() = default;

  const std::vector<Tweet>& tweets() const { return tweets_; }
  std::size_t size() const { return tweets_.size(); }

  // Mentions of one tweet sorted by (begin, end); empty if none.
  const std::vector<Mention>& mentions(const std::string& tweet_id) const {
    static const std::vector<Mention> none;
    auto it = mentions_.find(tweet_id);
    return it == mentions_.end() ? none : it->second;
  }

  std::vector<Mention> all_mentions() const {
    std::vector<Mention> out;
    for (const auto& t : tweets_) {
      const auto& m = mentions(t.id);
      out.insert(out.end(), m.begin(), m.end());
    }
    return out;
  }

  bool contains(const std::string& tweet_id) const { return index_.count(tweet_id) != 0; }
  const Tweet& tweet(const std::string& tweet_id) const { return tweets_.at(index_.at(tweet_id)); }

  // Non-fatal findings from validation (collapsed duplicates).
  const std::vector<std::string>& warnings() const { return warnings_; }

  // Sub-corpus holding the given tweets (by position) and their mentions.
  Corpus subset(const std::vector<std::size_t>& positions) const {
    Corpus c;
    for (auto p : positions) {
      const auto& t = tweets_.at(p);
      c.index_[t.id] = c.tweets_.size();
      c.tweets_.push_back(t);
      auto it = mentions_.find(t.id);
      if (it != mentions_.end()) c.mentions_[t.id] = it->second;
    }
    return c;
  }

 private:
  friend Corpus validate_corpus(std::vector<Tweet> tweets, std::vector<Mention> mentions);

  std::vector<Tweet> tweets_;
  std::unordered_map<std::string, std::size_t> index_;
  std::map<std::string, std::vector<Mention>> mentions_;
  std::vector<std::string> warnings_;
};

// ---------------------------------------------------------------------------
// Tweets TSV: `id<TAB>text`

inline std::vector<Tweet> parse_tweets(std::string_view content) {
  std::vector<Tweet> out;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  for (auto line : split_lines(content)) {
    ++line_no;
    auto cols = split_tabs(line);
    if (cols.size() != 2)
      throw ParseError("expected 2 columns (id, text), found " + std::to_string(cols.size()), line_no);
    Tweet t{unescape_field(cols[0], line_no), unescape_field(cols[1], line_no)};
    if (t.id.empty()) throw ParseError("empty tweet id", line_no);
    if (t.text.empty()) throw ValidationError("line " + std::to_string(line_no) + ": tweet " + t.id + " has empty text");
    if (!seen.insert(t.id).second)
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate tweet id \"" + t.id + "\"");
    out.push_back(std::move(t));
  }
  return out;
}

inline std::vector<Tweet> load_tweets(const std::string& path) { return parse_tweets(read_file(path)); }

inline std::string format_tweets(const std::vector<Tweet>& tweets) {
  std::string out;
  for (const auto& t : tweets) out += escape_field(t.id) + '\t' + escape_field(t.text) + '\n';
  return out;
}

inline void save_tweets(const std::string& path, const std::vector<Tweet>& tweets) {
  write_file(path, format_tweets(tweets));
}

// ---------------------------------------------------------------------------
// Mentions TSV: `tweet_id<TAB>begin<TAB>end<TAB>category<TAB>extraction`

inline std::vector<Mention> parse_mentions(std::string_view content) {
  std::vector<Mention> out;
  std::size_t line_no = 0;
  for (auto line : split_lines(content)) {
    ++line_no;
    auto cols = split_tabs(line);
    if (cols.size() != 5) throw ParseError("expected 5 columns, found " + std::to_string(cols.size()), line_no);
    auto begin = parse_int(cols[1], line_no, "begin");
    auto end = parse_int(cols[2], line_no, "end");
    if (begin < 0) throw ValidationError("line " + std::to_string(line_no) + ": negative begin offset");
    if (begin >= end)
      throw ValidationError("line " + std::to_string(line_no) + ": empty span (begin " + std::to_string(begin) +
                            " >= end " + std::to_string(end) + ")");
    Mention m;
    m.tweet_id = unescape_field(cols[0], line_no);
    m.begin = static_cast<std::size_t>(begin);
    m.end = static_cast<std::size_t>(end);
    m.category = unescape_field(cols[3], line_no);
    m.extraction = unescape_field(cols[4], line_no);
    out.push_back(std::move(m));
  }
  return out;
}

inline std::vector<Mention> load_mentions(const std::string& path) { return parse_mentions(read_file(path)); }

inline std::string format_mentions(const std::vector<Mention>& mentions) {
  std::string out;
  for (const auto& m : mentions) {
    out += escape_field(m.tweet_id) + '\t' + std::to_string(m.begin) + '\t' + std::to_string(m.end) + '\t' +
           escape_field(m.category) + '\t' + escape_field(m.extraction) + '\n';
  }
  return out;
}

inline void save_mentions(const std::string& path, const std::vector<Mention>& mentions) {
  write_file(path, format_mentions(mentions));
}

// ---------------------------------------------------------------------------

// Checks every mention against its tweet and assembles the corpus. All
// violations are collected before throwing.
inline Corpus validate_corpus(std::vector<Tweet> tweets, std::vector<Mention> mentions) {
  Corpus c;
  std::vector<std::string> issues;
  std::unordered_map<std::string, std::u32string> decoded;
  for (auto& t : tweets) {
    if (t.id.empty()) issues.push_back("tweet with empty id");
    if (t.text.empty()) issues.push_back("tweet " + t.id + " has empty text");
    if (!c.index_.emplace(t.id, c.tweets_.size()).second) {
      issues.push_back("duplicate tweet id \"" + t.id + "\"");
      continue;
    }
    decoded[t.id] = utf8_to_u32(t.text);
    c.tweets_.push_back(std::move(t));
  }

  std::map<std::string, std::set<std::pair<std::size_t, std::size_t>>> seen;
  for (std::size_t k = 0; k < mentions.size(); ++k) {
    auto& m = mentions[k];
    const std::string where = "mention " + std::to_string(k + 1) + " (tweet " + m.tweet_id + ", " +
                              std::to_string(m.begin) + ".." + std::to_string(m.end) + ")";
    auto it = decoded.find(m.tweet_id);
    if (it == decoded.end()) {
      issues.push_back(where + ": unresolved tweet id \"" + m.tweet_id + "\"");
      continue;
    }
    const auto& text = it->second;
    if (m.begin >= m.end || m.end > text.size()) {
      issues.push_back(where + ": offsets out of range for text of length " + std::to_string(text.size()));
      continue;
    }
    auto actual = u32_to_utf8(std::u32string_view(text).substr(m.begin, m.end - m.begin));
    if (actual != m.extraction) {
      issues.push_back(where + ": extraction mismatch, expected \"" + m.extraction + "\" but text has \"" + actual +
                       "\"");
      continue;
    }
    if (!seen[m.tweet_id].emplace(m.begin, m.end).second) {
      c.warnings_.push_back(where + ": duplicate span collapsed");
      continue;
    }
    c.mentions_[m.tweet_id].push_back(std::move(m));
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));

  for (auto& [id, ms] : c.mentions_) {
    std::stable_sort(ms.begin(), ms.end(), [](const Mention& a, const Mention& b) {
      return a.begin != b.begin ? a.begin < b.begin : a.end < b.end;
    });
  }
  return c;
}

inline Corpus load_corpus(const std::string& tweets_path, const std::string& mentions_path) {
  auto tweets = load_tweets(tweets_path);
  auto mentions = mentions_path.empty() ? std::vector<Mention>{} : load_mentions(mentions_path);
  return validate_corpus(std::move(tweets), std::move(mentions));
}

}  // namespace disner
