#pragma once

// Priority-ordered disease term lists. Two queries are served:
//  - longest in-word substring match, used to split hashtag/username bodies;
//  - greedy longest phrase match over token windows, used for feature flags.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "disner/text.hpp"

namespace disner {

// Shortest substring (in normalized characters) considered by
// longest_substring_match.
inline constexpr std::size_t kMinSubstringMatch = 3;

// Multi-pattern matcher over code points.
class AhoCorasick {
 public:
  AhoCorasick() { nodes_.push_back({}); }

  explicit AhoCorasick(const std::vector<std::u32string>& patterns) : AhoCorasick() {
    for (const auto& p : patterns) insert(p);
    build();
  }

  // Calls f(end, length) for every occurrence of every pattern in `text`;
  // `end` is exclusive. Occurrences are reported in order of increasing end.
  template <typename F>
  void for_each_match(std::u32string_view text, F&& f) const {
    int state = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
      state = step(state, text[i]);
      for (int s = nodes_[state].terminal ? state : nodes_[state].dict; s > 0; s = nodes_[s].dict)
        f(i + 1, nodes_[s].depth);
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    int fail = 0;
    int dict = 0;  // nearest terminal strictly along the fail chain, 0 if none
    std::size_t depth = 0;
    bool terminal = false;
  };

  static uint64_t key(int node, char32_t c) { return (static_cast<uint64_t>(node) << 32) | c; }

  int child(int node, char32_t c) const {
    auto it = edges_.find(key(node, c));
    return it == edges_.end() ? -1 : it->second;
  }

  int step(int state, char32_t c) const {
    for (;;) {
      int next = child(state, c);
      if (next >= 0) return next;
      if (state == 0) return 0;
      state = nodes_[state].fail;
    }
  }

  void insert(const std::u32string& p) {
    if (p.empty()) return;
    int node = 0;
    for (char32_t c : p) {
      int next = child(node, c);
      if (next < 0) {
        next = static_cast<int>(nodes_.size());
        Node n;
        n.depth = nodes_[node].depth + 1;
        nodes_.push_back(n);
        edges_.emplace(key(node, c), next);
        children_.resize(nodes_.size());
        children_[node].emplace_back(c, next);
      }
      node = next;
    }
    nodes_[node].terminal = true;
  }

  void build() {
    children_.resize(nodes_.size());
    std::queue<int> queue;
    for (auto [c, n] : children_[0]) queue.push(n);
    while (!queue.empty()) {
      int node = queue.front();
      queue.pop();
      for (auto [c, next] : children_[node]) {
        int f = nodes_[node].fail;
        int target = -1;
        for (;;) {
          target = child(f, c);
          if (target >= 0 || f == 0) break;
          f = nodes_[f].fail;
        }
        nodes_[next].fail = (target >= 0 && target != next) ? target : 0;
        int fl = nodes_[next].fail;
        nodes_[next].dict = nodes_[fl].terminal ? fl : nodes_[fl].dict;
        queue.push(next);
      }
    }
    children_.clear();
    children_.shrink_to_fit();
  }

  std::vector<Node> nodes_;
  std::unordered_map<uint64_t, int> edges_;
  std::vector<std::vector<std::pair<char32_t, int>>> children_;  // build-time only
};

class Gazetteer {
 public:
  Gazetteer(std::string name, int priority, const std::vector<std::string>& raw_terms)
      : name_(std::move(name)), priority_(priority) {
    for (const auto& raw : raw_terms) {
      auto t = normalize(raw);
      if (!t.empty() && lookup_.insert(t).second) terms_.push_back(std::move(t));
    }
    if (terms_.empty()) throw ValidationError("gazetteer \"" + name_ + "\" has no terms after normalization");
    std::sort(terms_.begin(), terms_.end());
    std::vector<std::u32string> patterns;
    for (const auto& t : terms_) {
      auto u = utf8_to_u32(t);
      max_words_ = std::max<std::size_t>(max_words_, 1 + std::count(u.begin(), u.end(), U' '));
      if (u.size() >= kMinSubstringMatch) patterns.push_back(std::move(u));
    }
    automaton_ = AhoCorasick(patterns);
  }

  const std::string& name() const { return name_; }
  int priority() const { return priority_; }
  // Normalized, deduplicated, sorted.
  const std::vector<std::string>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool contains(const std::string& normalized_term) const { return lookup_.count(normalized_term) != 0; }
  std::size_t max_words() const { return max_words_; }
  const AhoCorasick& automaton() const { return automaton_; }

 private:
  std::string name_;
  int priority_ = 0;
  std::vector<std::string> terms_;
  std::unordered_set<std::string> lookup_;
  std::size_t max_words_ = 1;
  AhoCorasick automaton_;
};

struct SubstringMatch {
  std::size_t begin = 0;  // character offsets into the queried word
  std::size_t end = 0;
  std::string gazetteer;

  bool operator==(const SubstringMatch&) const = default;
};

class GazetteerSet {
 public:
  GazetteerSet() = default;

  // Lists in priority order; priority = position.
  explicit GazetteerSet(const std::vector<std::pair<std::string, std::vector<std::string>>>& lists) {
    for (const auto& [name, terms] : lists) {
      if (find(name)) throw ValidationError("gazetteer \"" + name + "\" listed twice");
      gazetteers_.emplace_back(name, static_cast<int>(gazetteers_.size()), terms);
    }
  }

  const std::vector<Gazetteer>& gazetteers() const { return gazetteers_; }
  bool empty() const { return gazetteers_.empty(); }

  const Gazetteer* find(std::string_view name) const {
    for (const auto& g : gazetteers_)
      if (g.name() == name) return &g;
    return nullptr;
  }

  // Longest substring of `word` matching a term of the first (highest
  // priority) gazetteer that has any match; ties go to the leftmost match.
  std::optional<SubstringMatch> longest_substring_match(std::u32string_view word) const {
    if (gazetteers_.empty() || word.empty()) return std::nullopt;
    const MappedText norm = normalize_mapped(word);
    const auto n = norm.text.size();
    auto aligned = [&](std::size_t a, std::size_t b) {
      return norm.cluster_start[a] && (b == n || norm.cluster_start[b]);
    };
    for (const auto& g : gazetteers_) {
      std::optional<SubstringMatch> best;
      g.automaton().for_each_match(norm.text, [&](std::size_t end, std::size_t len) {
        const std::size_t begin = end - len;
        if (!aligned(begin, end)) return;
        SubstringMatch m{norm.source[begin].first, norm.source[end - 1].second, g.name()};
        const auto mlen = m.end - m.begin;
        if (!best || mlen > best->end - best->begin || (mlen == best->end - best->begin && m.begin < best->begin))
          best = std::move(m);
      });
      if (best) return best;
    }
    return std::nullopt;
  }

  std::optional<SubstringMatch> longest_substring_match(std::string_view word) const {
    return longest_substring_match(std::u32string_view(utf8_to_u32(word)));
  }

 private:
  std::vector<Gazetteer> gazetteers_;
};

// ---------------------------------------------------------------------------
// Phrase flags

// Greedy left-to-right longest-window match of `normalized_tokens` against
// the gazetteer; every token inside a matched window is flagged. Windows do
// not overlap.
inline std::vector<bool> match_phrase_flags(std::span<const std::string> normalized_tokens, const Gazetteer& gaz) {
  const std::size_t t = normalized_tokens.size();
  std::vector<bool> flags(t, false);
  std::size_t i = 0;
  while (i < t) {
    std::size_t matched = 0;
    for (std::size_t len = std::min(gaz.max_words(), t - i); len >= 1; --len) {
      std::string phrase = normalized_tokens[i];
      for (std::size_t k = 1; k < len; ++k) phrase += ' ' + normalized_tokens[i + k];
      if (gaz.contains(phrase)) {
        matched = len;
        break;
      }
    }
    if (matched == 0) {
      ++i;
      continue;
    }
    std::fill(flags.begin() + static_cast<std::ptrdiff_t>(i), flags.begin() + static_cast<std::ptrdiff_t>(i + matched),
              true);
    i += matched;
  }
  return flags;
}

// ---------------------------------------------------------------------------
// Term lists and the compiled cache

inline std::vector<std::string> parse_term_list(std::string_view content) {
  std::vector<std::string> terms;
  for (auto line : split_lines(content)) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty() && line.front() == '#') continue;
    terms.emplace_back(line);
  }
  return terms;
}

struct GazetteerSource {
  std::string name;
  std::string path;
};

inline GazetteerSet compile(const std::vector<GazetteerSource>& sources) {
  std::vector<std::pair<std::string, std::vector<std::string>>> lists;
  for (const auto& s : sources) lists.emplace_back(s.name, parse_term_list(read_file(s.path)));
  return GazetteerSet(lists);
}

inline constexpr std::string_view kGazetteerCacheMagic = "DISNERGZ";
inline constexpr uint32_t kGazetteerCacheVersion = 1;

namespace detail {

inline void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline uint32_t get_u32(std::string_view in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw ParseError("truncated binary data");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(in[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

inline std::string get_bytes(std::string_view in, std::size_t& pos, std::size_t n) {
  if (pos + n > in.size()) throw ParseError("truncated binary data");
  std::string s(in.substr(pos, n));
  pos += n;
  return s;
}

}  // namespace detail

// Layout (little-endian): magic, u32 version, u32 list count, then per list
// u32 name length, name bytes, u32 term count, and per term u32 length plus
// UTF-8 bytes. Lists are stored in priority order.
inline std::string serialize_gazetteers(const GazetteerSet& set) {
  std::string out(kGazetteerCacheMagic);
  detail::put_u32(out, kGazetteerCacheVersion);
  detail::put_u32(out, static_cast<uint32_t>(set.gazetteers().size()));
  for (const auto& g : set.gazetteers()) {
    detail::put_u32(out, static_cast<uint32_t>(g.name().size()));
    out += g.name();
    detail::put_u32(out, static_cast<uint32_t>(g.size()));
    for (const auto& t : g.terms()) {
      detail::put_u32(out, static_cast<uint32_t>(t.size()));
      out += t;
    }
  }
  return out;
}

inline GazetteerSet deserialize_gazetteers(std::string_view data) {
  if (data.substr(0, kGazetteerCacheMagic.size()) != kGazetteerCacheMagic)
    throw ParseError("not a gazetteer cache (bad magic)");
  std::size_t pos = kGazetteerCacheMagic.size();
  const auto version = detail::get_u32(data, pos);
  if (version != kGazetteerCacheVersion)
    throw ParseError("unsupported gazetteer cache version " + std::to_string(version));
  const auto lists = detail::get_u32(data, pos);
  std::vector<std::pair<std::string, std::vector<std::string>>> out;
  for (uint32_t l = 0; l < lists; ++l) {
    auto name = detail::get_bytes(data, pos, detail::get_u32(data, pos));
    const auto count = detail::get_u32(data, pos);
    std::vector<std::string> terms;
    terms.reserve(count);
    for (uint32_t k = 0; k < count; ++k) terms.push_back(detail::get_bytes(data, pos, detail::get_u32(data, pos)));
    out.emplace_back(std::move(name), std::move(terms));
  }
  if (pos != data.size()) throw ParseError("trailing bytes after gazetteer cache");
  return GazetteerSet(out);
}

inline void save_gazetteer_cache(const std::string& path, const GazetteerSet& set) {
  write_file(path, serialize_gazetteers(set));
}

inline GazetteerSet load_gazetteer_cache(const std::string& path) { return deserialize_gazetteers(read_file(path)); }

}  // namespace disner
