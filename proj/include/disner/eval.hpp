#pragma once

// Strict span-level scoring: a prediction counts only when its (tweet,
// begin, end) equals a gold span. Counts are pooled over tweets.

#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "disner/biocodec.hpp"
#include "disner/corpus.hpp"

namespace disner {

struct TweetCounts {
  std::string tweet_id;
  std::size_t tp = 0, fp = 0, fn = 0;
};

struct EvalReport {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0, recall = 0, f1 = 0;
  std::vector<TweetCounts> per_tweet;
};

inline void finalize(EvalReport& r) {
  r.precision = r.tp + r.fp ? double(r.tp) / double(r.tp + r.fp) : 0.0;
  r.recall = r.tp + r.fn ? double(r.tp) / double(r.tp + r.fn) : 0.0;
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
}

// Groups mentions into span sets, one per tweet id, in first-seen order.
inline std::vector<SpanSet> spans_from_mentions(const std::vector<Mention>& mentions) {
  std::vector<SpanSet> out;
  std::map<std::string, std::size_t> at;
  for (const auto& m : mentions) {
    auto [it, fresh] = at.emplace(m.tweet_id, out.size());
    if (fresh) out.push_back({m.tweet_id, {}});
    out[it->second].spans.insert({m.begin, m.end});
  }
  return out;
}

// Tweets missing from either side count as empty. When `corpus` is given
// every span must be valid against its tweet.
inline EvalReport strict_prf(const std::vector<SpanSet>& predicted, const std::vector<SpanSet>& gold,
                             const Corpus* corpus = nullptr) {
  std::vector<std::string> issues;
  std::vector<std::string> order;
  std::map<std::string, std::pair<std::set<Span>, std::set<Span>>> by_id;
  auto add = [&](const std::vector<SpanSet>& sets, bool is_gold) {
    for (const auto& s : sets) {
      auto [it, fresh] = by_id.try_emplace(s.tweet_id);
      if (fresh) order.push_back(s.tweet_id);
      auto& target = is_gold ? it->second.second : it->second.first;
      std::size_t len = 0;
      const bool known = corpus == nullptr || corpus->contains(s.tweet_id);
      if (!known) issues.push_back("tweet " + s.tweet_id + " not in corpus");
      if (corpus && known) len = char_length(corpus->tweet(s.tweet_id).text);
      for (const auto& sp : s.spans) {
        if (sp.begin >= sp.end || (corpus && known && sp.end > len))
          issues.push_back("tweet " + s.tweet_id + ": invalid span " + std::to_string(sp.begin) + ".." +
                           std::to_string(sp.end));
        target.insert(sp);
      }
    }
  };
  add(gold, true);
  add(predicted, false);
  if (!issues.empty()) throw ValidationError(std::move(issues));

  EvalReport r;
  for (const auto& id : order) {
    const auto& [pred, gld] = by_id[id];
    TweetCounts c{id};
    for (const auto& sp : pred) (gld.count(sp) ? c.tp : c.fp)++;
    c.fn = gld.size() - c.tp;
    r.tp += c.tp;
    r.fp += c.fp;
    r.fn += c.fn;
    r.per_tweet.push_back(std::move(c));
  }
  finalize(r);
  return r;
}

inline std::string format_report_text(const EvalReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "%-10s %8s\n%-10s %8.3f\n%-10s %8.3f\n%-10s %8.3f\n%-10s %8zu\n%-10s %8zu\n%-10s %8zu\n", "metric",
                "value", "precision", r.precision, "recall", r.recall, "F1", r.f1, "tp", r.tp, "fp", r.fp, "fn", r.fn);
  return buf;
}

inline std::string format_report_csv(const EvalReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "precision,recall,f1,tp,fp,fn\n%.6f,%.6f,%.6f,%zu,%zu,%zu\n", r.precision, r.recall,
                r.f1, r.tp, r.fp, r.fn);
  return buf;
}

}  // namespace disner
