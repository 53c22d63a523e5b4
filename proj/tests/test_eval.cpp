#include <gtest/gtest.h>

#include <optional>
#include <random>

#include "disner/eval.hpp"
#include "oracles.hpp"

using namespace disner;

namespace {

std::vector<SpanSet> one(std::set<Span> spans, std::string id = "1") { return {SpanSet{std::move(id), std::move(spans)}}; }

using Flat = std::vector<std::tuple<std::string, std::size_t, std::size_t>>;

Flat flatten(const std::vector<SpanSet>& sets) {
  Flat out;
  for (const auto& s : sets)
    for (const auto& sp : s.spans) out.emplace_back(s.tweet_id, sp.begin, sp.end);
  return out;
}

std::vector<SpanSet> random_sets(std::mt19937& rng) {
  std::vector<SpanSet> out;
  for (int t = 0; t < 3; ++t) {
    if (std::uniform_int_distribution<int>(0, 3)(rng) == 0) continue;
    SpanSet s{std::to_string(t), {}};
    for (int k = std::uniform_int_distribution<int>(0, 4)(rng); k > 0; --k) {
      const std::size_t b = std::uniform_int_distribution<std::size_t>(0, 5)(rng);
      s.spans.insert({b, b + std::uniform_int_distribution<std::size_t>(1, 3)(rng)});
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST(StrictPrf, WorkedExamples) {
  auto exact = strict_prf(one({{0, 5}}), one({{0, 5}}));
  EXPECT_DOUBLE_EQ(exact.precision, 1.0);
  EXPECT_DOUBLE_EQ(exact.recall, 1.0);
  EXPECT_DOUBLE_EQ(exact.f1, 1.0);

  auto half = strict_prf(one({{0, 5}, {7, 9}}), one({{0, 5}, {10, 12}}));
  EXPECT_EQ(half.tp, 1u);
  EXPECT_EQ(half.fp, 1u);
  EXPECT_EQ(half.fn, 1u);
  EXPECT_DOUBLE_EQ(half.precision, 0.5);
  EXPECT_DOUBLE_EQ(half.recall, 0.5);
  EXPECT_DOUBLE_EQ(half.f1, 0.5);

  auto partial = strict_prf(one({{0, 4}}), one({{0, 5}}));
  EXPECT_DOUBLE_EQ(partial.f1, 0.0);
  EXPECT_DOUBLE_EQ(partial.precision, 0.0);
}

TEST(StrictPrf, ZeroDenominators) {
  auto empty = strict_prf({}, {});
  EXPECT_EQ(empty.f1, 0.0);
  EXPECT_EQ(empty.precision, 0.0);
  auto no_pred = strict_prf({}, one({{0, 1}}));
  EXPECT_EQ(no_pred.fn, 1u);
  EXPECT_EQ(no_pred.recall, 0.0);
}

TEST(StrictPrf, MissingTweetsCountAsEmpty) {
  auto r = strict_prf(one({{0, 2}}, "a"), one({{0, 2}}, "b"));
  EXPECT_EQ(r.fp, 1u);
  EXPECT_EQ(r.fn, 1u);
  EXPECT_EQ(r.per_tweet.size(), 2u);
}

TEST(StrictPrf, ValidatesAgainstCorpus) {
  auto corpus = validate_corpus({{"1", "la gripe"}}, {});
  EXPECT_NO_THROW(strict_prf(one({{3, 8}}), one({{3, 8}}), &corpus));
  EXPECT_THROW(strict_prf(one({{3, 9}}), one({{3, 8}}), &corpus), ValidationError);
  EXPECT_THROW(strict_prf(one({{0, 1}}, "2"), {}, &corpus), ValidationError);
}

TEST(StrictPrf, PropertiesAgainstOracle) {
  std::mt19937 rng(42);
  for (int inst = 0; inst < 1000; ++inst) {
    auto pred = random_sets(rng), gold = random_sets(rng);
    auto r = strict_prf(pred, gold);
    auto c = oracle::strict_counts(flatten(pred), flatten(gold));
    ASSERT_EQ(r.tp, c.tp);
    ASSERT_EQ(r.fp, c.fp);
    ASSERT_EQ(r.fn, c.fn);
    for (double v : {r.precision, r.recall, r.f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    auto swapped = strict_prf(gold, pred);
    EXPECT_DOUBLE_EQ(swapped.precision, r.recall);
    EXPECT_DOUBLE_EQ(swapped.recall, r.precision);
    EXPECT_DOUBLE_EQ(swapped.f1, r.f1);
  }
}

TEST(Report, Formats) {
  auto r = strict_prf(one({{0, 5}}), one({{0, 5}}));
  EXPECT_NE(format_report_text(r).find("1.000"), std::string::npos);
  EXPECT_EQ(format_report_csv(r), "precision,recall,f1,tp,fp,fn\n1.000000,1.000000,1.000000,1,0,0\n");
}

TEST(StrictPrf, Monotonicity) {
  std::mt19937 rng(43);
  for (int inst = 0; inst < 1000; ++inst) {
    auto pred = random_sets(rng), gold = random_sets(rng);
    const auto before = strict_prf(pred, gold);

    // A gold span not yet predicted.
    std::optional<std::pair<std::string, Span>> missing;
    for (const auto& g : gold)
      for (const auto& sp : g.spans) {
        bool found = false;
        for (const auto& p : pred) found = found || (p.tweet_id == g.tweet_id && p.spans.count(sp));
        if (!found && !missing) missing = {{g.tweet_id, sp}};
      }
    if (missing) {
      auto more = pred;
      more.push_back({missing->first, {missing->second}});
      const auto after = strict_prf(more, gold);
      EXPECT_GE(after.precision, before.precision);
      EXPECT_GE(after.recall, before.recall);
      EXPECT_GE(after.f1, before.f1);
    }

    // A span that can't be gold (offsets past every generated span).
    auto wrong = pred;
    wrong.push_back({"0", {{100, 101}}});
    const auto after = strict_prf(wrong, gold);
    EXPECT_LE(after.precision, before.precision + 1e-15);
    EXPECT_LE(after.recall, before.recall + 1e-15);
  }
}
