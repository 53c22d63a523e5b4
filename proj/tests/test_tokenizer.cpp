#include <gtest/gtest.h>

#include <random>

#include "disner/tokenizer.hpp"
#include "test_util.hpp"

using namespace disner;

namespace {

std::vector<std::string> texts(const std::vector<Token>& toks) {
  std::vector<std::string> out;
  for (const auto& t : toks) out.push_back(t.text);
  return out;
}

GazetteerSet diseases() {
  return GazetteerSet({{"gold", {"covid", "epilepsia"}},
                       {"distemist", {"epilepsia", "dravet"}},
                       {"umls", {"diabetes mellitus", "gripe"}},
                       {"silver", {"tos"}}});
}

void expect_offset_fidelity(const std::string& text, const TokenSequence& seq) {
  std::size_t last_end = 0;
  for (const auto& t : seq.tokens) {
    EXPECT_LT(t.begin, t.end);
    EXPECT_GE(t.begin, last_end);
    EXPECT_EQ(char_slice(text, t.begin, t.end), t.text);
    last_end = t.end;
  }
}

}  // namespace

TEST(Tokenize, BaseSegmentation) {
  auto seq = tokenize("la gripe!");
  ASSERT_EQ(seq.size(), 3u);
  EXPECT_EQ(seq.tokens[0], (Token{"la", 0, 2, TokenKind::word}));
  EXPECT_EQ(seq.tokens[1], (Token{"gripe", 3, 8, TokenKind::word}));
  EXPECT_EQ(seq.tokens[2], (Token{"!", 8, 9, TokenKind::punct}));
  EXPECT_EQ(tokenize("").size(), 0u);
}

TEST(Tokenize, Username) {
  auto seq = tokenize("@user ok");
  ASSERT_EQ(seq.size(), 3u);
  EXPECT_EQ(seq.tokens[0], (Token{"@", 0, 1, TokenKind::mention_sigil}));
  EXPECT_EQ(seq.tokens[1], (Token{"user", 1, 5, TokenKind::composite_piece}));
  EXPECT_EQ(seq.tokens[2], (Token{"ok", 6, 8, TokenKind::word}));
}

TEST(Tokenize, NumbersUrlsAndStraySigils) {
  auto seq = tokenize("23 de mayo https://t.co/Ab1?x=2 # @ #_a");
  std::vector<std::string> want = {"23", "de", "mayo", "https://t.co/Ab1?x=2", "#", "@", "#", "_", "a"};
  EXPECT_EQ(texts(seq.tokens), want);
  EXPECT_EQ(seq.tokens[0].kind, TokenKind::number);
  EXPECT_EQ(seq.tokens[3].kind, TokenKind::url);
  EXPECT_EQ(seq.tokens[4].kind, TokenKind::punct);
}

TEST(SplitComposite, CamelCase) {
  auto pieces = split_composite("InvestigaEpilepsia", 1, nullptr);
  ASSERT_EQ(texts(pieces), (std::vector<std::string>{"Investiga", "Epilepsia"}));
  EXPECT_EQ(pieces[0].begin, 1u);
  EXPECT_EQ(pieces[0].end, 10u);
  EXPECT_EQ(pieces[1].begin, 10u);
  EXPECT_EQ(texts(split_composite("RetoDravet", 0, nullptr)), (std::vector<std::string>{"Reto", "Dravet"}));
  EXPECT_EQ(texts(split_composite("1MillonDePasos", 0, nullptr)),
            (std::vector<std::string>{"1", "Millon", "De", "Pasos"}));
  EXPECT_EQ(texts(split_composite("HTMLParser", 0, nullptr)), (std::vector<std::string>{"HTML", "Parser"}));
  EXPECT_EQ(texts(split_composite("COVID19", 0, nullptr)), (std::vector<std::string>{"COVID", "19"}));
}

TEST(SplitComposite, UnderscoreIsPunct) {
  auto pieces = split_composite("no_gripe", 0, nullptr);
  ASSERT_EQ(texts(pieces), (std::vector<std::string>{"no", "_", "gripe"}));
  EXPECT_EQ(pieces[1].kind, TokenKind::punct);
  EXPECT_EQ(pieces[0].kind, TokenKind::composite_piece);
}

TEST(SplitComposite, GazetteerSplit) {
  auto gaz = diseases();
  EXPECT_EQ(texts(split_composite("nosolohaycovid", 0, &gaz)), (std::vector<std::string>{"nosolohay", "covid"}));
  // Recursion handles two diseases in one composite.
  EXPECT_EQ(texts(split_composite("gripeytosycovid", 0, &gaz)),
            (std::vector<std::string>{"gripe", "y", "tos", "y", "covid"}));
  // A piece that is exactly a term is left whole.
  EXPECT_EQ(texts(split_composite("Epilepsia", 0, &gaz)), (std::vector<std::string>{"Epilepsia"}));
  EXPECT_EQ(texts(split_composite("quedateencasa", 0, &gaz)), (std::vector<std::string>{"quedateencasa"}));
  // Any term of three or more characters splits, even inside unrelated words.
  EXPECT_EQ(texts(split_composite("juntosesmejor", 0, &gaz)), (std::vector<std::string>{"jun", "tos", "esmejor"}));
}

TEST(SplitComposite, ConcatenatesToBody) {
  auto gaz = diseases();
  std::mt19937 rng(3);
  const std::vector<std::string> parts = {"covid", "Gripe", "_", "9", "tos", "Xy", "ab", "ÉPOCA", "é", "DRAVET", "z"};
  for (int i = 0; i < 500; ++i) {
    std::string body;
    for (int k = std::uniform_int_distribution<int>(1, 6)(rng); k > 0; --k)
      body += parts[std::uniform_int_distribution<std::size_t>(0, parts.size() - 1)(rng)];
    std::string joined;
    std::size_t pos = 4;
    for (const auto& t : split_composite(body, 4, &gaz)) {
      EXPECT_EQ(t.begin, pos) << body;
      pos = t.end;
      joined += t.text;
    }
    EXPECT_EQ(joined, body);
  }
}

TEST(Tokenize, ExampleTweetOffsetFidelity) {
  auto gaz = diseases();
  const auto& text = testing_util::kExampleTweet;
  auto seq = tokenize(text, &gaz, "ex");
  expect_offset_fidelity(text, seq);
  // Rebuild the text from tokens and skipped characters.
  const auto u = utf8_to_u32(text);
  std::u32string rebuilt;
  std::size_t pos = 0;
  for (const auto& t : seq.tokens) {
    for (; pos < t.begin; ++pos) {
      EXPECT_TRUE(is_space(u[pos]));
      rebuilt.push_back(u[pos]);
    }
    rebuilt += utf8_to_u32(t.text);
    pos = t.end;
  }
  rebuilt += u.substr(pos);
  EXPECT_EQ(u32_to_utf8(rebuilt), text);
}

TEST(TokenizeCorpus, SplitFlag) {
  auto gaz = diseases();
  auto corpus = validate_corpus({{"1", "#nosolohaycovid"}, {"2", "#Epilepsia y @RetoDravet"}}, {});
  auto off = tokenize_corpus(corpus, gaz, false);
  EXPECT_EQ(texts(off[0].tokens), (std::vector<std::string>{"#", "nosolohaycovid"}));
  auto on = tokenize_corpus(corpus, gaz, true);
  EXPECT_EQ(texts(on[0].tokens), (std::vector<std::string>{"#", "nosolohay", "covid"}));
  EXPECT_EQ(texts(on[1].tokens), (std::vector<std::string>{"#", "Epilepsia", "y", "@", "Reto", "Dravet"}));
  EXPECT_EQ(on[1].tokens[0].kind, TokenKind::hashtag_sigil);
}

TEST(TokenizeCorpus, EmptyGazetteerEqualsDisabled) {
  GazetteerSet empty;
  std::mt19937 rng(9);
  const std::vector<std::string> parts = {"#", "@", "covid", "Gripe", " ", "_", "9", "!", "ÉPOCA", "http://x.y "};
  std::vector<Tweet> tweets;
  for (int i = 0; i < 200; ++i) {
    std::string s = "x";
    for (int k = std::uniform_int_distribution<int>(1, 10)(rng); k > 0; --k)
      s += parts[std::uniform_int_distribution<std::size_t>(0, parts.size() - 1)(rng)];
    tweets.push_back({std::to_string(i), s});
  }
  auto corpus = validate_corpus(tweets, {});
  auto a = tokenize_corpus(corpus, empty, true);
  auto b = tokenize_corpus(corpus, empty, false);
  EXPECT_EQ(a, b);
  for (std::size_t i = 0; i < a.size(); ++i) expect_offset_fidelity(tweets[i].text, a[i]);
  EXPECT_EQ(a, tokenize_corpus(corpus, empty, true));
}

TEST(Tokenize, TokensTsv) {
  auto seq = tokenize("a\\b", nullptr, "t\t1");
  EXPECT_EQ(format_tokens({seq}), "t\\t1\t0\t1\tword\ta\nt\\t1\t1\t2\tpunct\t\\\\\nt\\t1\t2\t3\tword\tb\n");
}
