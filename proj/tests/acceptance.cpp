// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>

#include "disner/neural/grad_check.hpp"
#include "disner/pipeline.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"
#include "test_util.hpp"

using namespace disner;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int number, const std::string& name, double budget_seconds, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (budget_seconds > 0 && secs > budget_seconds) {
    o.pass = false;
    o.detail += "; over time budget";
  }
  char timing[64];
  std::snprintf(timing, sizeof timing, " [%.1fs", secs);
  std::string t = timing;
  if (budget_seconds > 0) t += " / " + std::to_string(static_cast<int>(budget_seconds)) + "s";
  t += "]";
  std::printf("%s %d %s: %s%s\n", o.pass ? "PASS" : "FAIL", number, name.c_str(), o.detail.c_str(), t.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// --------------------------------------------------------------------------

Outcome gradient_fidelity() {
  nn::EncoderConfig cfg;
  cfg.d_model = 16;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.d_ff = 32;
  double worst = 0;
  std::string where;
  std::size_t coords = 0;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    nn::GradCheckOptions opt;
    opt.sequence_length = 5;
    opt.epsilon = 1e-5;
    opt.min_coordinates = 200;
    opt.seed = seed;
    const auto r = nn::grad_check(cfg, opt);
    if (r.coordinates < 200 || r.per_group.size() != 34) return {false, "coordinate sample too small"};
    coords += r.coordinates;
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      where = r.worst_parameter + " (seed " + std::to_string(seed) + ")";
    }
  }
  return {worst <= 1e-4, "max relative error " + fmt("%.2e", worst) + " at " + where + " <= 1e-4 over " +
                             std::to_string(coords) + " coordinates, 5 seeds"};
}

Outcome overfit_oracle() {
  std::mt19937 rng(2);
  std::set<std::string> used;
  auto diseases = synthetic::make_words(8, rng, used);
  for (int k = 0; k < 4; ++k) {
    auto pair = synthetic::make_words(2, rng, used);
    diseases.push_back(pair[0] + " " + pair[1]);
  }
  const auto fillers = synthetic::make_words(40, rng, used);
  const auto corpus = synthetic::make_corpus(50, diseases, fillers, rng, "o").validated();
  const GazetteerSet gaz;
  const auto vocab = build_vocabulary(tokenize_corpus(corpus, gaz, true));
  if (vocab.size() > 60) return {false, "vocabulary has " + std::to_string(vocab.size()) + " tokens"};

  ModelSpec spec;
  spec.provider = ProviderKind::lookup;
  spec.d_embed = 26;
  spec.encoder.d_model = 32;
  spec.encoder.n_heads = 4;
  spec.encoder.n_layers = 2;
  TrainOptions opt;
  opt.adam.lr = 1e-3;
  opt.max_epochs = 300;
  opt.patience = 20;
  opt.seed = 1;
  const auto r = train(corpus, corpus, gaz, spec, nullptr, opt);
  const auto report = strict_prf(predict_corpus(r.best, corpus, gaz, nullptr), gold_spans(corpus), &corpus);
  return {report.f1 >= 0.99, "training-set strict F1 " + fmt("%.4f", report.f1) + " >= 0.99 after " +
                                 std::to_string(r.history.size()) + " epochs (vocab " + std::to_string(vocab.size()) +
                                 ", " + std::to_string(report.tp + report.fn) + " gold mentions)"};
}

Outcome gazetteer_ablation() {
  std::mt19937 rng(3);
  std::set<std::string> used;
  const auto train_dis = synthetic::make_words(20, rng, used);
  const auto dev_dis = synthetic::make_words(20, rng, used);
  const auto train_fill = synthetic::make_words(30, rng, used);
  const auto dev_fill = synthetic::make_words(30, rng, used);
  const auto train_c = synthetic::make_corpus(60, train_dis, train_fill, rng, "tr").validated();
  const auto dev_c = synthetic::make_corpus(30, dev_dis, dev_fill, rng, "dv").validated();
  std::vector<std::string> members = train_dis;
  members.insert(members.end(), dev_dis.begin(), dev_dis.end());
  const GazetteerSet gaz({{"umls", members}});

  ModelSpec base;
  base.provider = ProviderKind::hash;
  base.d_embed = 26;
  base.hash_seed = 9;
  base.encoder.d_model = 32;
  base.encoder.n_heads = 2;
  base.encoder.n_layers = 2;
  TrainOptions opt;
  opt.adam.lr = 1e-3;
  opt.max_epochs = 20;
  opt.patience = 5;
  opt.seed = 4;
  const HashEmbedding provider(base.d_embed, base.hash_seed);
  const auto rows = ablation_run(train_c, dev_c, gaz, &provider, base, opt);
  double sub = -1, nogaz = -1;
  std::string table;
  for (const auto& row : rows) {
    if (row.variant == Variant::sub) sub = row.dev.f1;
    if (row.variant == Variant::no_gaz) nogaz = row.dev.f1;
    table += std::string(table.empty() ? "" : ", ") + std::string(to_string(row.variant)) + " " + fmt("%.3f", row.dev.f1);
  }
  return {rows.size() == 4 && sub - nogaz >= 0.2,
          "dev F1 sub - no-gaz = " + fmt("%.3f", sub - nogaz) + " >= 0.2 (" + table + ")"};
}

std::vector<std::string> texts(const TokenSequence& s) {
  std::vector<std::string> out;
  for (const auto& t : s.tokens) out.push_back(t.text);
  return out;
}

Outcome tokenizer_goldens() {
  std::vector<std::string> bad;
  auto expect = [&](const std::string& what, const std::vector<std::string>& got,
                    const std::vector<std::string>& want) {
    if (got != want) bad.push_back(what);
  };
  expect("#InvestigaEpilepsia", texts(tokenize("#InvestigaEpilepsia")), {"#", "Investiga", "Epilepsia"});
  const GazetteerSet covid({{std::string("umls"), std::vector<std::string>{"covid"}}});
  expect("#nosolohaycovid", texts(tokenize("#nosolohaycovid", &covid)), {"#", "nosolohay", "covid"});
  expect("@RetoDravet", texts(tokenize("@RetoDravet")), {"@", "Reto", "Dravet"});

  const auto u = utf8_to_u32(testing_util::kExampleTweet);
  const auto seq = tokenize(testing_util::kExampleTweet);
  for (const auto& t : seq.tokens)
    if (t.end > u.size() || u32_to_utf8(std::u32string_view(u).substr(t.begin, t.end - t.begin)) != t.text) {
      bad.push_back("offset of \"" + t.text + "\"");
      break;
    }
  const auto tw = texts(seq);
  for (const char* piece : {"Investiga", "Epilepsia", "Reto", "Dravet", "Fundacion", "epilepsia"})
    if (std::find(tw.begin(), tw.end(), piece) == tw.end()) bad.push_back(std::string("missing ") + piece);
  std::string detail = bad.empty() ? "3 golden splits exact, " + std::to_string(seq.size()) +
                                         " example tokens equal their tweet slices"
                                   : "mismatch: " + bad.front();
  return {bad.empty(), detail};
}

std::string random_word(std::mt19937& rng, std::size_t min_len, std::size_t max_len, std::string_view alphabet) {
  std::uniform_int_distribution<std::size_t> len(min_len, max_len), ch(0, alphabet.size() - 1);
  std::string w;
  for (auto n = len(rng); n > 0; --n) w.push_back(alphabet[ch(rng)]);
  return w;
}

Outcome matcher_oracle() {
  std::mt19937 rng(77);
  std::size_t substring_bad = 0, substring_hits = 0, phrase_bad = 0, flagged = 0;
  for (int inst = 0; inst < 1000; ++inst) {
    const std::string alphabet = inst % 2 ? "abc" : "abcd";
    std::vector<std::pair<std::string, std::vector<std::string>>> lists;
    const int nlists = std::uniform_int_distribution<int>(1, 4)(rng);
    const int total = std::uniform_int_distribution<int>(nlists, 50)(rng);
    for (int l = 0; l < nlists; ++l) {
      std::vector<std::string> terms;
      for (int k = 0; k < total / nlists; ++k) terms.push_back(random_word(rng, 1, 8, alphabet));
      lists.emplace_back("g" + std::to_string(l), terms);
    }
    const auto word = random_word(rng, 0, 30, alphabet);
    const GazetteerSet set(lists);
    const auto got = set.longest_substring_match(word);
    const auto want = oracle::longest_substring(word, lists);
    if (got.has_value() != want.has_value() ||
        (got && (got->begin != want->begin || got->end != want->end || got->gazetteer != want->list)))
      ++substring_bad;
    substring_hits += got.has_value();

    std::vector<std::string> terms;
    for (int k = std::uniform_int_distribution<int>(1, 50)(rng); k > 0; --k) {
      std::string term;
      for (int w = std::uniform_int_distribution<int>(1, 4)(rng); w > 0; --w)
        term += (term.empty() ? "" : " ") + random_word(rng, 1, 2, "ab");
      terms.push_back(term);
    }
    std::vector<std::string> tokens;
    for (int k = std::uniform_int_distribution<int>(0, 12)(rng); k > 0; --k) tokens.push_back(random_word(rng, 1, 2, "ab"));
    const Gazetteer g("p", 0, terms);
    const auto flags = match_phrase_flags(std::span<const std::string>(tokens), g);
    if (flags != oracle::phrase_flags(tokens, g.terms())) ++phrase_bad;
    flagged += static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
  }
  return {substring_bad == 0 && phrase_bad == 0,
          std::to_string(1000 - substring_bad) + "/1000 substring and " + std::to_string(1000 - phrase_bad) +
              "/1000 phrase instances agree (" + std::to_string(substring_hits) + " substring hits, " +
              std::to_string(flagged) + " flagged tokens)"};
}

Outcome bio_roundtrip() {
  std::mt19937 rng(6);
  std::size_t bad = 0, mentions = 0;
  for (int inst = 0; inst < 10000; ++inst) {
    // Random text; tokens come from the real tokenizer.
    static const std::vector<std::string> pieces = {"gripe", "tos", "#CovidPersistente", "@Fundacion", "1", ",",
                                                    "épocas", "!", "http://x.y/z", "ELA", "  ", "\n"};
    std::string text;
    for (int k = std::uniform_int_distribution<int>(1, 14)(rng); k > 0; --k)
      text += pieces[std::uniform_int_distribution<std::size_t>(0, pieces.size() - 1)(rng)] + " ";
    const auto seq = tokenize(text, nullptr, "t");
    const auto n = seq.size();
    std::vector<Mention> ms;
    std::set<Span> want;
    for (std::size_t i = 0; i < n;) {
      if (std::uniform_int_distribution<int>(0, 2)(rng) == 0) {
        const auto len = std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(3, n - i))(rng);
        const Span s{seq.tokens[i].begin, seq.tokens[i + len - 1].end};
        ms.push_back({"t", s.begin, s.end, "ENFERMEDAD", ""});
        want.insert(s);
        i += len + 1;
      } else {
        ++i;
      }
    }
    mentions += ms.size();
    const auto enc = encode(seq, ms);
    if (!enc.warnings.empty() || decode(seq, enc.tags).spans != want) ++bad;
  }

  // Orphan I starts a span as if it were B.
  TokenSequence four{"t", {}};
  for (std::size_t i = 0; i < 4; ++i) four.tokens.push_back({"w", 2 * i, 2 * i + 1, TokenKind::word});
  auto dec = [&](std::vector<Tag> tags) { return decode(four, TagSequence{"t", std::move(tags)}).spans; };
  using T = Tag;
  const bool orphans = dec({T::O, T::I, T::I, T::O}) == std::set<Span>{{2, 5}} &&
                       dec({T::I, T::O, T::B, T::I}) == std::set<Span>{{0, 1}, {4, 7}} &&
                       dec({T::B, T::O, T::I, T::O}) == std::set<Span>{{0, 1}, {4, 5}};
  return {bad == 0 && orphans, std::to_string(10000 - bad) + "/10000 configurations (" + std::to_string(mentions) +
                                   " mentions) round-trip; orphan-I repair " + (orphans ? "ok" : "WRONG")};
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

std::vector<std::tuple<std::string, std::size_t, std::size_t>> flatten(const std::vector<SpanSet>& sets) {
  std::vector<std::tuple<std::string, std::size_t, std::size_t>> out;
  for (const auto& s : sets)
    for (const auto& sp : s.spans) out.emplace_back(s.tweet_id, sp.begin, sp.end);
  return out;
}

Outcome scorer_properties() {
  std::mt19937 rng(8);
  std::size_t oracle_bad = 0, symmetry_bad = 0, mono_bad = 0;
  for (int inst = 0; inst < 1000; ++inst) {
    const auto pred = random_sets(rng), gold = random_sets(rng);
    const auto r = strict_prf(pred, gold);
    const auto c = oracle::strict_counts(flatten(pred), flatten(gold));
    if (r.tp != c.tp || r.fp != c.fp || r.fn != c.fn) ++oracle_bad;
    for (double v : {r.precision, r.recall, r.f1})
      if (v < 0 || v > 1) ++oracle_bad;
    const auto s = strict_prf(gold, pred);
    if (s.precision != r.recall || s.recall != r.precision || std::abs(s.f1 - r.f1) > 1e-15) ++symmetry_bad;

    for (const auto& g : gold)
      for (const auto& sp : g.spans) {
        auto more = pred;
        more.push_back({g.tweet_id, {sp}});
        const auto a = strict_prf(more, gold);
        if (a.precision < r.precision || a.recall < r.recall || a.f1 < r.f1) ++mono_bad;
      }
    auto wrong = pred;
    wrong.push_back({"1", {{50, 51}}});
    const auto w = strict_prf(wrong, gold);
    if (w.precision > r.precision || w.recall > r.recall) ++mono_bad;
  }
  const auto one = [](std::set<Span> s) { return std::vector<SpanSet>{{"1", std::move(s)}}; };
  const auto e1 = strict_prf(one({{0, 5}}), one({{0, 5}}));
  const auto e2 = strict_prf(one({{0, 5}, {7, 9}}), one({{0, 5}, {10, 12}}));
  const auto e3 = strict_prf(one({{0, 4}}), one({{0, 5}}));
  const bool worked = e1.precision == 1 && e1.recall == 1 && e1.f1 == 1 && e2.tp == 1 && e2.fp == 1 && e2.fn == 1 &&
                      e2.precision == 0.5 && e2.recall == 0.5 && e2.f1 == 0.5 && e3.precision == 0 &&
                      e3.recall == 0 && e3.f1 == 0;
  return {oracle_bad + symmetry_bad + mono_bad == 0 && worked,
          "oracle mismatches " + std::to_string(oracle_bad) + ", symmetry " + std::to_string(symmetry_bad) +
              ", monotonicity " + std::to_string(mono_bad) + " over 1000 instances; worked examples " +
              fmt("%.1f", e1.f1) + " / " + fmt("%.1f", e2.f1) + " / " + fmt("%.1f", e3.f1)};
}

bool shape_chain(std::size_t d_embed, std::size_t n_layers, std::size_t n_heads, std::size_t t, uint64_t seed) {
  TokenSequence seq{"s", {}};
  for (std::size_t i = 0; i < t; ++i) seq.tokens.push_back({"w" + std::to_string(i % 5), i, i + 1, TokenKind::word});
  const auto h = hash_embed(seq, d_embed, seed);
  const GazetteerSet gaz({{"umls", {"w1"}}, {"silver", {"w2 w3"}}});
  const auto z = assemble(h, gazetteer_flags(seq, gaz));
  nn::EncoderConfig cfg;
  cfg.d_model = d_embed + kFlagColumns;
  cfg.n_layers = n_layers;
  cfg.n_heads = n_heads;
  cfg.d_ff = 16;
  cfg.seed = seed;
  const auto params = nn::init_params<double>(cfg);
  const auto y = nn::encoder_forward(z, params, cfg);
  const auto logits = nn::classify(y, params);
  const auto T = static_cast<Eigen::Index>(t), D = static_cast<Eigen::Index>(d_embed);
  return h.rows() == T && h.cols() == D && z.rows() == T && z.cols() == D + 6 && y.rows() == T &&
         y.cols() == D + 6 && logits.rows() == T && logits.cols() == 3;
}

Outcome shape_contract() {
  std::mt19937 rng(10);
  std::size_t checked = 0, bad = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const std::size_t heads = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
    // d_model = d_embed + 6 must be a multiple of heads.
    std::size_t d_model = heads * std::uniform_int_distribution<std::size_t>(1, 12)(rng);
    while (d_model < 7) d_model += heads;
    const std::size_t layers = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, 20)(rng);
    ++checked;
    if (!shape_chain(d_model - 6, layers, heads, t, static_cast<uint64_t>(inst))) ++bad;
  }
  const bool big = shape_chain(1024, 1, 2, 3, 1);
  const auto z1024 = assemble(MatrixD::Zero(3, 1024), std::array<std::vector<bool>, 3>{std::vector<bool>(3, false),
                                                                                         std::vector<bool>(3, true),
                                                                                         std::vector<bool>(3, false)});
  return {bad == 0 && big && z1024.cols() == 1030,
          std::to_string(checked - bad) + "/" + std::to_string(checked) + " random configs keep t x d -> t x (d+6) -> "
              "t x (d+6) -> t x 3; d_embed 1024 gives " + std::to_string(z1024.cols()) + " columns"};
}

Outcome end_to_end_determinism() {
  testing_util::TempDir dir;
  std::mt19937 rng(12);
  std::set<std::string> used;
  const auto diseases = synthetic::make_words(8, rng, used);
  const auto fillers = synthetic::make_words(20, rng, used);
  const auto c = synthetic::make_corpus(30, diseases, fillers, rng, "t");
  dir.file("tweets.tsv", format_tweets(c.tweets));
  dir.file("mentions.tsv", format_mentions(c.mentions));
  std::string terms;
  for (const auto& d : diseases) terms += d + "\n";
  dir.file("umls.txt", terms);
  dir.file("run.ini",
           "[paths]\ntweets = tweets.tsv\nmentions = mentions.tsv\ngazetteers = umls:umls.txt\n\n"
           "[features]\nprovider = hash\nd_embed = 26\n\n[encoder]\nd_model = 32\nn_layers = 2\nn_heads = 4\n"
           "dropout = 0.1\n\n[train]\nlr = 1e-3\nmax_epochs = 4\npatience = 0\nseed = 11\ndev_fraction = 0.2\n");
  for (const char* out : {"a", "b"}) {
    const std::string cmd = "cd '" + dir.path() + "' && '" DISNER_CLI "' train -c run.ini paths.output_dir=" + out +
                            " >/dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    if (!WIFEXITED(raw) || WEXITSTATUS(raw) != 0) return {false, std::string("train run ") + out + " failed"};
  }
  const auto ck_a = read_file(dir.path("a/checkpoint/model.ckpt")), ck_b = read_file(dir.path("b/checkpoint/model.ckpt"));
  const auto h_a = read_file(dir.path("a/history.csv")), h_b = read_file(dir.path("b/history.csv"));
  const bool same = ck_a == ck_b && h_a == h_b && !ck_a.empty();
  return {same, std::string("checkpoints (") + std::to_string(ck_a.size()) + " bytes) and history CSVs " +
                    (same ? "byte-identical" : "DIFFER") + " across two train runs"};
}

}  // namespace

int main() {
  criterion(1, "gradient fidelity", 30, gradient_fidelity);
  criterion(2, "overfit oracle", 300, overfit_oracle);
  criterion(3, "gazetteer ablation direction", 600, gazetteer_ablation);
  criterion(4, "tokenizer golden tests", 0, tokenizer_goldens);
  criterion(5, "matcher oracle equivalence", 60, matcher_oracle);
  criterion(6, "BIO roundtrip", 0, bio_roundtrip);
  criterion(7, "scorer properties", 0, scorer_properties);
  criterion(8, "shape contract", 0, shape_contract);
  criterion(9, "end-to-end determinism", 0, end_to_end_determinism);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
