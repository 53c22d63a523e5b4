#pragma once

// End-to-end paths: tokens -> features -> encoder -> tags -> spans, the
// training loop with dev-F1 early stopping, and the four-variant ablation.

#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "disner/biocodec.hpp"
#include "disner/checkpoint.hpp"
#include "disner/eval.hpp"
#include "disner/features.hpp"
#include "disner/neural/adam.hpp"
#include "disner/neural/encoder.hpp"
#include "disner/tokenizer.hpp"

namespace disner {

struct VariantSettings {
  bool use_flags = true;
  bool split_enabled = true;
  bool use_encoder = true;
};

// `split_enabled` can only switch gazetteer splitting off; the variant decides
// the rest.
inline VariantSettings settings_for(Variant v, bool split_enabled = true) {
  switch (v) {
    case Variant::sub: return {true, split_enabled, true};
    case Variant::no_gaz: return {false, split_enabled, true};
    case Variant::no_tok: return {true, false, true};
    case Variant::base: return {false, false, false};
  }
  return {};
}

// Applies a variant to a base spec: flag blocks, splitting and encoder depth,
// with d_model following the feature width when flags are dropped.
inline ModelSpec spec_for_variant(ModelSpec base, Variant v) {
  const auto s = settings_for(v, base.split_enabled);
  base.variant = v;
  base.use_flags = s.use_flags;
  base.split_enabled = s.split_enabled;
  if (!s.use_flags) base.encoder.d_model = base.d_embed;
  if (!s.use_encoder) base.encoder.n_layers = 0;
  return base;
}

inline std::vector<std::string> spec_problems(const ModelSpec& spec) {
  auto p = spec.encoder.problems();
  if (spec.d_embed == 0) p.push_back("d_embed must be >= 1");
  if (spec.expected_d_model() != spec.encoder.d_model) {
    if (spec.use_flags)
      p.push_back("d_embed + 6 != d_model (" + std::to_string(spec.d_embed) + "+6=" +
                  std::to_string(spec.d_embed + kFlagColumns) + ", d_model " + std::to_string(spec.encoder.d_model) +
                  ")");
    else
      p.push_back("d_embed != d_model without flag blocks (" + std::to_string(spec.d_embed) + " vs " +
                  std::to_string(spec.encoder.d_model) + ")");
  }
  return p;
}

// Model input for one tokenized tweet. For the lookup provider the embedding
// block is left zero and filled from the trainable table at forward time.
inline nn::SequenceInput<double> make_input(const TokenSequence& seq, const GazetteerSet& gaz, const ModelSpec& spec,
                                            const EmbeddingProvider* provider) {
  nn::SequenceInput<double> in;
  MatrixD h;
  if (spec.provider == ProviderKind::lookup) {
    h = MatrixD::Zero(static_cast<Eigen::Index>(seq.size()), static_cast<Eigen::Index>(spec.d_embed));
    in.lookup_ids = lookup_ids(seq, spec.vocab);
  } else {
    if (provider == nullptr) throw ValidationError("an embedding provider is required for " +
                                                   std::string(to_string(spec.provider)) + " embeddings");
    if (provider->d_embed() != spec.d_embed)
      throw ValidationError("provider d_embed " + std::to_string(provider->d_embed()) + " != model d_embed " +
                            std::to_string(spec.d_embed));
    h = provider->embed(seq);
  }
  in.features = spec.use_flags ? assemble(h, gazetteer_flags(seq, gaz)) : h;
  return in;
}

inline std::vector<Tag> predict_tags(const nn::SequenceInput<double>& in, const Checkpoint& ck) {
  if (in.features.rows() == 0) return {};
  return nn::argmax_tags(nn::forward(in, ck.params, ck.spec.encoder).logits);
}

// Span sets for every tweet, in corpus order.
inline std::vector<SpanSet> predict_corpus(const Checkpoint& ck, const Corpus& corpus, const GazetteerSet& gaz,
                                           const EmbeddingProvider* provider) {
  std::vector<SpanSet> out;
  out.reserve(corpus.size());
  for (const auto& seq : tokenize_corpus(corpus, gaz, ck.spec.split_enabled)) {
    const auto tags = predict_tags(make_input(seq, gaz, ck.spec, provider), ck);
    out.push_back(decode(seq, TagSequence{seq.tweet_id, tags}));
  }
  return out;
}

inline std::vector<SpanSet> gold_spans(const Corpus& corpus) {
  std::vector<SpanSet> out;
  for (const auto& t : corpus.tweets()) {
    SpanSet s{t.id, {}};
    for (const auto& m : corpus.mentions(t.id)) s.spans.insert({m.begin, m.end});
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct TrainOptions {
  nn::AdamConfig adam;
  std::size_t max_epochs = 10;
  std::size_t patience = 3;  // 0 disables early stopping
  uint64_t seed = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0;
  double dev_p = 0, dev_r = 0, dev_f1 = 0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochRecord> history;
  std::vector<std::string> warnings;
  EvalReport best_dev;
  std::size_t best_epoch = 0;
};

// One tweet per Adam step, seeded shuffling, dev strict F1 after every
// epoch; the best-F1 parameters are returned.
inline TrainResult train(const Corpus& train_corpus, const Corpus& dev_corpus, const GazetteerSet& gaz, ModelSpec spec,
                         const EmbeddingProvider* provider, const TrainOptions& opt,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  spec.encoder.d_ff = spec.encoder.ff_width();
  spec.encoder.seed = opt.seed;
  if (auto p = spec_problems(spec); !p.empty()) throw ValidationError(std::move(p));
  if (opt.patience > 0 && opt.max_epochs > 0 && dev_corpus.size() == 0)
    throw ValidationError("early stopping needs a non-empty dev split");

  TrainResult r;
  const auto train_seqs = tokenize_corpus(train_corpus, gaz, spec.split_enabled);
  const auto dev_seqs = tokenize_corpus(dev_corpus, gaz, spec.split_enabled);
  if (spec.provider == ProviderKind::lookup) spec.vocab = build_vocabulary(train_seqs);

  std::vector<nn::SequenceInput<double>> inputs;
  std::vector<std::vector<Tag>> gold;
  for (const auto& seq : train_seqs) {
    auto enc = encode(seq, train_corpus.mentions(seq.tweet_id));
    r.warnings.insert(r.warnings.end(), enc.warnings.begin(), enc.warnings.end());
    gold.push_back(std::move(enc.tags.tags));
    inputs.push_back(make_input(seq, gaz, spec, provider));
  }
  std::vector<nn::SequenceInput<double>> dev_inputs;
  for (const auto& seq : dev_seqs) dev_inputs.push_back(make_input(seq, gaz, spec, provider));
  const auto dev_gold = gold_spans(dev_corpus);

  Checkpoint current{spec, nn::init_params<double>(spec.encoder,
                                                   spec.provider == ProviderKind::lookup ? spec.vocab.size() + 1 : 0,
                                                   spec.d_embed)};
  r.best = current;
  nn::AdamState<double> adam(current.params);
  nn::Rng rng(opt.seed ^ 0x7a11ULL);
  std::vector<std::size_t> order(inputs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double best_f1 = -1;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= opt.max_epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0;
    std::size_t tokens = 0;
    for (auto i : order) {
      const auto& in = inputs[i];
      if (in.features.rows() == 0) continue;
      const auto st = nn::forward(in, current.params, spec.encoder, true, &rng);
      loss_sum += nn::token_cross_entropy(st.logits, std::span<const Tag>(gold[i])) * static_cast<double>(gold[i].size());
      tokens += gold[i].size();
      const auto grad = nn::backward(st, in, current.params, spec.encoder, std::span<const Tag>(gold[i]));
      nn::adam_step(current.params, adam, grad, opt.adam);
    }

    std::vector<SpanSet> pred;
    pred.reserve(dev_seqs.size());
    for (std::size_t k = 0; k < dev_seqs.size(); ++k)
      pred.push_back(decode(dev_seqs[k], TagSequence{dev_seqs[k].tweet_id, predict_tags(dev_inputs[k], current)}));
    const auto report = strict_prf(pred, dev_gold);
    if (report.tp + report.fp + report.fn == 0)
      r.warnings.push_back("epoch " + std::to_string(epoch) + ": dev F1 undefined (no gold, no predictions), using 0");

    EpochRecord rec{epoch, tokens ? loss_sum / static_cast<double>(tokens) : 0.0, report.precision, report.recall,
                    report.f1};
    r.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (report.f1 > best_f1) {
      best_f1 = report.f1;
      since_best = 0;
      r.best = current;
      r.best_dev = report;
      r.best_epoch = epoch;
    } else if (opt.patience > 0 && ++since_best >= opt.patience) {
      break;
    }
  }
  return r;
}

inline std::string format_history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,loss,dev_p,dev_r,dev_f1\n";
  char buf[160];
  for (const auto& e : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.6f,%.6f,%.6f\n", e.epoch, e.loss, e.dev_p, e.dev_r, e.dev_f1);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ablation

struct AblationRow {
  Variant variant;
  EvalReport dev;
};

inline constexpr std::array<Variant, 4> kAblationVariants = {Variant::base, Variant::no_gaz, Variant::no_tok,
                                                             Variant::sub};

// Trains every variant with the same seed and budget and reports the dev
// scores of each variant's best checkpoint.
inline std::vector<AblationRow> ablation_run(const Corpus& train_corpus, const Corpus& dev_corpus,
                                             const GazetteerSet& gaz, const EmbeddingProvider* provider,
                                             const ModelSpec& base, const TrainOptions& opt) {
  std::vector<AblationRow> rows;
  for (auto v : kAblationVariants) {
    auto spec = spec_for_variant(base, v);
    if (auto p = spec_problems(spec); !p.empty()) {
      for (auto& s : p) s = "variant " + std::string(to_string(v)) + ": " + s;
      throw ValidationError(std::move(p));
    }
  }
  for (auto v : kAblationVariants) {
    auto result = train(train_corpus, dev_corpus, gaz, spec_for_variant(base, v), provider, opt);
    rows.push_back({v, result.best_dev});
  }
  return rows;
}

inline std::string format_ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "model,f1,precision,recall\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f\n", std::string(to_string(r.variant)).c_str(), r.dev.f1,
                  r.dev.precision, r.dev.recall);
    out += buf;
  }
  return out;
}

}  // namespace disner
