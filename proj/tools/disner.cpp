// disner: command-line front end.
//
//   disner <command> [-c config] [section.key=value ...]
//
// Exit status: 0 success, 1 invalid input or configuration, 2 runtime failure.

#include <openssl/sha.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "disner/pipeline.hpp"

namespace fs = std::filesystem;
namespace pt = boost::property_tree;
using namespace disner;

namespace {

struct Key {
  const char* section;
  const char* name;
  const char* fallback;
  const char* help;
};

const std::vector<Key> kKeys = {
    {"paths", "tweets", "", "tweets TSV (id, text)"},
    {"paths", "mentions", "", "gold mentions TSV for `tweets`"},
    {"paths", "dev_tweets", "", "dev tweets TSV; when empty a dev split is held out of `tweets`"},
    {"paths", "dev_mentions", "", "gold mentions TSV for `dev_tweets`"},
    {"paths", "gazetteers", "", "term lists in priority order, `name:path,name:path`"},
    {"paths", "gazetteer_cache", "", "compiled gazetteer cache; read instead of `gazetteers` when set"},
    {"paths", "embeddings", "", "embedding rows for the file provider"},
    {"paths", "checkpoint", "", "checkpoint read by predict (default <output_dir>/checkpoint/model.ckpt)"},
    {"paths", "predictions", "", "predicted mentions TSV read by evaluate"},
    {"paths", "output_dir", "disner-out", "directory for every output file"},
    {"features", "provider", "hash", "embedding provider: hash, lookup or file"},
    {"features", "d_embed", "26", "embedding width"},
    {"tokenizer", "split_enabled", "true", "split hashtag and mention bodies at gazetteer matches"},
    {"model", "variant", "sub", "sub, no-gaz, no-tok or base"},
    {"encoder", "d_model", "32", "model width; d_embed + 6 when flag blocks are used"},
    {"encoder", "n_layers", "2", "encoder layers"},
    {"encoder", "n_heads", "4", "attention heads per layer"},
    {"encoder", "d_ff", "0", "feed-forward width, 0 means 4 * d_model"},
    {"encoder", "dropout", "0.1", "dropout probability during training"},
    {"encoder", "max_sequence_length", "512", "longest accepted token sequence"},
    {"train", "lr", "1e-5", "Adam learning rate"},
    {"train", "beta1", "0.9", "Adam beta1"},
    {"train", "beta2", "0.999", "Adam beta2"},
    {"train", "eps", "1e-8", "Adam epsilon"},
    {"train", "max_epochs", "10", "epoch budget"},
    {"train", "patience", "3", "epochs without dev F1 gain before stopping, 0 disables"},
    {"train", "seed", "0", "seed for initialization, shuffling, dropout, dev split and hash embeddings"},
    {"train", "dev_fraction", "0.1", "share of `tweets` held out when no dev files are given"},
};

std::string full_name(const Key& k) { return std::string(k.section) + "." + k.name; }

std::string keys_help() {
  std::string out = "Configuration keys (file sections or section.key=value overrides):\n";
  for (const auto& k : kKeys) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "  %-30s %s (default \"%s\")\n", full_name(k).c_str(), k.help, k.fallback);
    out += buf;
  }
  out += "A run-manifest may be passed back as the config; its [digests] section is checked against the inputs.\n";
  return out;
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), md);
  std::string out;
  char buf[3];
  for (unsigned char c : md) {
    std::snprintf(buf, sizeof buf, "%02x", c);
    out += buf;
  }
  return out;
}

class Config {
 public:
  Config() {
    for (const auto& k : kKeys) values_[full_name(k)] = k.fallback;
  }

  void load_file(const std::string& path) {
    if (!fs::is_regular_file(path)) throw ValidationError("config file not found: " + path);
    pt::ptree tree;
    try {
      pt::read_ini(path, tree);
    } catch (const pt::ini_parser_error& e) {
      throw ParseError(e.message(), e.line());
    }
    std::vector<std::string> issues;
    for (const auto& [section, body] : tree) {
      if (body.empty() && !body.data().empty()) {
        issues.push_back("key \"" + section + "\" outside a section");
        continue;
      }
      for (const auto& [name, value] : body) {
        if (section == "digests") {
          digests_[name] = value.data();
          continue;
        }
        const auto key = section + "." + name;
        if (!values_.count(key)) issues.push_back("unknown key " + key);
        else values_[key] = value.data();
      }
    }
    if (!issues.empty()) throw ValidationError(std::move(issues));
  }

  void apply_overrides(const std::vector<std::string>& overrides) {
    std::vector<std::string> issues;
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) {
        issues.push_back("override \"" + o + "\" is not key=value");
        continue;
      }
      const auto key = o.substr(0, eq);
      if (!values_.count(key)) issues.push_back("unknown key " + key);
      else values_[key] = o.substr(eq + 1);
    }
    if (!issues.empty()) throw ValidationError(std::move(issues));
  }

  const std::string& str(const std::string& key) const { return values_.at(key); }

  std::size_t size(const std::string& key) const {
    const auto& s = str(key);
    try {
      const auto v = parse_int(s, 0, key);
      if (v < 0) throw ValidationError(key + " must not be negative");
      return static_cast<std::size_t>(v);
    } catch (const ParseError&) {
      throw ValidationError(key + " must be a non-negative integer, got \"" + s + "\"");
    }
  }

  double real(const std::string& key) const {
    const auto& s = str(key);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
      throw ValidationError(key + " must be a finite number, got \"" + s + "\"");
    return v;
  }

  bool flag(const std::string& key) const {
    const auto& s = str(key);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ValidationError(key + " must be true or false, got \"" + s + "\"");
  }

  const std::map<std::string, std::string>& digests() const { return digests_; }

  std::string render() const {
    std::string out;
    std::string section;
    for (const auto& k : kKeys) {
      if (section != k.section) {
        if (!section.empty()) out += "\n";
        section = k.section;
        out += "[" + section + "]\n";
      }
      out += std::string(k.name) + " = " + str(full_name(k)) + "\n";
    }
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> digests_;
};

// ---------------------------------------------------------------------------

struct Run {
  std::string command;
  Config cfg;
  fs::path out_dir;
  std::vector<std::pair<std::string, std::string>> inputs;  // digest label, path

  std::vector<GazetteerSource> gazetteer_sources() const {
    std::vector<GazetteerSource> out;
    std::stringstream ss(cfg.str("paths.gazetteers"));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == item.size())
        throw ValidationError("paths.gazetteers entry \"" + item + "\" is not name:path");
      out.push_back({item.substr(0, colon), item.substr(colon + 1)});
    }
    return out;
  }

  std::string checkpoint_path() const {
    const auto& p = cfg.str("paths.checkpoint");
    return p.empty() ? (out_dir / "checkpoint" / "model.ckpt").string() : p;
  }

  void require(const std::string& key, std::vector<std::string>& issues) {
    const auto& p = cfg.str(key);
    if (p.empty()) issues.push_back(key + " is required for " + command);
    else input(key, p, issues);
  }

  void optional(const std::string& key, std::vector<std::string>& issues) {
    if (!cfg.str(key).empty()) input(key, cfg.str(key), issues);
  }

  void input(const std::string& label, const std::string& path, std::vector<std::string>& issues) {
    if (!fs::is_regular_file(path)) issues.push_back(label + ": no such file " + path);
    else inputs.emplace_back(label, path);
  }

  void uses_gazetteers(std::vector<std::string>& issues) {
    if (!cfg.str("paths.gazetteer_cache").empty() && command != "compile-gaz") {
      optional("paths.gazetteer_cache", issues);
      return;
    }
    for (const auto& s : gazetteer_sources()) input("gazetteer:" + s.name, s.path, issues);
  }

  GazetteerSet gazetteers() const {
    if (!cfg.str("paths.gazetteer_cache").empty() && command != "compile-gaz")
      return load_gazetteer_cache(cfg.str("paths.gazetteer_cache"));
    return compile(gazetteer_sources());
  }

  ModelSpec model_spec() const {
    ModelSpec base;
    base.provider = parse_provider_kind(cfg.str("features.provider"));
    base.d_embed = cfg.size("features.d_embed");
    base.hash_seed = cfg.size("train.seed");
    base.split_enabled = cfg.flag("tokenizer.split_enabled");
    auto& e = base.encoder;
    e.d_model = cfg.size("encoder.d_model");
    e.n_layers = cfg.size("encoder.n_layers");
    e.n_heads = cfg.size("encoder.n_heads");
    e.d_ff = cfg.size("encoder.d_ff");
    e.dropout = cfg.real("encoder.dropout");
    e.max_sequence_length = cfg.size("encoder.max_sequence_length");
    e.seed = base.hash_seed;
    return base;
  }

  TrainOptions train_options() const {
    TrainOptions o;
    o.adam.lr = cfg.real("train.lr");
    o.adam.beta1 = cfg.real("train.beta1");
    o.adam.beta2 = cfg.real("train.beta2");
    o.adam.eps = cfg.real("train.eps");
    o.max_epochs = cfg.size("train.max_epochs");
    o.patience = cfg.size("train.patience");
    o.seed = cfg.size("train.seed");
    return o;
  }

  std::unique_ptr<EmbeddingProvider> provider(const ModelSpec& spec) const {
    switch (spec.provider) {
      case ProviderKind::hash: return std::make_unique<HashEmbedding>(spec.d_embed, spec.hash_seed);
      case ProviderKind::lookup: return nullptr;
      case ProviderKind::file:
        return std::make_unique<FileEmbedding>(FileEmbedding::load(cfg.str("paths.embeddings"), spec.d_embed));
    }
    return nullptr;
  }

  // Every check that can fail without doing real work, so bad configurations
  // never leave partial outputs behind.
  void validate() {
    std::vector<std::string> issues;
    auto collect = [&](auto&& f) {
      try {
        f();
      } catch (const ValidationError& e) {
        issues.insert(issues.end(), e.issues().begin(), e.issues().end());
      }
    };
    const bool trains = command == "train" || command == "ablate";
    if (command == "compile-gaz") {
      collect([&] {
        if (gazetteer_sources().empty()) issues.push_back("paths.gazetteers is required for compile-gaz");
        uses_gazetteers(issues);
      });
    } else if (command == "tokenize") {
      require("paths.tweets", issues);
      collect([&] { uses_gazetteers(issues); });
    } else if (trains) {
      require("paths.tweets", issues);
      require("paths.mentions", issues);
      optional("paths.dev_tweets", issues);
      optional("paths.dev_mentions", issues);
      if (cfg.str("paths.dev_tweets").empty() != cfg.str("paths.dev_mentions").empty())
        issues.push_back("paths.dev_tweets and paths.dev_mentions must be given together");
      collect([&] { uses_gazetteers(issues); });
      collect([&] {
        const auto base = model_spec();
        if (base.provider == ProviderKind::file) require("paths.embeddings", issues);
        if (command == "train") {
          const auto spec = spec_for_variant(base, parse_variant(cfg.str("model.variant")));
          for (auto& p : spec_problems(spec)) issues.push_back(p);
        } else {
          for (auto v : kAblationVariants)
            for (auto& p : spec_problems(spec_for_variant(base, v)))
              issues.push_back("variant " + std::string(to_string(v)) + ": " + p);
        }
      });
      collect([&] {
        const auto o = train_options();
        if (!(o.adam.lr >= 0)) issues.push_back("train.lr must be >= 0");
        if (!(o.adam.beta1 >= 0 && o.adam.beta1 < 1)) issues.push_back("train.beta1 must be in [0, 1)");
        if (!(o.adam.beta2 >= 0 && o.adam.beta2 < 1)) issues.push_back("train.beta2 must be in [0, 1)");
        if (!(o.adam.eps > 0)) issues.push_back("train.eps must be > 0");
        const double f = cfg.real("train.dev_fraction");
        if (!(f >= 0 && f < 1)) issues.push_back("train.dev_fraction must be in [0, 1)");
      });
    } else if (command == "predict") {
      require("paths.tweets", issues);
      input("paths.checkpoint", checkpoint_path(), issues);
      optional("paths.embeddings", issues);
      collect([&] { uses_gazetteers(issues); });
    } else if (command == "evaluate") {
      require("paths.mentions", issues);
      require("paths.predictions", issues);
      optional("paths.tweets", issues);
    }
    for (const auto& [label, recorded] : cfg.digests()) {
      auto it = std::find_if(inputs.begin(), inputs.end(), [&](const auto& in) { return in.first == label; });
      if (it == inputs.end()) continue;
      if (sha256_hex(read_file(it->second)) != recorded)
        issues.push_back("input " + label + " (" + it->second + ") differs from the manifest digest");
    }
    if (!issues.empty()) throw ValidationError(std::move(issues));
  }

  void write(const std::string& name, const std::string& content) const {
    const auto p = out_dir / name;
    fs::create_directories(p.parent_path());
    write_file(p.string(), content);
  }

  void write_manifest() const {
    std::string out = "# disner " + command + "\n" + cfg.render() + "\n[digests]\n";
    for (const auto& [label, path] : inputs) out += label + " = " + sha256_hex(read_file(path)) + "\n";
    write("run-manifest", out);
  }
};

Corpus load_train_dev(const Run& run, Corpus& dev) {
  auto corpus = load_corpus(run.cfg.str("paths.tweets"), run.cfg.str("paths.mentions"));
  if (!run.cfg.str("paths.dev_tweets").empty()) {
    dev = load_corpus(run.cfg.str("paths.dev_tweets"), run.cfg.str("paths.dev_mentions"));
    return corpus;
  }
  const double frac = run.cfg.real("train.dev_fraction");
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  nn::Rng rng(run.cfg.size("train.seed") ^ 0xde5ULL);
  rng.shuffle(order);
  std::size_t n_dev = static_cast<std::size_t>(std::ceil(frac * static_cast<double>(order.size())));
  if (n_dev >= order.size() && n_dev > 0) throw ValidationError("dev split would leave no training tweets");
  std::vector<std::size_t> dev_pos(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_dev));
  std::vector<std::size_t> train_pos(order.begin() + static_cast<std::ptrdiff_t>(n_dev), order.end());
  std::sort(dev_pos.begin(), dev_pos.end());
  std::sort(train_pos.begin(), train_pos.end());
  dev = corpus.subset(dev_pos);
  return corpus.subset(train_pos);
}

void report_warnings(const std::vector<std::string>& warnings) {
  const std::size_t shown = std::min<std::size_t>(warnings.size(), 10);
  for (std::size_t i = 0; i < shown; ++i) std::cerr << "warning: " << warnings[i] << "\n";
  if (warnings.size() > shown) std::cerr << "warning: " << warnings.size() - shown << " more\n";
}

int compile_gaz(Run& run) {
  const auto set = run.gazetteers();
  const auto& cache = run.cfg.str("paths.gazetteer_cache");
  const auto path = cache.empty() ? (run.out_dir / "gazetteers.bin").string() : cache;
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  save_gazetteer_cache(path, set);
  run.write_manifest();
  std::size_t terms = 0;
  for (const auto& g : set.gazetteers()) terms += g.terms().size();
  std::cout << "compiled " << set.gazetteers().size() << " lists, " << terms << " terms -> " << path << "\n";
  return 0;
}

int tokenize_cmd(Run& run) {
  const auto corpus = validate_corpus(load_tweets(run.cfg.str("paths.tweets")), {});
  const auto gaz = run.gazetteers();
  const auto seqs = tokenize_corpus(corpus, gaz, run.cfg.flag("tokenizer.split_enabled"));
  run.write("tokens.tsv", format_tokens(seqs));
  run.write_manifest();
  std::size_t n = 0;
  for (const auto& s : seqs) n += s.size();
  std::cout << "tokenized " << seqs.size() << " tweets into " << n << " tokens -> " << (run.out_dir / "tokens.tsv").string()
            << "\n";
  return 0;
}

int train_cmd(Run& run) {
  Corpus dev;
  const auto train_corpus = load_train_dev(run, dev);
  report_warnings(train_corpus.warnings());
  const auto gaz = run.gazetteers();
  const auto spec = spec_for_variant(run.model_spec(), parse_variant(run.cfg.str("model.variant")));
  const auto provider = run.provider(spec);
  const auto result = train(train_corpus, dev, gaz, spec, provider.get(), run.train_options(), [](const EpochRecord& e) {
    std::fprintf(stderr, "epoch %zu loss %.6f dev P %.3f R %.3f F1 %.3f\n", e.epoch, e.loss, e.dev_p, e.dev_r,
                 e.dev_f1);
  });
  report_warnings(result.warnings);
  run.write("checkpoint/model.ckpt", serialize_checkpoint(result.best));
  run.write("history.csv", format_history_csv(result.history));
  run.write_manifest();
  std::printf("trained %s on %zu tweets: best dev F1=%.3f at epoch %zu of %zu -> %s\n",
              std::string(to_string(spec.variant)).c_str(), train_corpus.size(), result.best_dev.f1, result.best_epoch,
              result.history.size(), run.out_dir.string().c_str());
  return 0;
}

int predict_cmd(Run& run) {
  const auto ck = load_checkpoint(run.checkpoint_path());
  if (ck.spec.provider == ProviderKind::file && run.cfg.str("paths.embeddings").empty())
    throw ValidationError("paths.embeddings is required for a file-provider checkpoint");
  const auto corpus = validate_corpus(load_tweets(run.cfg.str("paths.tweets")), {});
  const auto gaz = run.gazetteers();
  const auto provider = run.provider(ck.spec);
  const auto spans = predict_corpus(ck, corpus, gaz, provider.get());
  const auto mentions = spans_to_mentions(corpus, spans);
  run.write("predictions.tsv", format_mentions(mentions));
  run.write_manifest();
  std::cout << "predicted " << mentions.size() << " mentions in " << corpus.size() << " tweets -> "
            << (run.out_dir / "predictions.tsv").string() << "\n";
  return 0;
}

int evaluate_cmd(Run& run) {
  const auto gold_m = load_mentions(run.cfg.str("paths.mentions"));
  const auto pred_m = load_mentions(run.cfg.str("paths.predictions"));
  std::optional<Corpus> corpus;
  if (!run.cfg.str("paths.tweets").empty()) {
    corpus = load_corpus(run.cfg.str("paths.tweets"), run.cfg.str("paths.mentions"));
  }
  const auto report = strict_prf(spans_from_mentions(pred_m), spans_from_mentions(gold_m), corpus ? &*corpus : nullptr);
  run.write("report.csv", format_report_csv(report));
  run.write_manifest();
  std::cout << format_report_text(report);
  std::printf("F1=%.3f P=%.3f R=%.3f\n", report.f1, report.precision, report.recall);
  return 0;
}

int ablate_cmd(Run& run) {
  Corpus dev;
  const auto train_corpus = load_train_dev(run, dev);
  const auto gaz = run.gazetteers();
  const auto base = run.model_spec();
  const auto provider = run.provider(base);
  const auto rows = ablation_run(train_corpus, dev, gaz, provider.get(), base, run.train_options());
  const auto csv = format_ablation_csv(rows);
  run.write("ablation.csv", csv);
  run.write_manifest();
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Disease mention tagger for Spanish tweets."};
  app.require_subcommand(1);
  app.footer(keys_help());

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"compile-gaz", "compile term lists into a binary gazetteer cache"},
      {"tokenize", "write the tokens TSV for a tweets file"},
      {"train", "train a tagger and write checkpoint/, history.csv and run-manifest"},
      {"predict", "tag tweets with a checkpoint and write predictions.tsv"},
      {"evaluate", "score predicted mentions against gold mentions, write report.csv"},
      {"ablate", "train the four ablation variants and write ablation.csv"},
  };
  std::string config_path;
  std::vector<std::string> overrides;
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path, "config file (key = value with [section] headers)");
    sub->add_option("overrides", overrides, "section.key=value settings applied after the config file");
    sub->footer(keys_help());
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  Run run;
  run.command = app.get_subcommands().front()->get_name();
  try {
    if (!config_path.empty()) run.cfg.load_file(config_path);
    run.cfg.apply_overrides(overrides);
    run.out_dir = run.cfg.str("paths.output_dir");
    run.validate();
    if (run.command == "compile-gaz") return compile_gaz(run);
    if (run.command == "tokenize") return tokenize_cmd(run);
    if (run.command == "train") return train_cmd(run);
    if (run.command == "predict") return predict_cmd(run);
    if (run.command == "evaluate") return evaluate_cmd(run);
    return ablate_cmd(run);
  } catch (const ValidationError& e) {
    std::cerr << "invalid:\n";
    for (const auto& i : e.issues()) std::cerr << "  " << i << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
