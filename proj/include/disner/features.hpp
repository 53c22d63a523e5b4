#pragma once

// Model input: token embeddings H followed by one-hot gazetteer flag blocks
// for the umls, distemist and silver lists, Z = [H | G_umls | G_distemist | G_silver].

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "disner/gazetteer.hpp"
#include "disner/tokenizer.hpp"

namespace disner {

template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixD = Matrix<double>;

// Gazetteers contributing flag blocks, in column order.
inline constexpr std::array<std::string_view, 3> kFlagGazetteers = {"umls", "distemist", "silver"};
inline constexpr std::size_t kFlagColumns = 2 * kFlagGazetteers.size();

enum class ProviderKind { hash, lookup, file };

inline std::string_view to_string(ProviderKind k) {
  switch (k) {
    case ProviderKind::hash: return "hash";
    case ProviderKind::lookup: return "lookup";
    case ProviderKind::file: return "file";
  }
  return "?";
}

inline ProviderKind parse_provider_kind(std::string_view s) {
  if (s == "hash") return ProviderKind::hash;
  if (s == "lookup") return ProviderKind::lookup;
  if (s == "file") return ProviderKind::file;
  throw ValidationError("unknown provider kind \"" + std::string(s) + "\" (expected hash, lookup or file)");
}

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual ProviderKind kind() const = 0;
  virtual std::size_t d_embed() const = 0;
  virtual MatrixD embed(const TokenSequence& tokens) const = 0;
};

// ---------------------------------------------------------------------------
// Hash provider: frozen pseudorandom rows keyed by normalized token text.

namespace detail {

inline uint64_t fnv1a(std::string_view s, uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Each coordinate is uniform on [-sqrt(3), sqrt(3)]: zero mean, unit variance.
inline void hash_row(std::string_view normalized_text, uint64_t seed, Eigen::Ref<Eigen::RowVectorXd> row) {
  uint64_t state = detail::fnv1a(normalized_text, detail::fnv1a(std::to_string(seed)));
  const double scale = std::sqrt(3.0);
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    const double u = static_cast<double>(detail::splitmix64(state) >> 11) * 0x1.0p-53;
    row(j) = (2.0 * u - 1.0) * scale;
  }
}

inline MatrixD hash_embed(const TokenSequence& tokens, std::size_t d_embed, uint64_t seed) {
  MatrixD h(static_cast<Eigen::Index>(tokens.size()), static_cast<Eigen::Index>(d_embed));
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(d_embed));
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    hash_row(normalize(tokens.tokens[i].text), seed, row);
    h.row(static_cast<Eigen::Index>(i)) = row;
  }
  return h;
}

class HashEmbedding final : public EmbeddingProvider {
 public:
  HashEmbedding(std::size_t d_embed, uint64_t seed) : d_(d_embed), seed_(seed) {
    if (d_ == 0) throw ValidationError("d_embed must be >= 1");
  }
  ProviderKind kind() const override { return ProviderKind::hash; }
  std::size_t d_embed() const override { return d_; }
  uint64_t seed() const { return seed_; }
  MatrixD embed(const TokenSequence& tokens) const override { return hash_embed(tokens, d_, seed_); }

 private:
  std::size_t d_;
  uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Lookup provider: trainable table, one row per vocabulary entry plus a
// final UNK row.

using Vocabulary = std::map<std::string, std::size_t>;

inline std::vector<std::size_t> lookup_ids(const TokenSequence& tokens, const Vocabulary& vocab) {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens.tokens) {
    auto it = vocab.find(normalize(t.text));
    ids.push_back(it == vocab.end() ? vocab.size() : it->second);
  }
  return ids;
}

// `table` has vocab.size() + 1 rows; the last one is UNK.
inline MatrixD lookup_embed(const TokenSequence& tokens, const Vocabulary& vocab, const MatrixD& table) {
  const auto ids = lookup_ids(tokens, vocab);
  MatrixD h(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i)
    h.row(static_cast<Eigen::Index>(i)) = table.row(static_cast<Eigen::Index>(ids[i]));
  return h;
}

// Vocabulary of normalized token texts in order of first appearance.
inline Vocabulary build_vocabulary(const std::vector<TokenSequence>& seqs) {
  Vocabulary v;
  for (const auto& s : seqs)
    for (const auto& t : s.tokens) v.emplace(normalize(t.text), v.size());
  return v;
}

class LookupEmbedding final : public EmbeddingProvider {
 public:
  LookupEmbedding(Vocabulary vocab, MatrixD table) : vocab_(std::move(vocab)), table_(std::move(table)) {
    if (static_cast<std::size_t>(table_.rows()) != vocab_.size() + 1)
      throw ValidationError("lookup table needs vocab size + 1 rows (UNK last)");
  }
  ProviderKind kind() const override { return ProviderKind::lookup; }
  std::size_t d_embed() const override { return static_cast<std::size_t>(table_.cols()); }
  MatrixD embed(const TokenSequence& tokens) const override { return lookup_embed(tokens, vocab_, table_); }

  const Vocabulary& vocab() const { return vocab_; }
  const MatrixD& table() const { return table_; }
  MatrixD& table() { return table_; }
  std::size_t unk() const { return vocab_.size(); }

 private:
  Vocabulary vocab_;
  MatrixD table_;
};

// ---------------------------------------------------------------------------
// File provider: externally computed rows keyed by (tweet_id, token index).
//
// Text form: a `d_embed=<int>` header line, then
// `tweet_id<TAB>token_index<TAB>v1,v2,...` per token.
// Binary form (little-endian): magic, u32 version, u32 d_embed, u32 record
// count, an index table of (u32 id length, id bytes, u32 token index) per
// record, then one f32 row per record in index-table order.

inline constexpr std::string_view kEmbeddingBinaryMagic = "DISNEREB";
inline constexpr uint32_t kEmbeddingBinaryVersion = 1;

struct EmbeddingTable {
  std::size_t d_embed = 0;
  std::map<std::pair<std::string, std::size_t>, std::vector<float>> rows;

  bool operator==(const EmbeddingTable&) const = default;
};

inline std::string format_embeddings_text(const EmbeddingTable& t) {
  std::string out = "d_embed=" + std::to_string(t.d_embed) + "\n";
  char buf[32];
  for (const auto& [key, row] : t.rows) {
    out += escape_field(key.first) + '\t' + std::to_string(key.second) + '\t';
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += ',';
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(row[j]));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

inline std::string format_embeddings_binary(const EmbeddingTable& t) {
  std::string out(kEmbeddingBinaryMagic);
  detail::put_u32(out, kEmbeddingBinaryVersion);
  detail::put_u32(out, static_cast<uint32_t>(t.d_embed));
  detail::put_u32(out, static_cast<uint32_t>(t.rows.size()));
  for (const auto& [key, row] : t.rows) {
    detail::put_u32(out, static_cast<uint32_t>(key.first.size()));
    out += key.first;
    detail::put_u32(out, static_cast<uint32_t>(key.second));
  }
  for (const auto& [key, row] : t.rows)
    for (float v : row) detail::put_u32(out, std::bit_cast<uint32_t>(v));
  return out;
}

inline EmbeddingTable parse_embeddings(std::string_view data) {
  EmbeddingTable t;
  if (data.substr(0, kEmbeddingBinaryMagic.size()) == kEmbeddingBinaryMagic) {
    std::size_t pos = kEmbeddingBinaryMagic.size();
    if (auto v = detail::get_u32(data, pos); v != kEmbeddingBinaryVersion)
      throw ParseError("unsupported embedding file version " + std::to_string(v));
    t.d_embed = detail::get_u32(data, pos);
    const auto n = detail::get_u32(data, pos);
    std::vector<std::pair<std::string, std::size_t>> keys;
    for (uint32_t r = 0; r < n; ++r) {
      auto id = detail::get_bytes(data, pos, detail::get_u32(data, pos));
      keys.emplace_back(std::move(id), detail::get_u32(data, pos));
    }
    for (auto& key : keys) {
      std::vector<float> row(t.d_embed);
      for (auto& v : row) v = std::bit_cast<float>(detail::get_u32(data, pos));
      if (!t.rows.emplace(std::move(key), std::move(row)).second) throw ParseError("duplicate embedding key");
    }
    if (pos != data.size()) throw ParseError("trailing bytes after embedding rows");
    return t;
  }

  auto lines = split_lines(data);
  if (lines.empty() || lines[0].substr(0, 8) != "d_embed=") throw ParseError("missing d_embed=<int> header", 1);
  auto d = parse_int(lines[0].substr(8), 1, "d_embed");
  if (d <= 0) throw ParseError("d_embed must be positive", 1);
  t.d_embed = static_cast<std::size_t>(d);
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const auto line_no = ln + 1;
    auto cols = split_tabs(lines[ln]);
    if (cols.size() != 3) throw ParseError("expected 3 columns", line_no);
    auto idx = parse_int(cols[1], line_no, "token_index");
    if (idx < 0) throw ParseError("negative token index", line_no);
    std::vector<float> row;
    std::string_view vals = cols[2];
    while (!vals.empty()) {
      auto comma = vals.find(',');
      auto field = std::string(vals.substr(0, comma));
      char* end = nullptr;
      float v = std::strtof(field.c_str(), &end);
      if (field.empty() || end != field.c_str() + field.size())
        throw ParseError("bad float '" + field + "'", line_no);
      row.push_back(v);
      if (comma == std::string_view::npos) break;
      vals.remove_prefix(comma + 1);
    }
    if (row.size() != t.d_embed)
      throw ParseError("row has " + std::to_string(row.size()) + " values, d_embed is " + std::to_string(t.d_embed),
                       line_no);
    if (!t.rows.emplace(std::make_pair(unescape_field(cols[0], line_no), static_cast<std::size_t>(idx)), std::move(row))
             .second)
      throw ParseError("duplicate embedding key", line_no);
  }
  return t;
}

inline MatrixD file_embed(const TokenSequence& tokens, const EmbeddingTable& table) {
  MatrixD h(static_cast<Eigen::Index>(tokens.size()), static_cast<Eigen::Index>(table.d_embed));
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto it = table.rows.find({tokens.tweet_id, i});
    if (it == table.rows.end()) {
      missing.push_back("tweet " + tokens.tweet_id + ": no embedding row for token index " + std::to_string(i));
      continue;
    }
    for (std::size_t j = 0; j < table.d_embed; ++j)
      h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<double>(it->second[j]);
  }
  if (!missing.empty()) throw ValidationError(std::move(missing));
  auto extra = table.rows.lower_bound({tokens.tweet_id, tokens.size()});
  if (extra != table.rows.end() && extra->first.first == tokens.tweet_id)
    throw ValidationError("tweet " + tokens.tweet_id + ": embedding file has rows beyond token count " +
                          std::to_string(tokens.size()));
  return h;
}

class FileEmbedding final : public EmbeddingProvider {
 public:
  explicit FileEmbedding(EmbeddingTable table, std::size_t expected_d = 0) : table_(std::move(table)) {
    if (expected_d != 0 && expected_d != table_.d_embed)
      throw ValidationError("embedding file has d_embed " + std::to_string(table_.d_embed) + ", expected " +
                            std::to_string(expected_d));
  }
  static FileEmbedding load(const std::string& path, std::size_t expected_d = 0) {
    return FileEmbedding(parse_embeddings(read_file(path)), expected_d);
  }
  ProviderKind kind() const override { return ProviderKind::file; }
  std::size_t d_embed() const override { return table_.d_embed; }
  MatrixD embed(const TokenSequence& tokens) const override { return file_embed(tokens, table_); }

 private:
  EmbeddingTable table_;
};

// ---------------------------------------------------------------------------
// Flag blocks and assembly

// Row i is [1, 0] when flags[i], else [0, 1].
inline MatrixD flag_block(const std::vector<bool>& flags) {
  MatrixD g(static_cast<Eigen::Index>(flags.size()), 2);
  for (std::size_t i = 0; i < flags.size(); ++i) {
    g(static_cast<Eigen::Index>(i), 0) = flags[i] ? 1.0 : 0.0;
    g(static_cast<Eigen::Index>(i), 1) = flags[i] ? 0.0 : 1.0;
  }
  return g;
}

// Phrase flags for each of kFlagGazetteers; a list missing from the set
// flags nothing.
inline std::array<std::vector<bool>, 3> gazetteer_flags(const TokenSequence& tokens, const GazetteerSet& gaz) {
  std::array<std::vector<bool>, 3> out;
  const auto texts = normalized_texts(tokens);
  for (std::size_t k = 0; k < kFlagGazetteers.size(); ++k) {
    const Gazetteer* g = gaz.find(kFlagGazetteers[k]);
    out[k] = g ? match_phrase_flags(std::span<const std::string>(texts), *g) : std::vector<bool>(tokens.size(), false);
  }
  return out;
}

inline MatrixD assemble(const MatrixD& h, const std::vector<bool>& umls, const std::vector<bool>& distemist,
                        const std::vector<bool>& silver) {
  const auto t = static_cast<std::size_t>(h.rows());
  if (umls.size() != t || distemist.size() != t || silver.size() != t)
    throw ValidationError("assemble: flag rows (" + std::to_string(umls.size()) + ", " +
                          std::to_string(distemist.size()) + ", " + std::to_string(silver.size()) +
                          ") do not match embedding rows " + std::to_string(t));
  MatrixD z(h.rows(), h.cols() + static_cast<Eigen::Index>(kFlagColumns));
  z.leftCols(h.cols()) = h;
  z.middleCols(h.cols(), 2) = flag_block(umls);
  z.middleCols(h.cols() + 2, 2) = flag_block(distemist);
  z.middleCols(h.cols() + 4, 2) = flag_block(silver);
  return z;
}

inline MatrixD assemble(const MatrixD& h, const std::array<std::vector<bool>, 3>& flags) {
  return assemble(h, flags[0], flags[1], flags[2]);
}

}  // namespace disner
