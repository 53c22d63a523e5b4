#pragma once

// Checkpoint file: a text header (`key=value` lines ending with
// `end_header`), then one block per parameter:
//   `block <name> <rows> <cols>\n` followed by rows*cols little-endian
//   values of the header's numeric width, row-major.

#include <bit>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "disner/features.hpp"
#include "disner/neural/params.hpp"

namespace disner {

inline constexpr std::string_view kCheckpointMagic = "disner-checkpoint";
inline constexpr int kCheckpointVersion = 1;

enum class Variant { sub, no_gaz, no_tok, base };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::sub: return "sub";
    case Variant::no_gaz: return "no-gaz";
    case Variant::no_tok: return "no-tok";
    case Variant::base: return "base";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "sub") return Variant::sub;
  if (s == "no-gaz") return Variant::no_gaz;
  if (s == "no-tok") return Variant::no_tok;
  if (s == "base") return Variant::base;
  throw ValidationError("unknown variant \"" + std::string(s) + "\" (expected sub, no-gaz, no-tok or base)");
}

// Everything besides the weights needed to rebuild the prediction path.
struct ModelSpec {
  nn::EncoderConfig encoder;
  ProviderKind provider = ProviderKind::hash;
  std::size_t d_embed = 0;
  uint64_t hash_seed = 0;
  bool use_flags = true;
  bool split_enabled = true;
  Variant variant = Variant::sub;
  Vocabulary vocab;  // lookup provider only

  std::size_t expected_d_model() const { return d_embed + (use_flags ? kFlagColumns : 0); }

  bool operator==(const ModelSpec&) const = default;
};

struct Checkpoint {
  ModelSpec spec;
  nn::Params<double> params;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ck) {
  const auto& s = ck.spec;
  const auto& e = s.encoder;
  std::string out;
  auto kv = [&](const std::string& k, const std::string& v) { out += k + "=" + v + "\n"; };
  out += std::string(kCheckpointMagic) + "\n";
  kv("format_version", std::to_string(kCheckpointVersion));
  kv("numeric_width", "64");
  kv("class_order", "B,I,O");
  kv("provider", std::string(to_string(s.provider)));
  kv("d_embed", std::to_string(s.d_embed));
  kv("hash_seed", std::to_string(s.hash_seed));
  kv("use_flags", s.use_flags ? "1" : "0");
  kv("split_enabled", s.split_enabled ? "1" : "0");
  kv("variant", std::string(to_string(s.variant)));
  kv("d_model", std::to_string(e.d_model));
  kv("n_layers", std::to_string(e.n_layers));
  kv("n_heads", std::to_string(e.n_heads));
  kv("d_ff", std::to_string(e.ff_width()));
  kv("dropout", detail::fmt_double(e.dropout));
  kv("seed", std::to_string(e.seed));
  kv("max_sequence_length", std::to_string(e.max_sequence_length));
  std::vector<std::string> words(s.vocab.size());
  for (const auto& [w, i] : s.vocab) words.at(i) = w;
  kv("vocab_size", std::to_string(words.size()));
  for (const auto& w : words) kv("vocab", escape_field(w));
  out += "end_header\n";
  nn::Params<double>::visit(
      [&](const std::string& name, const MatrixD& m) {
        out += "block " + name + " " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
        for (Eigen::Index i = 0; i < m.size(); ++i) {
          const auto bits = std::bit_cast<uint64_t>(m.data()[i]);
          for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
        }
      },
      ck.params);
  return out;
}

inline Checkpoint parse_checkpoint(std::string_view data) {
  std::size_t pos = 0;
  auto next_line = [&]() {
    auto nl = data.find('\n', pos);
    if (nl == std::string_view::npos) throw ParseError("truncated checkpoint");
    auto line = data.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  if (next_line() != kCheckpointMagic) throw ParseError("not a checkpoint (bad magic)");
  std::map<std::string, std::string> h;
  std::vector<std::string> vocab;
  for (;;) {
    auto line = next_line();
    if (line == "end_header") break;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("bad checkpoint header line: " + std::string(line));
    auto key = std::string(line.substr(0, eq));
    auto val = std::string(line.substr(eq + 1));
    if (key == "vocab") vocab.push_back(unescape_field(val));
    else h[key] = val;
  }
  auto get = [&](const std::string& k) {
    auto it = h.find(k);
    if (it == h.end()) throw ParseError("checkpoint header missing " + k);
    return it->second;
  };
  auto num = [&](const std::string& k) { return static_cast<std::size_t>(parse_int(get(k), 0, k)); };
  if (num("format_version") != kCheckpointVersion) throw ParseError("unsupported checkpoint version " + get("format_version"));
  if (get("numeric_width") != "64") throw ParseError("unsupported numeric width " + get("numeric_width"));
  if (get("class_order") != "B,I,O") throw ParseError("unsupported class order " + get("class_order"));

  Checkpoint ck;
  auto& s = ck.spec;
  s.provider = parse_provider_kind(get("provider"));
  s.d_embed = num("d_embed");
  s.hash_seed = std::stoull(get("hash_seed"));
  s.use_flags = get("use_flags") == "1";
  s.split_enabled = get("split_enabled") == "1";
  s.variant = parse_variant(get("variant"));
  s.encoder.d_model = num("d_model");
  s.encoder.n_layers = num("n_layers");
  s.encoder.n_heads = num("n_heads");
  s.encoder.d_ff = num("d_ff");
  s.encoder.dropout = std::stod(get("dropout"));
  s.encoder.seed = std::stoull(get("seed"));
  s.encoder.max_sequence_length = num("max_sequence_length");
  if (vocab.size() != num("vocab_size")) throw ParseError("vocab size mismatch in checkpoint");
  for (std::size_t i = 0; i < vocab.size(); ++i) s.vocab.emplace(vocab[i], i);

  // Shapes come from a freshly initialized model; blocks must match them.
  ck.params = nn::init_params<double>(s.encoder, s.provider == ProviderKind::lookup ? s.vocab.size() + 1 : 0,
                                      s.d_embed);
  nn::Params<double>::visit(
      [&](const std::string& name, MatrixD& m) {
        const auto expect = "block " + name + " " + std::to_string(m.rows()) + " " + std::to_string(m.cols());
        if (next_line() != expect) throw ParseError("checkpoint block mismatch, expected '" + expect + "'");
        const auto bytes = static_cast<std::size_t>(m.size()) * 8;
        if (pos + bytes > data.size()) throw ParseError("truncated checkpoint block " + name);
        for (Eigen::Index i = 0; i < m.size(); ++i) {
          uint64_t bits = 0;
          for (int b = 0; b < 8; ++b)
            bits |= static_cast<uint64_t>(static_cast<uint8_t>(data[pos + static_cast<std::size_t>(i) * 8 + b]))
                    << (8 * b);
          m.data()[i] = std::bit_cast<double>(bits);
        }
        pos += bytes;
      },
      ck.params);
  if (pos != data.size()) throw ParseError("trailing bytes after checkpoint blocks");
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) { write_file(path, serialize_checkpoint(ck)); }
inline Checkpoint load_checkpoint(const std::string& path) { return parse_checkpoint(read_file(path)); }

}  // namespace disner
