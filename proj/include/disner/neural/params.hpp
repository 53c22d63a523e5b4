#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "disner/features.hpp"

namespace disner::nn {

struct EncoderConfig {
  std::size_t d_model = 32;
  std::size_t n_layers = 2;  // 0 bypasses the encoder: features feed the classifier
  std::size_t n_heads = 4;
  std::size_t d_ff = 0;  // 0 means 4 * d_model
  double dropout = 0.1;
  uint64_t seed = 0;
  std::size_t max_sequence_length = 512;

  std::size_t ff_width() const { return d_ff ? d_ff : 4 * d_model; }
  std::size_t head_width() const { return d_model / n_heads; }

  std::vector<std::string> problems() const {
    std::vector<std::string> p;
    if (d_model == 0) p.push_back("d_model must be >= 1");
    if (n_layers > 0) {
      if (n_heads == 0) p.push_back("n_heads must be >= 1");
      else if (d_model % n_heads != 0)
        p.push_back("n_heads (" + std::to_string(n_heads) + ") must divide d_model (" + std::to_string(d_model) + ")");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) p.push_back("dropout must be in [0, 1)");
    if (max_sequence_length == 0) p.push_back("max_sequence_length must be >= 1");
    return p;
  }

  void validate() const {
    if (auto p = problems(); !p.empty()) throw ValidationError(std::move(p));
  }

  bool operator==(const EncoderConfig&) const = default;
};

// Deterministic stream used for initialization, dropout masks and shuffling.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

template <typename S>
struct LayerParams {
  Matrix<S> wq, bq, wk, bk, wv, bv, wo, bo;  // attention projections, d_model x d_model (+ 1 x d_model biases)
  Matrix<S> w1, b1, w2, b2;                  // feed-forward
  Matrix<S> ln1_g, ln1_b, ln2_g, ln2_b;      // layer norms, 1 x d_model

  using Member = Matrix<S> LayerParams::*;
  struct Field {
    const char* name;
    Member member;
  };
  static constexpr std::array<Field, 16> fields{{{"wq", &LayerParams::wq},       {"bq", &LayerParams::bq},
                                                 {"wk", &LayerParams::wk},       {"bk", &LayerParams::bk},
                                                 {"wv", &LayerParams::wv},       {"bv", &LayerParams::bv},
                                                 {"wo", &LayerParams::wo},       {"bo", &LayerParams::bo},
                                                 {"w1", &LayerParams::w1},       {"b1", &LayerParams::b1},
                                                 {"w2", &LayerParams::w2},       {"b2", &LayerParams::b2},
                                                 {"ln1_g", &LayerParams::ln1_g}, {"ln1_b", &LayerParams::ln1_b},
                                                 {"ln2_g", &LayerParams::ln2_g}, {"ln2_b", &LayerParams::ln2_b}}};
};

template <typename S>
struct Params {
  std::vector<LayerParams<S>> layers;
  Matrix<S> cls_w;      // d_model x 3, columns in (B, I, O) order
  Matrix<S> cls_b;      // 1 x 3
  Matrix<S> embedding;  // (vocab + 1) x d_embed when the lookup provider is active, else empty

  // f(name, matrices...) over the same parameter of every argument, in a
  // fixed order. Empty embedding tables are skipped.
  template <typename F, typename... Ps>
  static void visit(F&& f, Ps&... ps) {
    auto& first = std::get<0>(std::tie(ps...));
    for (std::size_t l = 0; l < first.layers.size(); ++l)
      for (const auto& field : LayerParams<S>::fields)
        f("layer" + std::to_string(l) + "." + field.name, (ps.layers[l].*(field.member))...);
    f(std::string("cls_w"), ps.cls_w...);
    f(std::string("cls_b"), ps.cls_b...);
    if (first.embedding.size() > 0) f(std::string("embedding"), ps.embedding...);
  }

  Params zeros_like() const {
    Params z = *this;
    visit([](const std::string&, Matrix<S>& m) { m.setZero(); }, z);
    return z;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit([&](const std::string&, const Matrix<S>& m) { n += static_cast<std::size_t>(m.size()); }, *this);
    return n;
  }

  bool all_finite(std::string* bad = nullptr) const {
    bool ok = true;
    visit(
        [&](const std::string& name, const Matrix<S>& m) {
          if (ok && !m.allFinite()) {
            ok = false;
            if (bad) *bad = name;
          }
        },
        *this);
    return ok;
  }

  template <typename T>
  Params<T> cast() const {
    Params<T> out;
    out.layers.resize(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l)
      for (std::size_t k = 0; k < LayerParams<S>::fields.size(); ++k)
        out.layers[l].*(LayerParams<T>::fields[k].member) =
            (layers[l].*(LayerParams<S>::fields[k].member)).template cast<T>();
    out.cls_w = cls_w.template cast<T>();
    out.cls_b = cls_b.template cast<T>();
    out.embedding = embedding.template cast<T>();
    return out;
  }
};

template <typename S>
void xavier_uniform(Matrix<S>& m, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(rng.uniform(-limit, limit));
}

// Xavier-uniform matrices, zero biases, unit layer-norm gains. When
// `lookup_rows` > 0 an embedding table of lookup_rows x d_embed is added,
// with unit-variance uniform entries.
template <typename S>
Params<S> init_params(const EncoderConfig& cfg, std::size_t lookup_rows = 0, std::size_t d_embed = 0) {
  cfg.validate();
  Rng rng(cfg.seed);
  const auto d = static_cast<Eigen::Index>(cfg.d_model);
  const auto ff = static_cast<Eigen::Index>(cfg.ff_width());
  Params<S> p;
  p.layers.resize(cfg.n_layers);
  for (auto& l : p.layers) {
    for (auto* w : {&l.wq, &l.wk, &l.wv, &l.wo}) {
      w->resize(d, d);
      xavier_uniform(*w, rng);
    }
    for (auto* b : {&l.bq, &l.bk, &l.bv, &l.bo, &l.b2, &l.ln1_b, &l.ln2_b}) b->setZero(1, d);
    l.w1.resize(d, ff);
    xavier_uniform(l.w1, rng);
    l.b1.setZero(1, ff);
    l.w2.resize(ff, d);
    xavier_uniform(l.w2, rng);
    l.ln1_g.setOnes(1, d);
    l.ln2_g.setOnes(1, d);
  }
  p.cls_w.resize(d, 3);
  xavier_uniform(p.cls_w, rng);
  p.cls_b.setZero(1, 3);
  if (lookup_rows > 0) {
    p.embedding.resize(static_cast<Eigen::Index>(lookup_rows), static_cast<Eigen::Index>(d_embed));
    const double a = std::sqrt(3.0);
    for (Eigen::Index i = 0; i < p.embedding.size(); ++i) p.embedding.data()[i] = static_cast<S>(rng.uniform(-a, a));
  }
  return p;
}

}  // namespace disner::nn
