#pragma once

// Post-norm transformer encoder with a linear BIO classifier on top.
//
//   X0 = Z + PE
//   per layer:  A  = MultiHead(X) Wo + bo
//               X1 = LN1(X + drop(A))
//               X2 = LN2(X1 + drop(relu(X1 W1 + b1) W2 + b2))
//   logits = Y Wc + bc
//
// With n_layers == 0 the features go straight to the classifier (no
// positional encoding). Backward is exact for the realized dropout masks.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "disner/biocodec.hpp"
#include "disner/neural/params.hpp"

namespace disner::nn {

inline constexpr double kLayerNormEps = 1e-5;

template <typename S>
Matrix<S> positional_encoding(std::size_t t, std::size_t d_model) {
  Matrix<S> pe(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(d_model));
  for (std::size_t pos = 0; pos < t; ++pos) {
    for (std::size_t j = 0; j < d_model; ++j) {
      const std::size_t two_i = j - (j % 2);
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(two_i) / static_cast<double>(d_model));
      pe(static_cast<Eigen::Index>(pos), static_cast<Eigen::Index>(j)) =
          static_cast<S>(j % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return pe;
}

// Model input for one sequence. When `lookup_ids` is non-empty the first
// embedding-width columns of `features` are overwritten by rows of the
// trainable table in Params::embedding.
template <typename S>
struct SequenceInput {
  Matrix<S> features;
  std::vector<std::size_t> lookup_ids;
};

template <typename S>
struct LayerNormCache {
  Matrix<S> xhat;
  std::vector<S> rstd;
};

template <typename S>
struct LayerCache {
  Matrix<S> x, q, k, v;
  std::vector<Matrix<S>> attn;  // per head, t x t, rows sum to 1
  Matrix<S> heads;              // concatenated head outputs, t x d_model
  Matrix<S> mask1, mask2;       // empty when dropout is off
  LayerNormCache<S> ln1, ln2;
  Matrix<S> x1, ff_pre, ff_act;
};

template <typename S>
struct ForwardState {
  Matrix<S> z;  // features after the lookup gather, before positional encoding
  std::vector<LayerCache<S>> layers;
  Matrix<S> y;
  Matrix<S> logits;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

namespace detail {

template <typename S>
Matrix<S> layer_norm(const Matrix<S>& x, const Matrix<S>& g, const Matrix<S>& b, LayerNormCache<S>& cache) {
  const auto t = x.rows();
  const auto d = x.cols();
  cache.xhat.resize(t, d);
  cache.rstd.resize(static_cast<std::size_t>(t));
  Matrix<S> y(t, d);
  for (Eigen::Index i = 0; i < t; ++i) {
    const S mean = x.row(i).mean();
    const S var = (x.row(i).array() - mean).square().sum() / static_cast<S>(d);
    const S rstd = S(1) / std::sqrt(var + static_cast<S>(kLayerNormEps));
    cache.rstd[static_cast<std::size_t>(i)] = rstd;
    cache.xhat.row(i) = (x.row(i).array() - mean) * rstd;
    y.row(i) = cache.xhat.row(i).array() * g.array() + b.array();
  }
  return y;
}

template <typename S>
Matrix<S> layer_norm_backward(const Matrix<S>& dy, const Matrix<S>& g, const LayerNormCache<S>& cache, Matrix<S>& dg,
                              Matrix<S>& db) {
  const auto t = dy.rows();
  const auto d = dy.cols();
  dg += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  db += dy.colwise().sum();
  Matrix<S> dx(t, d);
  for (Eigen::Index i = 0; i < t; ++i) {
    const Eigen::Array<S, 1, Eigen::Dynamic> dxhat = dy.row(i).array() * g.array();
    const S m1 = dxhat.mean();
    const S m2 = (dxhat * cache.xhat.row(i).array()).mean();
    dx.row(i) = cache.rstd[static_cast<std::size_t>(i)] * (dxhat - m1 - cache.xhat.row(i).array() * m2);
  }
  return dx;
}

template <typename S>
void softmax_rows(Matrix<S>& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const S mx = m.row(i).maxCoeff();
    m.row(i) = (m.row(i).array() - mx).exp();
    m.row(i) /= m.row(i).sum();
  }
}

template <typename S>
Matrix<S> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Matrix<S> mask(rows, cols);
  const S keep = static_cast<S>(1.0 / (1.0 - rate));
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < rate ? S(0) : keep;
  return mask;
}

template <typename S>
void check_finite(const Matrix<S>& m, const std::string& where) {
  if (!m.allFinite()) throw NonFiniteError("non-finite activation in " + where);
}

}  // namespace detail

// Features with lookup rows gathered in. Checks the column count.
template <typename S>
Matrix<S> gather_input(const SequenceInput<S>& input, const Params<S>& params, const EncoderConfig& cfg) {
  if (static_cast<std::size_t>(input.features.cols()) != cfg.d_model && input.features.rows() > 0)
    throw ValidationError("feature width " + std::to_string(input.features.cols()) + " != d_model " +
                          std::to_string(cfg.d_model));
  Matrix<S> z = input.features;
  if (z.rows() == 0) z.resize(0, static_cast<Eigen::Index>(cfg.d_model));
  if (!input.lookup_ids.empty()) {
    if (input.lookup_ids.size() != static_cast<std::size_t>(z.rows()))
      throw ValidationError("lookup ids do not match sequence length");
    const auto de = params.embedding.cols();
    if (de == 0 || de > z.cols()) throw ValidationError("lookup ids given but no usable embedding table");
    for (std::size_t i = 0; i < input.lookup_ids.size(); ++i) {
      const auto id = static_cast<Eigen::Index>(input.lookup_ids[i]);
      if (id >= params.embedding.rows()) throw ValidationError("lookup id out of range");
      z.row(static_cast<Eigen::Index>(i)).head(de) = params.embedding.row(id);
    }
  }
  return z;
}

// Runs encoder and classifier. `rng` is required only when training with
// dropout > 0; masks drawn from it are kept in the returned state.
template <typename S>
ForwardState<S> forward(const SequenceInput<S>& input, const Params<S>& params, const EncoderConfig& cfg,
                        bool training = false, Rng* rng = nullptr) {
  ForwardState<S> st;
  st.z = gather_input(input, params, cfg);
  const auto t = st.z.rows();
  const auto d = static_cast<Eigen::Index>(cfg.d_model);
  if (static_cast<std::size_t>(t) > cfg.max_sequence_length)
    throw ValidationError("sequence of " + std::to_string(t) + " tokens exceeds max_sequence_length " +
                          std::to_string(cfg.max_sequence_length));
  const bool drop = training && cfg.dropout > 0.0;
  if (drop && rng == nullptr) throw Error("dropout requires an rng");

  Matrix<S> x = st.z;
  if (cfg.n_layers > 0) x += positional_encoding<S>(static_cast<std::size_t>(t), cfg.d_model);

  const auto heads = static_cast<Eigen::Index>(cfg.n_heads);
  const auto dk = d / std::max<Eigen::Index>(heads, 1);
  const S scale = S(1) / std::sqrt(static_cast<S>(dk));
  st.layers.resize(cfg.n_layers);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const auto& p = params.layers[l];
    auto& c = st.layers[l];
    c.x = x;
    c.q = (x * p.wq).rowwise() + p.bq.row(0);
    c.k = (x * p.wk).rowwise() + p.bk.row(0);
    c.v = (x * p.wv).rowwise() + p.bv.row(0);
    c.heads.resize(t, d);
    c.attn.resize(static_cast<std::size_t>(heads));
    for (Eigen::Index h = 0; h < heads; ++h) {
      Matrix<S> scores = c.q.middleCols(h * dk, dk) * c.k.middleCols(h * dk, dk).transpose() * scale;
      detail::softmax_rows(scores);
      c.heads.middleCols(h * dk, dk) = scores * c.v.middleCols(h * dk, dk);
      c.attn[static_cast<std::size_t>(h)] = std::move(scores);
    }
    Matrix<S> a = (c.heads * p.wo).rowwise() + p.bo.row(0);
    if (drop) {
      c.mask1 = detail::dropout_mask<S>(t, d, cfg.dropout, *rng);
      a.array() *= c.mask1.array();
    }
    c.x1 = detail::layer_norm<S>(x + a, p.ln1_g, p.ln1_b, c.ln1);
    c.ff_pre = (c.x1 * p.w1).rowwise() + p.b1.row(0);
    c.ff_act = c.ff_pre.cwiseMax(S(0));
    Matrix<S> f = (c.ff_act * p.w2).rowwise() + p.b2.row(0);
    if (drop) {
      c.mask2 = detail::dropout_mask<S>(t, d, cfg.dropout, *rng);
      f.array() *= c.mask2.array();
    }
    x = detail::layer_norm<S>(c.x1 + f, p.ln2_g, p.ln2_b, c.ln2);
    detail::check_finite(x, "encoder layer " + std::to_string(l));
  }
  st.y = std::move(x);
  st.logits = (st.y * params.cls_w).rowwise() + params.cls_b.row(0);
  detail::check_finite(st.logits, "classifier");
  return st;
}

template <typename S>
Matrix<S> encoder_forward(const Matrix<S>& z, const Params<S>& params, const EncoderConfig& cfg, bool training = false,
                          Rng* rng = nullptr) {
  return forward(SequenceInput<S>{z, {}}, params, cfg, training, rng).y;
}

template <typename S>
Matrix<S> classify(const Matrix<S>& y, const Params<S>& params) {
  if (y.cols() != params.cls_w.rows())
    throw ValidationError("classifier expects width " + std::to_string(params.cls_w.rows()) + ", got " +
                          std::to_string(y.cols()));
  return (y * params.cls_w).rowwise() + params.cls_b.row(0);
}

// Mean over tokens of -log softmax(logits)[gold].
template <typename S>
S token_cross_entropy(const Matrix<S>& logits, std::span<const Tag> gold) {
  if (static_cast<std::size_t>(logits.rows()) != gold.size()) throw ValidationError("logits/tags length mismatch");
  if (gold.empty()) return S(0);
  S total = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const S mx = logits.row(i).maxCoeff();
    const S lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    total += lse - logits(i, static_cast<int>(gold[static_cast<std::size_t>(i)]));
  }
  return total / static_cast<S>(logits.rows());
}

// d(mean CE)/d(logits) = (softmax - onehot(gold)) / t
template <typename S>
Matrix<S> cross_entropy_grad(const Matrix<S>& logits, std::span<const Tag> gold) {
  Matrix<S> g = logits;
  detail::softmax_rows(g);
  for (std::size_t i = 0; i < gold.size(); ++i) g(static_cast<Eigen::Index>(i), static_cast<int>(gold[i])) -= S(1);
  if (!gold.empty()) g /= static_cast<S>(gold.size());
  return g;
}

// Highest logit wins; ties prefer O, then B, then I.
template <typename S>
std::vector<Tag> argmax_tags(const Matrix<S>& logits) {
  std::vector<Tag> out;
  out.reserve(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Tag best = Tag::O;
    for (Tag c : {Tag::B, Tag::I})
      if (logits(i, static_cast<int>(c)) > logits(i, static_cast<int>(best))) best = c;
    out.push_back(best);
  }
  return out;
}

// Gradients of token_cross_entropy(forward(...).logits, gold) with respect to
// every parameter, for the masks realized in `st`.
template <typename S>
Params<S> backward(const ForwardState<S>& st, const SequenceInput<S>& input, const Params<S>& params,
                   const EncoderConfig& cfg, std::span<const Tag> gold) {
  Params<S> grad = params.zeros_like();
  const auto t = st.z.rows();
  if (t == 0) return grad;
  const auto d = static_cast<Eigen::Index>(cfg.d_model);

  const Matrix<S> dlogits = cross_entropy_grad(st.logits, gold);
  grad.cls_w = st.y.transpose() * dlogits;
  grad.cls_b = dlogits.colwise().sum();
  Matrix<S> dx = dlogits * params.cls_w.transpose();

  const auto heads = static_cast<Eigen::Index>(cfg.n_heads);
  const auto dk = d / std::max<Eigen::Index>(heads, 1);
  const S scale = S(1) / std::sqrt(static_cast<S>(dk));
  for (std::size_t li = cfg.n_layers; li-- > 0;) {
    const auto& p = params.layers[li];
    const auto& c = st.layers[li];
    auto& g = grad.layers[li];

    // x2 = LN2(x1 + f)
    Matrix<S> dr2 = detail::layer_norm_backward<S>(dx, p.ln2_g, c.ln2, g.ln2_g, g.ln2_b);
    Matrix<S> df = dr2;
    if (c.mask2.size()) df.array() *= c.mask2.array();
    g.w2 = c.ff_act.transpose() * df;
    g.b2 = df.colwise().sum();
    Matrix<S> dact = df * p.w2.transpose();
    dact.array() *= (c.ff_pre.array() > S(0)).template cast<S>();
    g.w1 = c.x1.transpose() * dact;
    g.b1 = dact.colwise().sum();
    Matrix<S> dx1 = dr2 + dact * p.w1.transpose();

    // x1 = LN1(x + a)
    Matrix<S> dr1 = detail::layer_norm_backward<S>(dx1, p.ln1_g, c.ln1, g.ln1_g, g.ln1_b);
    Matrix<S> da = dr1;
    if (c.mask1.size()) da.array() *= c.mask1.array();
    g.wo = c.heads.transpose() * da;
    g.bo = da.colwise().sum();
    const Matrix<S> dheads = da * p.wo.transpose();

    Matrix<S> dq(t, d), dk_(t, d), dv(t, d);
    for (Eigen::Index h = 0; h < heads; ++h) {
      const auto& a = c.attn[static_cast<std::size_t>(h)];
      const auto dout = dheads.middleCols(h * dk, dk);
      dv.middleCols(h * dk, dk) = a.transpose() * dout;
      Matrix<S> dattn = dout * c.v.middleCols(h * dk, dk).transpose();
      Matrix<S> dscores(t, t);
      for (Eigen::Index i = 0; i < t; ++i) {
        const S dot = (dattn.row(i).array() * a.row(i).array()).sum();
        dscores.row(i) = a.row(i).array() * (dattn.row(i).array() - dot);
      }
      dscores *= scale;
      dq.middleCols(h * dk, dk) = dscores * c.k.middleCols(h * dk, dk);
      dk_.middleCols(h * dk, dk) = dscores.transpose() * c.q.middleCols(h * dk, dk);
    }
    g.wq = c.x.transpose() * dq;
    g.bq = dq.colwise().sum();
    g.wk = c.x.transpose() * dk_;
    g.bk = dk_.colwise().sum();
    g.wv = c.x.transpose() * dv;
    g.bv = dv.colwise().sum();
    dx = dr1 + dq * p.wq.transpose() + dk_ * p.wk.transpose() + dv * p.wv.transpose();
  }

  // Positional encoding is additive, so dx is also d(loss)/dZ.
  if (!input.lookup_ids.empty()) {
    const auto de = params.embedding.cols();
    for (std::size_t i = 0; i < input.lookup_ids.size(); ++i)
      grad.embedding.row(static_cast<Eigen::Index>(input.lookup_ids[i])) += dx.row(static_cast<Eigen::Index>(i)).head(de);
  }

  std::string bad;
  if (!grad.all_finite(&bad)) throw NonFiniteError("non-finite gradient for parameter " + bad);
  return grad;
}

template <typename S>
S loss(const SequenceInput<S>& input, const Params<S>& params, const EncoderConfig& cfg, std::span<const Tag> gold) {
  return token_cross_entropy(forward(input, params, cfg).logits, gold);
}

}  // namespace disner::nn
