#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sparselm/numeric.hpp"
#include "sparselm/sparse_coder.hpp"

namespace sparselm {

enum class Variant {
  kUncompressedS,   // full softmax params, no ZRegression
  kUncompressedZ,   // full params + ZRegression
  kCompressedWb,    // coded embeddings/output weights, coded biases
  kCompressedW,     // coded weights, independent per-word biases
};

Variant parse_variant(const std::string& token);  // "s" | "z" | "z-wb" | "z-w"
const char* variant_token(Variant v);
const char* variant_name(Variant v);              // long display name

struct VariantConfig {
  Variant variant = Variant::kUncompressedZ;
  int E = 64;
  int C = 64;
  int B = 0;
  int V = 0;
  bool use_zregression = true;

  static VariantConfig make(Variant v, int E, int C, int B, int V);

  bool compressed() const {
    return variant == Variant::kCompressedWb || variant == Variant::kCompressedW;
  }
  bool has_out_c() const { return compressed(); }
  bool has_out_b() const {
    return !compressed() || variant == Variant::kCompressedW;
  }
  int emb_cols() const { return compressed() ? B : V; }
  void validate() const;
};

// All trainable tensors, one-column matrices for vectors so everything goes
// through one registry. Absent tensors have size 0. T is float in training,
// double in gradient checks.
template <class T>
struct ModelParamsT {
  VariantConfig cfg;
  Mat<T> emb;      // E x (B or V) base/word embeddings
  Mat<T> lstm_wx;  // 4C x E, gate rows packed [input; forget; cell; output]
  Mat<T> lstm_wh;  // 4C x C
  Mat<T> lstm_b;   // 4C x 1
  Mat<T> out_w;    // C x (B or V)
  Mat<T> out_c;    // B x 1 coded output biases (compressed variants)
  Mat<T> out_b;    // V x 1 per-word biases (uncompressed and compressed-w)
  Mat<T> z_w;      // C x 1 normalizer regression weights
  Mat<T> z_b;      // 1 x 1

  void init(std::uint64_t seed);
  std::vector<std::pair<std::string, Mat<T>*>> tensors();
  std::vector<std::pair<std::string, const Mat<T>*>> tensors() const;
  long long parameter_count() const;
  ModelParamsT<T> zeros_like() const;

  template <class T2>
  ModelParamsT<T2> cast() const {
    ModelParamsT<T2> out;
    out.cfg = cfg;
    out.emb = emb.template cast<T2>();
    out.lstm_wx = lstm_wx.template cast<T2>();
    out.lstm_wh = lstm_wh.template cast<T2>();
    out.lstm_b = lstm_b.template cast<T2>();
    out.out_w = out_w.template cast<T2>();
    out.out_c = out_c.template cast<T2>();
    out.out_b = out_b.template cast<T2>();
    out.z_w = z_w.template cast<T2>();
    out.z_b = z_b.template cast<T2>();
    return out;
  }
};

using ModelParams = ModelParamsT<float>;

// Uniform(-0.05, 0.05) for dense weights, zeros for biases, +1 forget-gate
// bias. Each tensor draws from its own seed stream, so the values of one
// tensor do not depend on which other tensors the variant instantiates.
template <class T>
void ModelParamsT<T>::init(std::uint64_t seed) {
  cfg.validate();
  const int P = cfg.emb_cols();
  auto fill = [&](Mat<T>& m, Eigen::Index rows, Eigen::Index cols,
                  const char* name) {
    m.resize(rows, cols);
    Rng rng(seed_for(seed, name));
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i)
        m(i, j) = T(rng.uniform(-0.05, 0.05));
  };
  fill(emb, cfg.E, P, "emb");
  fill(lstm_wx, 4 * cfg.C, cfg.E, "lstm_wx");
  fill(lstm_wh, 4 * cfg.C, cfg.C, "lstm_wh");
  lstm_b = Mat<T>::Zero(4 * cfg.C, 1);
  lstm_b.block(cfg.C, 0, cfg.C, 1).setConstant(T(1));
  fill(out_w, cfg.C, P, "out_w");
  out_c = cfg.has_out_c() ? Mat<T>::Zero(cfg.B, 1) : Mat<T>();
  out_b = cfg.has_out_b() ? Mat<T>::Zero(cfg.V, 1) : Mat<T>();
  if (cfg.use_zregression) {
    fill(z_w, cfg.C, 1, "z_w");
    z_b = Mat<T>::Zero(1, 1);
  } else {
    z_w = Mat<T>();
    z_b = Mat<T>();
  }
}

template <class T>
std::vector<std::pair<std::string, Mat<T>*>> ModelParamsT<T>::tensors() {
  std::vector<std::pair<std::string, Mat<T>*>> out = {
      {"emb", &emb},     {"lstm_wx", &lstm_wx}, {"lstm_wh", &lstm_wh},
      {"lstm_b", &lstm_b}, {"out_w", &out_w},   {"out_c", &out_c},
      {"out_b", &out_b}, {"z_w", &z_w},         {"z_b", &z_b}};
  std::erase_if(out, [](const auto& kv) { return kv.second->size() == 0; });
  return out;
}

template <class T>
std::vector<std::pair<std::string, const Mat<T>*>> ModelParamsT<T>::tensors()
    const {
  std::vector<std::pair<std::string, const Mat<T>*>> out = {
      {"emb", &emb},     {"lstm_wx", &lstm_wx}, {"lstm_wh", &lstm_wh},
      {"lstm_b", &lstm_b}, {"out_w", &out_w},   {"out_c", &out_c},
      {"out_b", &out_b}, {"z_w", &z_w},         {"z_b", &z_b}};
  std::erase_if(out, [](const auto& kv) { return kv.second->size() == 0; });
  return out;
}

template <class T>
long long ModelParamsT<T>::parameter_count() const {
  long long n = 0;
  for (const auto& [name, m] : tensors()) n += (long long)m->size();
  return n;
}

template <class T>
ModelParamsT<T> ModelParamsT<T>::zeros_like() const {
  ModelParamsT<T> out;
  out.cfg = cfg;
  out.emb = Mat<T>::Zero(emb.rows(), emb.cols());
  out.lstm_wx = Mat<T>::Zero(lstm_wx.rows(), lstm_wx.cols());
  out.lstm_wh = Mat<T>::Zero(lstm_wh.rows(), lstm_wh.cols());
  out.lstm_b = Mat<T>::Zero(lstm_b.rows(), lstm_b.cols());
  out.out_w = Mat<T>::Zero(out_w.rows(), out_w.cols());
  out.out_c = Mat<T>::Zero(out_c.rows(), out_c.cols());
  out.out_b = Mat<T>::Zero(out_b.rows(), out_b.cols());
  out.z_w = Mat<T>::Zero(z_w.rows(), z_w.cols());
  out.z_b = Mat<T>::Zero(z_b.rows(), z_b.cols());
  return out;
}

// One-hot codebook over the full vocabulary; what uncompressed variants use
// internally so every variant shares one forward/backward code path.
CodeBook identity_codes(int vocab_size);

template <class T>
void check_codes(const ModelParamsT<T>& p, const CodeBook& codes) {
  if (codes.size() != p.cfg.V)
    throw ShapeError("codebook covers " + std::to_string(codes.size()) +
                     " words, model expects " + std::to_string(p.cfg.V));
  if (codes.base_size != p.cfg.emb_cols())
    throw ShapeError("codebook base size " + std::to_string(codes.base_size) +
                     " does not match parameter columns " +
                     std::to_string(p.cfg.emb_cols()));
}

// ---- single-item forward ops ----

template <class T>
Vec<T> embed(int id, const ModelParamsT<T>& p, const CodeBook& codes) {
  Vec<T> out = Vec<T>::Zero(p.cfg.E);
  for (const auto& [idx, c] : codes.at(id).entries)
    out += T(c) * p.emb.col(idx);
  return out;
}

template <class T>
Vec<T> output_weight(int id, const ModelParamsT<T>& p, const CodeBook& codes) {
  Vec<T> out = Vec<T>::Zero(p.cfg.C);
  for (const auto& [idx, c] : codes.at(id).entries)
    out += T(c) * p.out_w.col(idx);
  return out;
}

template <class T>
T output_bias(int id, const ModelParamsT<T>& p, const CodeBook& codes) {
  if (p.cfg.variant == Variant::kCompressedWb) {
    T b = T(0);
    for (const auto& [idx, c] : codes.at(id).entries)
      b += T(c) * p.out_c(idx, 0);
    return b;
  }
  return p.out_b(id, 0);
}

template <class T>
T score(const Vec<T>& h, int id, const ModelParamsT<T>& p,
        const CodeBook& codes) {
  if (h.size() != p.cfg.C)
    throw ShapeError("score: h has " + std::to_string(h.size()) +
                     " dims, model C=" + std::to_string(p.cfg.C));
  return output_weight(id, p, codes).dot(h) + output_bias(id, p, codes);
}

// log of Z_h^{-1} = W_Z'h + b_Z; the training-time unnormalized probability
// is exp(score) * exp(log_z_inverse).
template <class T>
T log_z_inverse(const Vec<T>& h, const ModelParamsT<T>& p) {
  if (!p.cfg.use_zregression)
    throw ConfigError("log_z_inverse: variant '" +
                      std::string(variant_name(p.cfg.variant)) +
                      "' has no ZRegression head");
  return p.z_w.col(0).dot(h) + p.z_b(0, 0);
}

template <class T>
void lstm_step(const Vec<T>& x, const Vec<T>& h_prev, const Vec<T>& c_prev,
               const ModelParamsT<T>& p, Vec<T>& h_out, Vec<T>& c_out) {
  const int C = p.cfg.C;
  Vec<T> z = p.lstm_wx * x + p.lstm_wh * h_prev + p.lstm_b.col(0);
  Vec<T> gi = z.segment(0, C).unaryExpr([](T v) { return sigmoid(v); });
  Vec<T> gf = z.segment(C, C).unaryExpr([](T v) { return sigmoid(v); });
  Vec<T> gg = z.segment(2 * C, C).array().tanh().matrix();
  Vec<T> go = z.segment(3 * C, C).unaryExpr([](T v) { return sigmoid(v); });
  c_out = gf.cwiseProduct(c_prev) + gi.cwiseProduct(gg);
  h_out = go.cwiseProduct(c_out.array().tanh().matrix());
}

// ---- dense materialization (per-word weights for all V ids) ----

template <class T>
Mat<T> densify_embeddings(const ModelParamsT<T>& p, const CodeBook& codes) {
  check_codes(p, codes);
  Mat<T> out = Mat<T>::Zero(p.cfg.E, p.cfg.V);
  for (int id = 0; id < p.cfg.V; ++id)
    for (const auto& [idx, c] : codes.at(id).entries)
      out.col(id) += T(c) * p.emb.col(idx);
  return out;
}

template <class T>
Mat<T> densify_output_weights(const ModelParamsT<T>& p,
                              const CodeBook& codes) {
  check_codes(p, codes);
  Mat<T> out = Mat<T>::Zero(p.cfg.C, p.cfg.V);
  for (int id = 0; id < p.cfg.V; ++id)
    for (const auto& [idx, c] : codes.at(id).entries)
      out.col(id) += T(c) * p.out_w.col(idx);
  return out;
}

template <class T>
Vec<T> densify_output_bias(const ModelParamsT<T>& p, const CodeBook& codes) {
  check_codes(p, codes);
  Vec<T> out = Vec<T>::Zero(p.cfg.V);
  for (int id = 0; id < p.cfg.V; ++id) out[id] = output_bias(id, p, codes);
  return out;
}

// Softmax over all V words with max subtraction, accumulated in double.
// The ZRegression factor is constant in the word and cancels here.
template <class T>
VecD full_distribution(const Vec<T>& h, const ModelParamsT<T>& p,
                       const CodeBook& codes) {
  check_codes(p, codes);
  if (!h.allFinite()) throw NumericError("full_distribution: non-finite h");
  VecD s(p.cfg.V);
  for (int id = 0; id < p.cfg.V; ++id) s[id] = double(score(h, id, p, codes));
  const double lse = log_sum_exp(s);
  return (s.array() - lse).exp().matrix();
}

// ---- batched LSTM with stored traces for backprop ----

template <class T>
struct LstmTrace {
  int steps = 0;
  int batch = 0;
  std::vector<Mat<T>> x;                  // E x S inputs per step
  std::vector<Mat<T>> gi, gf, gg, go;     // C x S gate activations
  std::vector<Mat<T>> c, h;               // C x S states
};

template <class T>
LstmTrace<T> lstm_forward(std::vector<Mat<T>> xs, const ModelParamsT<T>& p) {
  const int C = p.cfg.C;
  LstmTrace<T> tr;
  tr.steps = int(xs.size());
  tr.batch = xs.empty() ? 0 : int(xs[0].cols());
  tr.x = std::move(xs);
  tr.gi.resize(tr.steps);
  tr.gf.resize(tr.steps);
  tr.gg.resize(tr.steps);
  tr.go.resize(tr.steps);
  tr.c.resize(tr.steps);
  tr.h.resize(tr.steps);
  const int S = tr.batch;
  Mat<T> h_prev = Mat<T>::Zero(C, S);
  Mat<T> c_prev = Mat<T>::Zero(C, S);
  Mat<T> z(4 * C, S);
  for (int t = 0; t < tr.steps; ++t) {
    if (tr.x[t].rows() != p.cfg.E || tr.x[t].cols() != S)
      throw ShapeError("lstm_forward: step input " + shape_str(tr.x[t]) +
                       " expected " + std::to_string(p.cfg.E) + "x" +
                       std::to_string(S));
    z.noalias() = p.lstm_wx * tr.x[t];
    z.noalias() += p.lstm_wh * h_prev;
    z.colwise() += p.lstm_b.col(0);
    tr.gi[t] = z.topRows(C).unaryExpr([](T v) { return sigmoid(v); });
    tr.gf[t] = z.middleRows(C, C).unaryExpr([](T v) { return sigmoid(v); });
    tr.gg[t] = z.middleRows(2 * C, C).array().tanh().matrix();
    tr.go[t] = z.middleRows(3 * C, C).unaryExpr([](T v) { return sigmoid(v); });
    tr.c[t] = tr.gf[t].cwiseProduct(c_prev) + tr.gi[t].cwiseProduct(tr.gg[t]);
    tr.h[t] = tr.go[t].cwiseProduct(tr.c[t].array().tanh().matrix());
    h_prev = tr.h[t];
    c_prev = tr.c[t];
  }
  return tr;
}

template <class T>
struct LstmGrads {
  Mat<T> d_wx, d_wh, d_b;
  std::vector<Mat<T>> d_x;  // gradient w.r.t. the step inputs
};

// dh_loss[t] is the loss gradient arriving at h_t (zero at padded cells).
template <class T>
LstmGrads<T> lstm_backward(const LstmTrace<T>& tr,
                           const std::vector<Mat<T>>& dh_loss,
                           const ModelParamsT<T>& p) {
  const int C = p.cfg.C;
  const int S = tr.batch;
  if (int(dh_loss.size()) != tr.steps)
    throw ShapeError("lstm_backward: " + std::to_string(dh_loss.size()) +
                     " loss grads for " + std::to_string(tr.steps) + " steps");
  LstmGrads<T> g;
  g.d_wx = Mat<T>::Zero(4 * C, p.cfg.E);
  g.d_wh = Mat<T>::Zero(4 * C, C);
  g.d_b = Mat<T>::Zero(4 * C, 1);
  g.d_x.assign(std::size_t(tr.steps), Mat<T>());
  const Mat<T> zero = Mat<T>::Zero(C, S);
  Mat<T> dh = Mat<T>::Zero(C, S);
  Mat<T> dc = Mat<T>::Zero(C, S);
  Mat<T> dz(4 * C, S);
  for (int t = tr.steps - 1; t >= 0; --t) {
    dh += dh_loss[t];
    const Mat<T> tc = tr.c[t].array().tanh().matrix();
    const Mat<T>& c_prev = t > 0 ? tr.c[std::size_t(t) - 1] : zero;
    const Mat<T>& h_prev = t > 0 ? tr.h[std::size_t(t) - 1] : zero;
    const Mat<T> dgo = dh.cwiseProduct(tc);
    const Mat<T> dct =
        dc + (dh.array() * tr.go[t].array() * (1 - tc.array().square()))
                 .matrix();
    dz.topRows(C) = (dct.array() * tr.gg[t].array() * tr.gi[t].array() *
                     (1 - tr.gi[t].array()))
                        .matrix();
    dz.middleRows(C, C) = (dct.array() * c_prev.array() * tr.gf[t].array() *
                           (1 - tr.gf[t].array()))
                              .matrix();
    dz.middleRows(2 * C, C) =
        (dct.array() * tr.gi[t].array() * (1 - tr.gg[t].array().square()))
            .matrix();
    dz.middleRows(3 * C, C) =
        (dgo.array() * tr.go[t].array() * (1 - tr.go[t].array())).matrix();
    g.d_wx.noalias() += dz * tr.x[t].transpose();
    g.d_wh.noalias() += dz * h_prev.transpose();
    g.d_b.col(0) += dz.rowwise().sum();
    g.d_x[std::size_t(t)].noalias() = p.lstm_wx.transpose() * dz;
    dh.noalias() = p.lstm_wh.transpose() * dz;
    dc = dct.cwiseProduct(tr.gf[t]);
  }
  return g;
}

// ---- gather/scatter through the codebook ----

template <class T>
Mat<T> embed_columns(const std::vector<int>& ids, const ModelParamsT<T>& p,
                     const CodeBook& codes) {
  Mat<T> out = Mat<T>::Zero(p.cfg.E, Eigen::Index(ids.size()));
  for (std::size_t j = 0; j < ids.size(); ++j)
    for (const auto& [idx, c] : codes.at(ids[j]).entries)
      out.col(Eigen::Index(j)) += T(c) * p.emb.col(idx);
  return out;
}

template <class T>
void scatter_embedding_grad(const std::vector<int>& ids, const Mat<T>& d_cols,
                            const CodeBook& codes, Mat<T>& d_emb) {
  for (std::size_t j = 0; j < ids.size(); ++j)
    for (const auto& [idx, c] : codes.at(ids[j]).entries)
      d_emb.col(idx) += T(c) * d_cols.col(Eigen::Index(j));
}

template <class T>
Mat<T> gather_output_weights(const std::vector<int>& ids,
                             const ModelParamsT<T>& p, const CodeBook& codes) {
  Mat<T> out = Mat<T>::Zero(p.cfg.C, Eigen::Index(ids.size()));
  for (std::size_t j = 0; j < ids.size(); ++j)
    for (const auto& [idx, c] : codes.at(ids[j]).entries)
      out.col(Eigen::Index(j)) += T(c) * p.out_w.col(idx);
  return out;
}

template <class T>
Vec<T> gather_output_bias(const std::vector<int>& ids,
                          const ModelParamsT<T>& p, const CodeBook& codes) {
  Vec<T> out(Eigen::Index(ids.size()));
  for (std::size_t j = 0; j < ids.size(); ++j)
    out[Eigen::Index(j)] = output_bias(ids[j], p, codes);
  return out;
}

// Routes per-word weight/bias gradients back into the coded tensors.
template <class T>
void scatter_output_grad(const std::vector<int>& ids, const Mat<T>& d_w_cols,
                         const Vec<T>& d_b, const ModelParamsT<T>& p,
                         const CodeBook& codes, ModelParamsT<T>& grads) {
  for (std::size_t j = 0; j < ids.size(); ++j) {
    const auto& entries = codes.at(ids[j]).entries;
    for (const auto& [idx, c] : entries)
      grads.out_w.col(idx) += T(c) * d_w_cols.col(Eigen::Index(j));
    if (p.cfg.variant == Variant::kCompressedWb) {
      for (const auto& [idx, c] : entries)
        grads.out_c(idx, 0) += T(c) * d_b[Eigen::Index(j)];
    } else {
      grads.out_b(ids[j], 0) += d_b[Eigen::Index(j)];
    }
  }
}

}  // namespace sparselm
