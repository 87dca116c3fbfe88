#pragma once

#include <unordered_map>
#include <vector>

#include "sparselm/alias.hpp"
#include "sparselm/corpus.hpp"
#include "sparselm/model.hpp"

namespace sparselm {

// Unigram-derived sampling distribution P_n with O(1) alias draws.
class NoiseDistribution {
 public:
  NoiseDistribution(std::vector<double> probs, double distortion)
      : probs_(std::move(probs)), distortion_(distortion), alias_(probs_) {}

  int sample(Rng& rng) const { return alias_.sample(rng); }
  double prob(int id) const { return probs_[std::size_t(id)]; }
  int size() const { return int(probs_.size()); }
  double distortion() const { return distortion_; }
  const std::vector<double>& probs() const { return probs_; }

 private:
  std::vector<double> probs_;
  double distortion_;
  AliasTable alias_;
};

// P_n(w) proportional to count^distortion, floored at 1e-9 and renormalized.
NoiseDistribution noise_from_counts(const std::vector<long long>& counts,
                                    double distortion);
NoiseDistribution build_noise(const Vocabulary& vocab, double distortion);

template <class T>
struct NceBatchResult {
  double loss = 0.0;       // averaged over targets
  long long saturated = 0; // logits clamped to +-logit_clamp
  Mat<T> d_h;              // C x N context gradients (when grads requested)
};

// NCE objective over one batch of contexts. Per target n with logit
// l = score + logZ^-1 (clamped) and a = l - log(k*P_n(w)):
//   positive term softplus(-a), each negative term softplus(a),
// summed and divided by N. Candidate words are deduplicated so each
// parameter column is gathered and scattered once. With grads null the pass
// is forward-only. Clamped logits contribute zero gradient and are counted.
template <class T>
NceBatchResult<T> nce_batch(const Mat<T>& H, const std::vector<int>& targets,
                            const std::vector<std::vector<int>>& negatives,
                            const ModelParamsT<T>& p, const CodeBook& codes,
                            const NoiseDistribution& noise, double logit_clamp,
                            ModelParamsT<T>* grads) {
  const int C = p.cfg.C;
  const Eigen::Index N = Eigen::Index(targets.size());
  if (H.rows() != C || H.cols() != N)
    throw ShapeError("nce_batch: contexts " + shape_str(H) + " expected " +
                     std::to_string(C) + "x" + std::to_string(N));
  if (negatives.size() != targets.size())
    throw ShapeError("nce_batch: " + std::to_string(negatives.size()) +
                     " negative lists for " + std::to_string(targets.size()) +
                     " targets");
  if (noise.size() != p.cfg.V)
    throw ShapeError("nce_batch: noise over " + std::to_string(noise.size()) +
                     " words, model V=" + std::to_string(p.cfg.V));
  check_codes(p, codes);

  NceBatchResult<T> res;
  res.d_h = Mat<T>::Zero(C, N);
  if (N == 0) return res;

  std::vector<int> cand;
  std::unordered_map<int, int> cand_index;
  auto intern = [&](int id) {
    auto [it, inserted] = cand_index.emplace(id, int(cand.size()));
    if (inserted) cand.push_back(id);
    return it->second;
  };
  const std::size_t n_targets = std::size_t(N);
  std::vector<int> pos_row(n_targets);
  std::vector<std::vector<int>> neg_row(n_targets);
  for (Eigen::Index n = 0; n < N; ++n) {
    pos_row[std::size_t(n)] = intern(targets[std::size_t(n)]);
    const auto& negs = negatives[std::size_t(n)];
    if (negs.empty())
      throw ConfigError("nce_batch: target " + std::to_string(n) +
                        " has no negative samples (k must be >= 1)");
    neg_row[std::size_t(n)].reserve(negs.size());
    for (int id : negs) neg_row[std::size_t(n)].push_back(intern(id));
  }

  const Mat<T> W = gather_output_weights(cand, p, codes);  // C x m
  const Vec<T> b = gather_output_bias(cand, p, codes);     // m
  Mat<T> logits = W.transpose() * H;                       // m x N
  logits.colwise() += b;
  Vec<T> zrow;
  const bool zreg = p.cfg.use_zregression;
  if (zreg) {
    zrow = H.transpose() * p.z_w.col(0);
    zrow.array() += p.z_b(0, 0);
    logits.rowwise() += zrow.transpose();
  }

  Mat<T> d_logits;
  if (grads) d_logits = Mat<T>::Zero(logits.rows(), logits.cols());
  const double inv_n = 1.0 / double(N);
  double loss = 0.0;
  long long sat = 0;

  auto accumulate = [&](int row, Eigen::Index n, double k, bool positive) {
    double l = double(logits(row, n));
    bool clamped = false;
    if (l > logit_clamp) {
      l = logit_clamp;
      clamped = true;
    } else if (l < -logit_clamp) {
      l = -logit_clamp;
      clamped = true;
    }
    if (clamped) ++sat;
    const double a =
        l - std::log(k * noise.prob(cand[std::size_t(row)]));
    loss += (positive ? softplus(-a) : softplus(a)) * inv_n;
    if (grads && !clamped) {
      const double dl = (sigmoid(a) - (positive ? 1.0 : 0.0)) * inv_n;
      d_logits(row, n) += T(dl);
    }
  };
  for (Eigen::Index n = 0; n < N; ++n) {
    const double k = double(neg_row[std::size_t(n)].size());
    accumulate(pos_row[std::size_t(n)], n, k, true);
    for (int row : neg_row[std::size_t(n)]) accumulate(row, n, k, false);
  }
  res.loss = loss;
  res.saturated = sat;

  if (grads) {
    const Mat<T> d_w = H * d_logits.transpose();  // C x m
    const Vec<T> d_b = d_logits.rowwise().sum();  // m
    scatter_output_grad(cand, d_w, d_b, p, codes, *grads);
    res.d_h.noalias() = W * d_logits;
    if (zreg) {
      const Vec<T> d_z = d_logits.colwise().sum().transpose();  // N
      grads->z_w.col(0).noalias() += H * d_z;
      grads->z_b(0, 0) += d_z.sum();
      res.d_h.noalias() += p.z_w.col(0) * d_z.transpose();
    }
  }
  return res;
}

// Loss of the per-context objective for hand-checked values.
template <class T>
double nce_loss_value(const Vec<T>& h, int w_pos, const std::vector<int>& negs,
                      const ModelParamsT<T>& p, const CodeBook& codes,
                      const NoiseDistribution& noise,
                      double logit_clamp = 30.0) {
  Mat<T> H(h.size(), 1);
  H.col(0) = h;
  return nce_batch<T>(H, {w_pos}, {negs}, p, codes, noise, logit_clamp,
                      nullptr)
      .loss;
}

struct TrainConfig {
  int k = 50;                      // negatives per positive
  int words_per_batch = 256;
  double lr = 0.001;
  int epochs = 1;
  std::uint64_t seed = 1;
  int eval_every = 200;            // batches between metric rows; 0 = end only
  double noise_distortion = 0.75;
  bool shared_negatives = true;    // one draw per batch vs per target
  double logit_clamp = 30.0;
  int z_contexts = 256;            // held-out contexts per diagnostics row
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  bool verbose = false;            // progress rows to stderr

  void validate() const {
    if (k < 1) throw ConfigError("train: k must be >= 1");
    if (words_per_batch < 1)
      throw ConfigError("train: words_per_batch must be >= 1");
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (eval_every < 0) throw ConfigError("train: eval_every must be >= 0");
  }
};

struct MetricsRow {
  long long batch_index = 0;
  double train_loss = 0.0;
  double val_ppl = 0.0;
  double mean_true_logz = 0.0;
  double mean_abs_dlogz = 0.0;
};

struct TrainResult {
  std::vector<MetricsRow> metrics;
  std::vector<double> epoch_train_loss;
  long long saturated = 0;
};

// Mini-batch NCE training with one Adam step per batch. The codebook is a
// constant input; uncompressed variants take identity_codes(V).
TrainResult train(ModelParams& params, const CodeBook& codes,
                  const EncodedCorpus& train_corpus,
                  const EncodedCorpus& val_corpus, const Vocabulary& vocab,
                  const TrainConfig& cfg);

struct ZDiagnostics {
  std::vector<double> predicted_logz;  // -(W_Z'h + b_Z); 0 without the head
  std::vector<double> true_logz;       // log sum_i exp(s(h, w_i))
  double mean_true_logz = 0.0;
  double mean_abs_diff = 0.0;          // |predicted - true|
  double baseline_mean_abs = 0.0;      // |0 - true|, the Z=1 baseline
  double min_true_logz = 0.0;
  double max_true_logz = 0.0;
};

ZDiagnostics z_diagnostics(const ModelParams& params, const CodeBook& codes,
                           const MatF& contexts);

// Hidden states of the first max_contexts masked targets of a corpus.
MatF collect_contexts(const ModelParams& params, const CodeBook& codes,
                      const EncodedCorpus& corpus, int words_per_batch,
                      int max_contexts);

}  // namespace sparselm
