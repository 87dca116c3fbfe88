#include "sparselm/trainer.hpp"

#include <cmath>
#include <cstdio>

#include "sparselm/evaluator.hpp"

namespace sparselm {

NoiseDistribution noise_from_counts(const std::vector<long long>& counts,
                                    double distortion) {
  if (counts.empty()) throw ConfigError("noise: empty count vector");
  std::vector<double> p(counts.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 0) throw ConfigError("noise: negative count");
    p[i] = std::pow(double(counts[i]), distortion);
    sum += p[i];
  }
  if (sum <= 0.0) throw ConfigError("noise: all counts are zero");
  double floored = 0.0;
  for (auto& x : p) {
    x = std::max(x / sum, 1e-9);
    floored += x;
  }
  for (auto& x : p) x /= floored;
  return NoiseDistribution(std::move(p), distortion);
}

NoiseDistribution build_noise(const Vocabulary& vocab, double distortion) {
  return noise_from_counts(vocab.freq, distortion);
}

namespace {

// Equal-shape tensor lists from params and the gradient accumulator.
struct TensorPairs {
  std::vector<std::pair<std::string, MatF*>> params;
  std::vector<std::pair<std::string, MatF*>> grads;
};

MetricsRow eval_row(long long batch_index, double train_loss,
                    ModelParams& params, const CodeBook& codes,
                    const EncodedCorpus& val_corpus, const TrainConfig& cfg) {
  MetricsRow row;
  row.batch_index = batch_index;
  row.train_loss = train_loss;
  row.val_ppl = perplexity(params, codes, val_corpus, cfg.words_per_batch);
  const MatF contexts = collect_contexts(params, codes, val_corpus,
                                         cfg.words_per_batch, cfg.z_contexts);
  const ZDiagnostics zd = z_diagnostics(params, codes, contexts);
  row.mean_true_logz = zd.mean_true_logz;
  row.mean_abs_dlogz = zd.mean_abs_diff;
  if (cfg.verbose)
    std::fprintf(stderr,
                 "batch %lld  loss %.4f  val_ppl %.3f  logz %.3f  |dlogz| %.3f\n",
                 row.batch_index, row.train_loss, row.val_ppl,
                 row.mean_true_logz, row.mean_abs_dlogz);
  return row;
}

}  // namespace

TrainResult train(ModelParams& params, const CodeBook& codes,
                  const EncodedCorpus& train_corpus,
                  const EncodedCorpus& val_corpus, const Vocabulary& vocab,
                  const TrainConfig& cfg) {
  cfg.validate();
  params.cfg.validate();
  check_codes(params, codes);
  if (vocab.size() != params.cfg.V)
    throw ShapeError("train: vocabulary has " + std::to_string(vocab.size()) +
                     " words, model V=" + std::to_string(params.cfg.V));

  const int C = params.cfg.C;
  const NoiseDistribution noise = build_noise(vocab, cfg.noise_distortion);
  Rng neg_rng(seed_for(cfg.seed, "negatives"));
  const AdamConfig adam_cfg{cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps};

  const std::vector<Batch> batches = make_batches(train_corpus,
                                                  cfg.words_per_batch);
  ModelParams grads = params.zeros_like();
  auto param_list = params.tensors();
  auto grad_list = grads.tensors();
  std::vector<AdamSlot<MatF>> slots(param_list.size());

  TrainResult result;
  long long batch_index = 0;
  double run_loss = 0.0;
  long long run_batches = 0;
  long long last_eval_batch = -1;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (const Batch& batch : batches) {
      ++batch_index;
      const int S = batch.S, T = batch.T;

      const std::size_t n_steps = std::size_t(T), n_sent = std::size_t(S);
      std::vector<std::vector<int>> step_ids(n_steps,
                                             std::vector<int>(n_sent));
      for (int t = 0; t < T; ++t)
        for (int s = 0; s < S; ++s)
          step_ids[std::size_t(t)][std::size_t(s)] =
              batch.input_ids[std::size_t(s) * T + t];

      std::vector<MatF> xs(n_steps);
      for (int t = 0; t < T; ++t)
        xs[std::size_t(t)] = embed_columns(step_ids[std::size_t(t)], params,
                                           codes);
      const LstmTrace<float> trace = lstm_forward(std::move(xs), params);

      const Eigen::Index n_targets = Eigen::Index(batch.mask_count());
      MatF H(C, n_targets);
      std::vector<int> targets;
      targets.reserve(std::size_t(n_targets));
      std::vector<std::pair<int, int>> slots_ts;  // (t, s) per context
      slots_ts.reserve(std::size_t(n_targets));
      Eigen::Index n = 0;
      for (int s = 0; s < S; ++s)
        for (int t = 0; t < T; ++t)
          if (batch.mask[std::size_t(s) * T + t]) {
            H.col(n++) = trace.h[std::size_t(t)].col(s);
            targets.push_back(batch.target_ids[std::size_t(s) * T + t]);
            slots_ts.emplace_back(t, s);
          }

      std::vector<std::vector<int>> negatives(targets.size());
      if (cfg.shared_negatives) {
        std::vector<int> shared(std::size_t(cfg.k));
        for (int j = 0; j < cfg.k; ++j) shared[std::size_t(j)] =
            noise.sample(neg_rng);
        for (auto& negs : negatives) negs = shared;
      } else {
        for (auto& negs : negatives) {
          negs.resize(std::size_t(cfg.k));
          for (int j = 0; j < cfg.k; ++j) negs[std::size_t(j)] =
              noise.sample(neg_rng);
        }
      }

      for (auto& [name, g] : grad_list) g->setZero();
      NceBatchResult<float> nce = nce_batch<float>(
          H, targets, negatives, params, codes, noise, cfg.logit_clamp,
          &grads);
      result.saturated += nce.saturated;
      if (!std::isfinite(nce.loss))
        throw NumericError("train: non-finite loss at batch " +
                           std::to_string(batch_index) + " (saturated " +
                           std::to_string(result.saturated) + " logits)");

      std::vector<MatF> dh_steps(std::size_t(T), MatF::Zero(C, S));
      for (std::size_t j = 0; j < slots_ts.size(); ++j)
        dh_steps[std::size_t(slots_ts[j].first)].col(slots_ts[j].second) +=
            nce.d_h.col(Eigen::Index(j));
      const LstmGrads<float> lg = lstm_backward(trace, dh_steps, params);
      grads.lstm_wx += lg.d_wx;
      grads.lstm_wh += lg.d_wh;
      grads.lstm_b += lg.d_b;
      for (int t = 0; t < T; ++t)
        scatter_embedding_grad(step_ids[std::size_t(t)],
                               lg.d_x[std::size_t(t)], codes, grads.emb);

      for (std::size_t i = 0; i < param_list.size(); ++i)
        adam_step(*param_list[i].second, *grad_list[i].second, slots[i],
                  adam_cfg, param_list[i].first);

      epoch_loss += nce.loss;
      run_loss += nce.loss;
      ++run_batches;

      if (cfg.eval_every > 0 && batch_index % cfg.eval_every == 0) {
        result.metrics.push_back(eval_row(batch_index,
                                          run_loss / double(run_batches),
                                          params, codes, val_corpus, cfg));
        last_eval_batch = batch_index;
        run_loss = 0.0;
        run_batches = 0;
      }
    }
    if (!batches.empty()) {
      result.epoch_train_loss.push_back(epoch_loss / double(batches.size()));
      if (cfg.verbose)
        std::fprintf(stderr, "epoch %d/%d  mean_loss %.4f\n", epoch + 1,
                     cfg.epochs, result.epoch_train_loss.back());
    }
  }

  if (batch_index != last_eval_batch) {
    const double tail_loss =
        run_batches > 0 ? run_loss / double(run_batches) : 0.0;
    result.metrics.push_back(
        eval_row(batch_index, tail_loss, params, codes, val_corpus, cfg));
  }
  return result;
}

MatF collect_contexts(const ModelParams& params, const CodeBook& codes,
                      const EncodedCorpus& corpus, int words_per_batch,
                      int max_contexts) {
  const int C = params.cfg.C;
  MatF out(C, max_contexts);
  Eigen::Index n = 0;
  BatchStream stream(corpus, words_per_batch);
  Batch batch;
  while (n < max_contexts && stream.next(batch)) {
    const int S = batch.S, T = batch.T;
    const std::size_t n_steps = std::size_t(T), n_sent = std::size_t(S);
    std::vector<MatF> xs(n_steps);
    std::vector<int> step_ids(n_sent);
    for (int t = 0; t < T; ++t) {
      for (int s = 0; s < S; ++s)
        step_ids[std::size_t(s)] = batch.input_ids[std::size_t(s) * T + t];
      xs[std::size_t(t)] = embed_columns(step_ids, params, codes);
    }
    const LstmTrace<float> trace = lstm_forward(std::move(xs), params);
    for (int s = 0; s < S && n < max_contexts; ++s)
      for (int t = 0; t < T && n < max_contexts; ++t)
        if (batch.mask[std::size_t(s) * T + t])
          out.col(n++) = trace.h[std::size_t(t)].col(s);
  }
  return out.leftCols(n);
}

ZDiagnostics z_diagnostics(const ModelParams& params, const CodeBook& codes,
                           const MatF& contexts) {
  check_codes(params, codes);
  const Eigen::Index N = contexts.cols();
  ZDiagnostics zd;
  if (N == 0) return zd;

  const MatF w_dense = densify_output_weights(params, codes);
  const VecF b_dense = densify_output_bias(params, codes);
  MatF scores = w_dense.transpose() * contexts;  // V x N
  scores.colwise() += b_dense;

  zd.predicted_logz.resize(std::size_t(N));
  zd.true_logz.resize(std::size_t(N));
  zd.min_true_logz = HUGE_VAL;
  zd.max_true_logz = -HUGE_VAL;
  for (Eigen::Index j = 0; j < N; ++j) {
    const double true_logz = log_sum_exp(scores.col(j).data(), scores.rows());
    double predicted = 0.0;
    if (params.cfg.use_zregression) {
      const VecF h = contexts.col(j);
      predicted = -double(log_z_inverse(h, params));
    }
    zd.true_logz[std::size_t(j)] = true_logz;
    zd.predicted_logz[std::size_t(j)] = predicted;
    zd.mean_true_logz += true_logz;
    zd.mean_abs_diff += std::fabs(predicted - true_logz);
    zd.baseline_mean_abs += std::fabs(true_logz);
    zd.min_true_logz = std::min(zd.min_true_logz, true_logz);
    zd.max_true_logz = std::max(zd.max_true_logz, true_logz);
  }
  zd.mean_true_logz /= double(N);
  zd.mean_abs_diff /= double(N);
  zd.baseline_mean_abs /= double(N);
  return zd;
}

}  // namespace sparselm
