#include "sparselm/evaluator.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace sparselm {

double perplexity(const ModelParams& params, const CodeBook& codes,
                  const EncodedCorpus& corpus, int words_per_batch,
                  PerplexityStats* stats) {
  params.cfg.validate();
  check_codes(params, codes);
  const int C = params.cfg.C;
  const MatF w_dense = densify_output_weights(params, codes);
  const VecF b_dense = densify_output_bias(params, codes);

  double sum_log2p = 0.0;
  long long n_targets = 0;
  long long n_unk = 0;

  BatchStream stream(corpus, words_per_batch);
  Batch batch;
  while (stream.next(batch)) {
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

    std::vector<int> targets;
    MatF H(C, (Eigen::Index)batch.mask_count());
    Eigen::Index n = 0;
    for (int s = 0; s < S; ++s)
      for (int t = 0; t < T; ++t)
        if (batch.mask[std::size_t(s) * T + t]) {
          H.col(n++) = trace.h[std::size_t(t)].col(s);
          targets.push_back(batch.target_ids[std::size_t(s) * T + t]);
        }

    MatF scores = w_dense.transpose() * H;  // V x n
    scores.colwise() += b_dense;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double lse = log_sum_exp(scores.col(j).data(), scores.rows());
      const double logp = double(scores(targets[std::size_t(j)], j)) - lse;
      sum_log2p += logp / M_LN2;
      ++n_targets;
      if (targets[std::size_t(j)] == corpus.unk_id) ++n_unk;
    }
  }
  if (n_targets == 0)
    throw ConfigError("perplexity: corpus has no target positions");
  const double mean = sum_log2p / double(n_targets);
  if (stats) {
    stats->targets = n_targets;
    stats->unk_targets = n_unk;
    stats->mean_log2p = mean;
  }
  return std::exp2(-mean);
}

SubnetCounts count_parameters(const VariantConfig& cfg) {
  cfg.validate();
  const long long E = cfg.E, C = cfg.C, B = cfg.B, V = cfg.V;
  SubnetCounts n;
  n.encoding = 4 * (C * E + C * C + C);
  if (cfg.compressed()) {
    n.embedding = B * E;
    n.prediction = B * (C + 1);
    if (cfg.variant == Variant::kCompressedW) n.prediction += V;
  } else {
    n.embedding = V * E;
    n.prediction = V * (C + 1);
  }
  n.zregression = cfg.use_zregression ? C + 1 : 0;
  return n;
}

MemoryReport memory_report(const VariantConfig& cfg, const CodeBook& codes) {
  cfg.validate();
  MemoryReport r;
  r.counts = count_parameters(cfg);
  r.trainable_params = r.counts.total();
  if (cfg.compressed()) {
    if (codes.size() != cfg.V)
      throw ShapeError("memory_report: codebook covers " +
                       std::to_string(codes.size()) + " words, config V=" +
                       std::to_string(cfg.V));
    r.code_nonzeros = codes.total_nonzeros();
    r.code_bytes = r.code_nonzeros * 8;
  }
  r.compressed_bytes = r.trainable_params * 4 + r.code_bytes;

  SubnetCounts ref;  // uncompressed-z at the same dimensions
  const long long E = cfg.E, C = cfg.C, V = cfg.V;
  ref.embedding = V * E;
  ref.encoding = 4 * (C * E + C * C + C);
  ref.prediction = V * (C + 1);
  ref.zregression = C + 1;
  r.reference_params = ref.total();
  r.reference_bytes = r.reference_params * 4;
  r.reduction = 1.0 - double(r.compressed_bytes) / double(r.reference_bytes);
  return r;
}

std::string format_memory_report(const MemoryReport& r) {
  std::ostringstream out;
  out << "embedding_params\t" << r.counts.embedding << '\n'
      << "encoding_params\t" << r.counts.encoding << '\n'
      << "prediction_params\t" << r.counts.prediction << '\n'
      << "zregression_params\t" << r.counts.zregression << '\n'
      << "trainable_params\t" << r.trainable_params << '\n'
      << "code_nonzeros\t" << r.code_nonzeros << '\n'
      << "code_bytes\t" << r.code_bytes << '\n'
      << "compressed_bytes\t" << r.compressed_bytes << '\n'
      << "reference_params\t" << r.reference_params << '\n'
      << "reference_bytes\t" << r.reference_bytes << '\n';
  char buf[64];
  std::snprintf(buf, sizeof buf, "reduction_percent\t%.4f\n",
                r.reduction * 100.0);
  out << buf;
  return out.str();
}

}  // namespace sparselm
