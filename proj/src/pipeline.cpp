#include "sparselm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <utility>

namespace sparselm {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Largest per-sentence target count; batch budgets must cover it.
int longest_targets(const EncodedCorpus& corpus) {
  std::size_t m = 0;
  for (const auto& s : corpus.sentences) m = std::max(m, s.size() - 1);
  return int(m);
}

}  // namespace

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("config file " + path + " line " +
                        std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw FormatError("config file " + path + " line " +
                        std::to_string(lineno) + ": empty key");
    kv[key] = value;  // last assignment wins
  }
  return kv;
}

void write_metrics(const std::vector<MetricsRow>& rows,
                   const std::string& config_echo, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write metrics file: " + path);
  std::istringstream echo(config_echo);
  std::string line;
  while (std::getline(echo, line)) out << "# " << line << "\n";
  out << "# batch_index\ttrain_loss\tval_ppl\tmean_true_logz\tmean_abs_dlogz\n";
  char buf[192];
  for (const MetricsRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%lld\t%.9g\t%.9g\t%.9g\t%.9g\n",
                  r.batch_index, r.train_loss, r.val_ppl, r.mean_true_logz,
                  r.mean_abs_dlogz);
    out << buf;
  }
  if (!out) throw FormatError("write failed: " + path);
}

std::vector<MetricsRow> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open metrics file: " + path);
  std::vector<MetricsRow> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    std::istringstream ss(body);
    MetricsRow r;
    if (!(ss >> r.batch_index >> r.train_loss >> r.val_ppl >>
          r.mean_true_logz >> r.mean_abs_dlogz))
      throw FormatError("metrics file " + path + " line " +
                        std::to_string(lineno) + ": expected 5 numeric fields");
    rows.push_back(r);
  }
  return rows;
}

std::pair<EncodedCorpus, EncodedCorpus> split_corpus(const EncodedCorpus& all,
                                                     double val_fraction) {
  if (!(val_fraction > 0.0) || val_fraction >= 1.0)
    throw ConfigError("val_fraction must be in (0, 1)");
  const long long n = (long long)all.sentences.size();
  if (n < 2)
    throw ConfigError(
        "need at least 2 sentences to split off a validation slice; "
        "pass a separate validation corpus instead");
  long long n_val = (long long)std::llround(val_fraction * double(n));
  n_val = std::max(1LL, std::min(n_val, n - 1));
  EncodedCorpus train, val;
  train.sentences.assign(all.sentences.begin(), all.sentences.end() - n_val);
  val.sentences.assign(all.sentences.end() - n_val, all.sentences.end());
  train.skipped_empty = all.skipped_empty;
  return {std::move(train), std::move(val)};
}

BuildVocabResult cmd_build_vocab(const BuildVocabCmd& cmd) {
  const TokenSentences raw = load_corpus(cmd.corpus);
  const Vocabulary vocab =
      build_vocabulary(raw, cmd.base_size, cmd.max_vocab, cmd.min_count);
  save_vocabulary(vocab, cmd.out);
  BuildVocabResult res;
  res.vocab_size = vocab.size();
  res.base_size = vocab.base_size;
  res.unk_count = vocab.freq[Vocabulary::kUnkId];
  std::fprintf(stderr, "build-vocab: V=%d B=%d unk_tokens=%lld -> %s\n",
               res.vocab_size, res.base_size, res.unk_count, cmd.out.c_str());
  return res;
}

PretrainResult cmd_pretrain(const PretrainCmd& cmd) {
  const TokenSentences raw = load_corpus(cmd.corpus);
  const Vocabulary vocab =
      load_vocabulary(cmd.vocab, Vocabulary::kNumSentinels);
  const EncodedCorpus enc = encode(raw, vocab, cmd.sgns.seed);
  PretrainResult res;
  res.vocab_size = vocab.size();
  res.dim = cmd.sgns.dim;
  const EmbeddingTable table =
      train_sgns(enc, vocab.size(), cmd.sgns, &res.epoch_data_loss);
  save_embeddings(table, vocab, cmd.out);
  for (std::size_t i = 0; i < res.epoch_data_loss.size(); ++i)
    std::fprintf(stderr, "pretrain: epoch %zu/%d data_loss %.6f\n", i + 1,
                 cmd.sgns.epochs, res.epoch_data_loss[i]);
  std::fprintf(stderr, "pretrain: V=%d E=%d -> %s\n", res.vocab_size, res.dim,
               cmd.out.c_str());
  return res;
}

CodeResult cmd_code(const CodeCmd& cmd) {
  const Vocabulary vocab = load_vocabulary(cmd.vocab, cmd.base_size);
  const EmbeddingTable table = load_embeddings(cmd.embeddings, vocab);
  const CodeBook book = fit_all(table, vocab, cmd.coder);
  save_codes(book, vocab, cmd.out);

  CodeResult res;
  res.mean_rare_nonzeros = book.mean_rare_nonzeros();
  res.total_nonzeros = book.total_nonzeros();
  res.flagged = book.flagged_count();

  const int B = vocab.base_size;
  const int V = vocab.size();
  const long long rare = V - B;
  if (rare > 0) {
    const MatD U = base_matrix(table, vocab).cast<double>();
    long long rare_nonzeros = 0;
    std::vector<double> errs;
    errs.reserve(std::size_t(rare));
    for (int id = B; id < V; ++id) {
      rare_nonzeros += (long long)book.codes[std::size_t(id)].entries.size();
      const VecD w = table.vectors.col(id).cast<double>();
      const VecD rec = reconstruct(U, book.codes[std::size_t(id)]);
      errs.push_back((rec - w).norm() / std::max(w.norm(), 1e-12));
    }
    res.zero_fraction = 1.0 - double(rare_nonzeros) / (double(rare) * B);
    std::sort(errs.begin(), errs.end());
    const std::size_t m = errs.size();
    res.median_rel_fit_err =
        (m % 2 == 1) ? errs[m / 2] : 0.5 * (errs[m / 2 - 1] + errs[m / 2]);
  }
  std::fprintf(stderr,
               "code: rare=%lld mean_nonzeros=%.3f zero_fraction=%.4f "
               "median_rel_err=%.4f flagged=%d -> %s\n",
               rare, res.mean_rare_nonzeros, res.zero_fraction,
               res.median_rel_fit_err, res.flagged, cmd.out.c_str());
  return res;
}

TrainCmdResult cmd_train(const TrainCmd& cmd) {
  const Variant variant = parse_variant(cmd.variant);
  const bool compressed =
      variant == Variant::kCompressedWb || variant == Variant::kCompressedW;
  if (compressed && cmd.base_size < 1)
    throw ConfigError("train: compressed variants need base_size > 0");
  if (compressed && cmd.codes.empty())
    throw ConfigError("train: compressed variants need a codes file");

  const Vocabulary vocab = load_vocabulary(
      cmd.vocab, compressed ? cmd.base_size : Vocabulary::kNumSentinels);
  const int V = vocab.size();
  CodeBook codes;
  if (compressed) {
    codes = load_codes(cmd.codes, vocab);
  } else {
    codes = identity_codes(V);
    if (!cmd.codes.empty())
      std::fprintf(stderr, "train: variant %s ignores the codes file\n",
                   cmd.variant.c_str());
  }

  EncodedCorpus train_enc, val_enc;
  {
    EncodedCorpus all =
        encode(load_corpus(cmd.corpus), vocab, cmd.train.seed);
    if (!cmd.val_corpus.empty()) {
      train_enc = std::move(all);
      val_enc = encode(load_corpus(cmd.val_corpus), vocab, cmd.train.seed);
    } else {
      std::tie(train_enc, val_enc) = split_corpus(all, cmd.val_fraction);
    }
  }

  ModelParams params;
  params.cfg = VariantConfig::make(variant, cmd.dim_e, cmd.dim_c,
                                   compressed ? cmd.base_size : V, V);
  params.init(cmd.train.seed);

  TrainCmdResult res;
  res.vocab_size = V;
  res.result = train(params, codes, train_enc, val_enc, vocab, cmd.train);
  if (!res.result.metrics.empty())
    res.final_val_ppl = res.result.metrics.back().val_ppl;

  if (!cmd.metrics_out.empty())
    write_metrics(res.result.metrics, cmd.config_echo, cmd.metrics_out);
  if (!cmd.checkpoint_out.empty()) {
    Checkpoint ck;
    ck.cfg = params.cfg;
    ck.vocab_path = cmd.vocab;
    ck.vocab_hash = file_fnv1a(cmd.vocab);
    ck.codes = std::move(codes);
    ck.params = std::move(params);
    ck.epochs_trained = cmd.train.epochs;
    ck.seed = cmd.train.seed;
    const std::size_t tail = std::min<std::size_t>(5, res.result.metrics.size());
    ck.metrics_tail.assign(res.result.metrics.end() - (long)tail,
                           res.result.metrics.end());
    ck.config_echo = cmd.config_echo;
    save_checkpoint(ck, cmd.checkpoint_out);
  }
  return res;
}

EvalResult cmd_eval(const EvalCmd& cmd) {
  const Checkpoint ck = load_checkpoint(cmd.checkpoint);
  const Vocabulary vocab =
      load_vocabulary(ck.vocab_path, ck.codes.base_size);
  if (file_fnv1a(ck.vocab_path) != ck.vocab_hash)
    throw FormatError("vocabulary file " + ck.vocab_path +
                      " does not match the hash stored in the checkpoint");
  const EncodedCorpus enc = encode(load_corpus(cmd.test_corpus), vocab, 0);

  EvalResult res;
  const int budget = std::max(256, longest_targets(enc));
  res.ppl = perplexity(ck.params, ck.codes, enc, budget, &res.stats);
  res.memory = memory_report(ck.cfg, ck.codes);

  char buf[128];
  std::string text;
  std::snprintf(buf, sizeof buf, "ppl\t%.9g\n", res.ppl);
  text += buf;
  std::snprintf(buf, sizeof buf, "test_targets\t%lld\n", res.stats.targets);
  text += buf;
  std::snprintf(buf, sizeof buf, "unk_targets\t%lld\n", res.stats.unk_targets);
  text += buf;
  text += format_memory_report(res.memory);
  res.report_text = std::move(text);
  return res;
}

void cmd_report(const std::vector<std::string>& metrics_paths,
                const std::string& out_path) {
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw FormatError("cannot write report file: " + out_path);
  }
  std::ostream& out = out_path.empty() ? std::cout : file;
  out << "# series\tbatch_index\ttrain_loss\tval_ppl\tmean_true_logz"
         "\tmean_abs_dlogz\n";
  char buf[192];
  for (const std::string& path : metrics_paths) {
    for (const MetricsRow& r : read_metrics(path)) {
      std::snprintf(buf, sizeof buf, "\t%lld\t%.9g\t%.9g\t%.9g\t%.9g\n",
                    r.batch_index, r.train_loss, r.val_ppl, r.mean_true_logz,
                    r.mean_abs_dlogz);
      out << path << buf;
    }
  }
  if (!out) throw FormatError("report write failed");
}

}  // namespace sparselm
