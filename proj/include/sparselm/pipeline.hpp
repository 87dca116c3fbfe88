#pragma once

#include <map>
#include <string>
#include <vector>

#include "sparselm/checkpoint.hpp"
#include "sparselm/embedding.hpp"
#include "sparselm/evaluator.hpp"
#include "sparselm/sparse_coder.hpp"
#include "sparselm/trainer.hpp"

namespace sparselm {

// "key = value" lines; '#' starts a comment; blank lines ignored.
std::map<std::string, std::string> parse_config_file(const std::string& path);

// Metrics TSV: '#' echo/header lines, then one row per eval point.
void write_metrics(const std::vector<MetricsRow>& rows,
                   const std::string& config_echo, const std::string& path);
std::vector<MetricsRow> read_metrics(const std::string& path);

// Deterministic tail split of an already shuffled corpus.
std::pair<EncodedCorpus, EncodedCorpus> split_corpus(const EncodedCorpus& all,
                                                     double val_fraction);

struct BuildVocabCmd {
  std::string corpus, out;
  int base_size = 2000;
  int max_vocab = 10000;
  int min_count = 1;
};
struct BuildVocabResult {
  int vocab_size = 0;
  int base_size = 0;
  long long unk_count = 0;
};
BuildVocabResult cmd_build_vocab(const BuildVocabCmd& cmd);

struct PretrainCmd {
  std::string corpus, vocab, out;
  SgnsConfig sgns;
};
struct PretrainResult {
  int vocab_size = 0;
  int dim = 0;
  std::vector<double> epoch_data_loss;
};
PretrainResult cmd_pretrain(const PretrainCmd& cmd);

struct CodeCmd {
  std::string embeddings, vocab, out;
  int base_size = 2000;
  CoderConfig coder;
};
struct CodeResult {
  double mean_rare_nonzeros = 0.0;
  long long total_nonzeros = 0;
  double zero_fraction = 0.0;        // over the rare x B coefficient grid
  int flagged = 0;
  double median_rel_fit_err = 0.0;   // ||Ux - w|| / ||w|| over rare words
};
CodeResult cmd_code(const CodeCmd& cmd);

struct TrainCmd {
  std::string corpus, vocab, codes;  // codes unused for uncompressed variants
  std::string val_corpus;            // empty: split val_fraction off corpus
  std::string variant = "z";
  int base_size = 0;                 // required for compressed variants
  int dim_e = 64, dim_c = 64;
  double val_fraction = 0.05;
  TrainConfig train;
  std::string checkpoint_out, metrics_out;
  std::string config_echo;
};
struct TrainCmdResult {
  TrainResult result;
  double final_val_ppl = 0.0;
  int vocab_size = 0;
};
TrainCmdResult cmd_train(const TrainCmd& cmd);

struct EvalCmd {
  std::string checkpoint, test_corpus;
};
struct EvalResult {
  double ppl = 0.0;
  PerplexityStats stats;
  MemoryReport memory;
  std::string report_text;  // ppl + counts + memory report, stable key order
};
EvalResult cmd_eval(const EvalCmd& cmd);

// Merges metrics files into one plot-ready TSV (series column first).
// Empty out_path writes to stdout.
void cmd_report(const std::vector<std::string>& metrics_paths,
                const std::string& out_path);

}  // namespace sparselm
