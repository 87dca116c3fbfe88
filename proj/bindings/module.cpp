// Python surface: the pipeline commands plus a few direct queries. Heavy
// calls release the GIL; results come back as plain dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sparselm/pipeline.hpp"

namespace py = pybind11;
using namespace sparselm;

namespace {

py::list metrics_list(const std::vector<MetricsRow>& rows) {
  py::list out;
  for (const MetricsRow& r : rows) {
    py::dict d;
    d["batch_index"] = r.batch_index;
    d["train_loss"] = r.train_loss;
    d["val_ppl"] = r.val_ppl;
    d["mean_true_logz"] = r.mean_true_logz;
    d["mean_abs_dlogz"] = r.mean_abs_dlogz;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "sparse-code compressed LSTM language model toolkit";

  m.def(
      "build_vocab",
      [](const std::string& corpus, const std::string& out, int base_size,
         int max_vocab, int min_count) {
        BuildVocabCmd cmd;
        cmd.corpus = corpus;
        cmd.out = out;
        cmd.base_size = base_size;
        cmd.max_vocab = max_vocab;
        cmd.min_count = min_count;
        BuildVocabResult r;
        {
          py::gil_scoped_release rel;
          r = cmd_build_vocab(cmd);
        }
        py::dict d;
        d["vocab_size"] = r.vocab_size;
        d["base_size"] = r.base_size;
        d["unk_count"] = r.unk_count;
        return d;
      },
      py::arg("corpus"), py::arg("out"), py::arg("base_size") = 2000,
      py::arg("max_vocab") = 10000, py::arg("min_count") = 1,
      "Count words in a one-sentence-per-line corpus and write the id table.");

  m.def(
      "pretrain",
      [](const std::string& corpus, const std::string& vocab,
         const std::string& out, int dim, int window, int negatives,
         int epochs, double lr, std::uint64_t seed) {
        PretrainCmd cmd;
        cmd.corpus = corpus;
        cmd.vocab = vocab;
        cmd.out = out;
        cmd.sgns.dim = dim;
        cmd.sgns.window = window;
        cmd.sgns.negatives = negatives;
        cmd.sgns.epochs = epochs;
        cmd.sgns.lr = lr;
        cmd.sgns.seed = seed;
        PretrainResult r;
        {
          py::gil_scoped_release rel;
          r = cmd_pretrain(cmd);
        }
        py::dict d;
        d["vocab_size"] = r.vocab_size;
        d["dim"] = r.dim;
        d["epoch_data_loss"] = r.epoch_data_loss;
        return d;
      },
      py::arg("corpus"), py::arg("vocab"), py::arg("out"), py::arg("dim") = 200,
      py::arg("window") = 5, py::arg("negatives") = 5, py::arg("epochs") = 5,
      py::arg("lr") = 0.025, py::arg("seed") = 1,
      "Train skip-gram embeddings used as sparse-coding targets.");

  m.def(
      "code",
      [](const std::string& embeddings, const std::string& vocab,
         const std::string& out, int base_size, double w_alpha, double w_beta,
         int steps, double lr, double threshold, std::uint64_t seed,
         int threads) {
        CodeCmd cmd;
        cmd.embeddings = embeddings;
        cmd.vocab = vocab;
        cmd.out = out;
        cmd.base_size = base_size;
        cmd.coder.w_alpha = w_alpha;
        cmd.coder.w_beta = w_beta;
        cmd.coder.steps = steps;
        cmd.coder.adam.lr = lr;
        cmd.coder.rel_threshold = threshold;
        cmd.coder.seed = seed;
        cmd.coder.threads = threads;
        CodeResult r;
        {
          py::gil_scoped_release rel;
          r = cmd_code(cmd);
        }
        py::dict d;
        d["mean_rare_nonzeros"] = r.mean_rare_nonzeros;
        d["total_nonzeros"] = r.total_nonzeros;
        d["zero_fraction"] = r.zero_fraction;
        d["flagged"] = r.flagged;
        d["median_rel_fit_err"] = r.median_rel_fit_err;
        return d;
      },
      py::arg("embeddings"), py::arg("vocab"), py::arg("out"),
      py::arg("base_size"), py::arg("w_alpha") = 1.0, py::arg("w_beta") = 0.1,
      py::arg("steps") = 2000, py::arg("lr") = 0.01,
      py::arg("threshold") = 0.015, py::arg("seed") = 1, py::arg("threads") = 1,
      "Fit nonnegative sparse codes for rare words over the base words.");

  m.def(
      "train",
      [](const std::string& corpus, const std::string& vocab,
         const std::string& codes, const std::string& variant, int base_size,
         int dim_e, int dim_c, int k, int batch_words, double lr, int epochs,
         std::uint64_t seed, int eval_every, double noise_distortion,
         const std::string& val_corpus, double val_fraction,
         const std::string& checkpoint_out, const std::string& metrics_out,
         bool verbose) {
        TrainCmd cmd;
        cmd.corpus = corpus;
        cmd.vocab = vocab;
        cmd.codes = codes;
        cmd.variant = variant;
        cmd.base_size = base_size;
        cmd.dim_e = dim_e;
        cmd.dim_c = dim_c;
        cmd.train.k = k;
        cmd.train.words_per_batch = batch_words;
        cmd.train.lr = lr;
        cmd.train.epochs = epochs;
        cmd.train.seed = seed;
        cmd.train.eval_every = eval_every;
        cmd.train.noise_distortion = noise_distortion;
        cmd.train.verbose = verbose;
        cmd.val_corpus = val_corpus;
        cmd.val_fraction = val_fraction;
        cmd.checkpoint_out = checkpoint_out;
        cmd.metrics_out = metrics_out;
        TrainCmdResult r;
        {
          py::gil_scoped_release rel;
          r = cmd_train(cmd);
        }
        py::dict d;
        d["vocab_size"] = r.vocab_size;
        d["final_val_ppl"] = r.final_val_ppl;
        d["epoch_train_loss"] = r.result.epoch_train_loss;
        d["saturated_logits"] = r.result.saturated;
        d["metrics"] = metrics_list(r.result.metrics);
        return d;
      },
      py::arg("corpus"), py::arg("vocab"), py::arg("codes") = std::string(),
      py::arg("variant") = "z", py::arg("base_size") = 0, py::arg("dim_e") = 64,
      py::arg("dim_c") = 64, py::arg("k") = 50, py::arg("batch_words") = 256,
      py::arg("lr") = 0.001, py::arg("epochs") = 1, py::arg("seed") = 1,
      py::arg("eval_every") = 200, py::arg("noise_distortion") = 0.75,
      py::arg("val_corpus") = std::string(), py::arg("val_fraction") = 0.05,
      py::arg("checkpoint_out") = std::string(),
      py::arg("metrics_out") = std::string(), py::arg("verbose") = false,
      "Train a language model variant (s, z, z-wb, z-w) with NCE.");

  m.def(
      "evaluate",
      [](const std::string& checkpoint, const std::string& test_corpus) {
        EvalCmd cmd;
        cmd.checkpoint = checkpoint;
        cmd.test_corpus = test_corpus;
        EvalResult r;
        {
          py::gil_scoped_release rel;
          r = cmd_eval(cmd);
        }
        py::dict d;
        d["ppl"] = r.ppl;
        d["test_targets"] = r.stats.targets;
        d["unk_targets"] = r.stats.unk_targets;
        d["trainable_params"] = r.memory.trainable_params;
        d["compressed_bytes"] = r.memory.compressed_bytes;
        d["reference_bytes"] = r.memory.reference_bytes;
        d["reduction"] = r.memory.reduction;
        d["report_text"] = r.report_text;
        return d;
      },
      py::arg("checkpoint"), py::arg("test_corpus"),
      "Perplexity and memory report for a trained checkpoint.");

  m.def(
      "report",
      [](const std::vector<std::string>& metrics_paths,
         const std::string& out) {
        py::gil_scoped_release rel;
        cmd_report(metrics_paths, out);
      },
      py::arg("metrics_paths"), py::arg("out"),
      "Merge metrics TSVs into one plot-ready table.");

  m.attr("__version__") = "0.1.0";
}
