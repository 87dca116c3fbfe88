// Command-line front end: build-vocab, pretrain, code, train, eval, report.
// Every subcommand accepts --config FILE with "key = value" lines ('#'
// comments); command-line flags override file values, which override
// defaults. Required input/output paths must be given as flags. The
// effective configuration is echoed for provenance: into the metrics and
// checkpoint artifacts for train, to stderr elsewhere (the
// vocabulary/embedding/code formats carry no comment syntax).

#include <algorithm>
#include <cstdio>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sparselm/pipeline.hpp"

namespace {

std::string fmt_double(double v) {
  char b[64];
  std::snprintf(b, sizeof b, "%.9g", v);
  return b;
}

void kv(std::ostringstream& out, const char* key, const std::string& value) {
  out << key << " = " << value << "\n";
}

// Feeds "key = value" lines into options the command line left unset, so
// flags keep precedence. Keys accept '-' or '_'. Applied after parsing
// because CLI11 ignores a config registered on a subcommand.
void apply_config_file(CLI::App* sub, const std::string& path) {
  if (path.empty()) return;
  for (const auto& [key, value] : sparselm::parse_config_file(path)) {
    std::string name = "--" + key;
    std::replace(name.begin(), name.end(), '_', '-');
    CLI::Option* opt = sub->get_option_no_throw(name);
    if (!opt)
      throw sparselm::FormatError("config file " + path + ": unknown key '" +
                                  key + "'");
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse-code compressed LSTM language model toolkit"};
  app.require_subcommand(1);
  std::string config_path;

  sparselm::BuildVocabCmd bv;
  CLI::App* c_bv =
      app.add_subcommand("build-vocab", "count words, write the id table");
  c_bv->add_option("--config", config_path, "key = value defaults file");
  c_bv->add_option("--corpus", bv.corpus, "tokenized text, one sentence per line")
      ->required();
  c_bv->add_option("--base-size", bv.base_size, "dense base vocabulary size B");
  c_bv->add_option("--max-vocab", bv.max_vocab,
                   "total vocabulary cap, sentinels included");
  c_bv->add_option("--min-count", bv.min_count, "drop words rarer than this");
  c_bv->add_option("--out", bv.out, "output vocabulary path")->required();

  sparselm::PretrainCmd pt;
  CLI::App* c_pt =
      app.add_subcommand("pretrain", "skip-gram embeddings for the coder");
  c_pt->add_option("--config", config_path, "key = value defaults file");
  c_pt->add_option("--corpus", pt.corpus, "training text")->required();
  c_pt->add_option("--vocab", pt.vocab, "vocabulary file")->required();
  c_pt->add_option("--dim", pt.sgns.dim, "embedding dimension");
  c_pt->add_option("--window", pt.sgns.window, "max context window");
  c_pt->add_option("--negatives", pt.sgns.negatives, "negative samples per pair");
  c_pt->add_option("--epochs", pt.sgns.epochs, "training epochs");
  c_pt->add_option("--lr", pt.sgns.lr, "initial learning rate");
  c_pt->add_option("--seed", pt.sgns.seed, "RNG seed");
  c_pt->add_option("--out", pt.out, "output embeddings path")->required();

  sparselm::CodeCmd cd;
  CLI::App* c_cd =
      app.add_subcommand("code", "fit sparse codes over the base words");
  c_cd->add_option("--config", config_path, "key = value defaults file");
  c_cd->add_option("--embeddings", cd.embeddings, "pretrained embeddings")
      ->required();
  c_cd->add_option("--vocab", cd.vocab, "vocabulary file")->required();
  c_cd->add_option("--base-size", cd.base_size, "base vocabulary size B")
      ->required();
  c_cd->add_option("--w-alpha", cd.coder.w_alpha, "l1 / fitting loss ratio");
  c_cd->add_option("--w-beta", cd.coder.w_beta, "sum-to-one / fitting ratio");
  c_cd->add_option("--steps", cd.coder.steps, "Adam steps per word");
  c_cd->add_option("--lr", cd.coder.adam.lr, "Adam learning rate");
  c_cd->add_option("--threshold", cd.coder.rel_threshold,
                   "drop entries below this fraction of the max");
  c_cd->add_option("--seed", cd.coder.seed, "RNG seed");
  c_cd->add_option("--threads", cd.coder.threads, "worker threads");
  c_cd->add_flag("--verbose", cd.coder.verbose, "progress to stderr");
  c_cd->add_option("--out", cd.out, "output codes path")->required();

  sparselm::TrainCmd tr;
  bool per_target_negatives = false;
  bool quiet = false;
  CLI::App* c_tr = app.add_subcommand("train", "train the language model");
  c_tr->add_option("--config", config_path, "key = value defaults file");
  c_tr->add_option("--corpus", tr.corpus, "training text")->required();
  c_tr->add_option("--vocab", tr.vocab, "vocabulary file")->required();
  c_tr->add_option("--codes", tr.codes,
                   "codes file (compressed variants only)");
  c_tr->add_option("--val-corpus", tr.val_corpus,
                   "validation text; default splits --val-fraction off the "
                   "training corpus");
  c_tr->add_option("--val-fraction", tr.val_fraction,
                   "validation share of the corpus when --val-corpus is unset");
  c_tr->add_option("--variant", tr.variant, "s | z | z-wb | z-w");
  c_tr->add_option("--base-size", tr.base_size,
                   "base vocabulary size B (compressed variants)");
  c_tr->add_option("--dim-e", tr.dim_e, "embedding dimension E");
  c_tr->add_option("--dim-c", tr.dim_c, "context dimension C");
  c_tr->add_option("--k", tr.train.k, "noise samples per target");
  c_tr->add_option("--batch-words", tr.train.words_per_batch,
                   "target positions per batch");
  c_tr->add_option("--lr", tr.train.lr, "Adam learning rate");
  c_tr->add_option("--epochs", tr.train.epochs, "training epochs");
  c_tr->add_option("--seed", tr.train.seed, "RNG seed");
  c_tr->add_option("--eval-every", tr.train.eval_every,
                   "batches between metric rows");
  c_tr->add_option("--noise-distortion", tr.train.noise_distortion,
                   "unigram exponent of the noise distribution");
  CLI::Option* opt_zc = c_tr->add_option(
      "--z-contexts", tr.train.z_contexts,
      "held-out contexts per normalizer diagnostics row");
  c_tr->add_flag("--per-target-negatives", per_target_negatives,
                 "draw fresh noise words per target instead of per batch");
  c_tr->add_flag("--quiet", quiet, "suppress progress rows on stderr");
  c_tr->add_option("--checkpoint-out", tr.checkpoint_out, "checkpoint path");
  c_tr->add_option("--metrics-out", tr.metrics_out, "metrics TSV path");

  sparselm::EvalCmd ev;
  CLI::App* c_ev =
      app.add_subcommand("eval", "perplexity and memory report for a checkpoint");
  c_ev->add_option("--config", config_path, "key = value defaults file");
  c_ev->add_option("--checkpoint", ev.checkpoint, "trained checkpoint")
      ->required();
  c_ev->add_option("--test-corpus", ev.test_corpus, "held-out text")->required();

  std::vector<std::string> report_paths;
  std::string report_out;
  CLI::App* c_rp =
      app.add_subcommand("report", "merge metrics files into one TSV");
  c_rp->add_option("--config", config_path, "key = value defaults file");
  c_rp->add_option("--metrics", report_paths, "metrics TSV files")
      ->required()
      ->expected(-1);
  c_rp->add_option("--out", report_out, "output path; default stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    for (CLI::App* sub : app.get_subcommands())
      apply_config_file(sub, config_path);
    if (app.got_subcommand(c_bv)) {
      std::ostringstream e;
      kv(e, "command", "build-vocab");
      kv(e, "corpus", bv.corpus);
      kv(e, "base_size", std::to_string(bv.base_size));
      kv(e, "max_vocab", std::to_string(bv.max_vocab));
      kv(e, "min_count", std::to_string(bv.min_count));
      std::fputs(e.str().c_str(), stderr);
      sparselm::cmd_build_vocab(bv);
    } else if (app.got_subcommand(c_pt)) {
      std::ostringstream e;
      kv(e, "command", "pretrain");
      kv(e, "corpus", pt.corpus);
      kv(e, "vocab", pt.vocab);
      kv(e, "dim", std::to_string(pt.sgns.dim));
      kv(e, "window", std::to_string(pt.sgns.window));
      kv(e, "negatives", std::to_string(pt.sgns.negatives));
      kv(e, "epochs", std::to_string(pt.sgns.epochs));
      kv(e, "lr", fmt_double(pt.sgns.lr));
      kv(e, "seed", std::to_string(pt.sgns.seed));
      std::fputs(e.str().c_str(), stderr);
      sparselm::cmd_pretrain(pt);
    } else if (app.got_subcommand(c_cd)) {
      std::ostringstream e;
      kv(e, "command", "code");
      kv(e, "embeddings", cd.embeddings);
      kv(e, "vocab", cd.vocab);
      kv(e, "base_size", std::to_string(cd.base_size));
      kv(e, "w_alpha", fmt_double(cd.coder.w_alpha));
      kv(e, "w_beta", fmt_double(cd.coder.w_beta));
      kv(e, "steps", std::to_string(cd.coder.steps));
      kv(e, "lr", fmt_double(cd.coder.adam.lr));
      kv(e, "threshold", fmt_double(cd.coder.rel_threshold));
      kv(e, "seed", std::to_string(cd.coder.seed));
      kv(e, "threads", std::to_string(cd.coder.threads));
      std::fputs(e.str().c_str(), stderr);
      sparselm::cmd_code(cd);
    } else if (app.got_subcommand(c_tr)) {
      if (tr.variant == "s" && opt_zc->count() > 0)
        throw CLI::ValidationError(
            "--z-contexts: variant s trains without the normalizer head; "
            "remove ZRegression flags or pick z, z-wb, or z-w");
      tr.train.shared_negatives = !per_target_negatives;
      tr.train.verbose = !quiet;
      std::ostringstream e;
      kv(e, "command", "train");
      kv(e, "variant", tr.variant);
      kv(e, "corpus", tr.corpus);
      kv(e, "vocab", tr.vocab);
      kv(e, "codes", tr.codes);
      kv(e, "val_corpus", tr.val_corpus);
      kv(e, "val_fraction", fmt_double(tr.val_fraction));
      kv(e, "base_size", std::to_string(tr.base_size));
      kv(e, "dim_e", std::to_string(tr.dim_e));
      kv(e, "dim_c", std::to_string(tr.dim_c));
      kv(e, "k", std::to_string(tr.train.k));
      kv(e, "batch_words", std::to_string(tr.train.words_per_batch));
      kv(e, "lr", fmt_double(tr.train.lr));
      kv(e, "epochs", std::to_string(tr.train.epochs));
      kv(e, "seed", std::to_string(tr.train.seed));
      kv(e, "eval_every", std::to_string(tr.train.eval_every));
      kv(e, "noise_distortion", fmt_double(tr.train.noise_distortion));
      kv(e, "shared_negatives",
         tr.train.shared_negatives ? "true" : "false");
      kv(e, "z_contexts", std::to_string(tr.train.z_contexts));
      tr.config_echo = e.str();
      const sparselm::TrainCmdResult res = sparselm::cmd_train(tr);
      std::fprintf(stderr, "train: V=%d final_val_ppl %.6f\n", res.vocab_size,
                   res.final_val_ppl);
    } else if (app.got_subcommand(c_ev)) {
      const sparselm::EvalResult res = sparselm::cmd_eval(ev);
      std::fputs(res.report_text.c_str(), stdout);
    } else if (app.got_subcommand(c_rp)) {
      sparselm::cmd_report(report_paths, report_out);
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
