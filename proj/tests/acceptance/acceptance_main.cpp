// End-to-end acceptance harness. Each criterion prints one PASS/FAIL line
// with a short measurement summary and its wall time; the exit code is
// nonzero if any criterion fails. Heavy artifacts (the ~1M-token corpus,
// pretrained embeddings, fitted codes, trained models) are built once and
// shared by the later criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparselm/checkpoint.hpp"
#include "sparselm/evaluator.hpp"
#include "sparselm/pipeline.hpp"
#include "sparselm/sparse_coder.hpp"
#include "sparselm/trainer.hpp"
#include "support/synth.hpp"

using namespace sparselm;
using sparselm::testsupport::SynthConfig;
using sparselm::testsupport::synth_corpus;
using sparselm::testsupport::unigram_cross_entropy_bits;

namespace {

int g_failures = 0;

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

void expect(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

template <class Fn>
void criterion(int idx, const char* label, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  try {
    detail = fn();
  } catch (const std::exception& e) {
    ok = false;
    detail = e.what();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  std::printf("[%s] %2d. %s: %s (%.1fs)\n", ok ? "PASS" : "FAIL", idx, label,
              detail.c_str(), secs);
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  expect(bool(in), "cannot read " + path);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

// Artifacts shared between the desk-scale criteria.
struct Desk {
  TokenSentences raw;
  Vocabulary vocab;
  EncodedCorpus train, val, test;
  EmbeddingTable table;
  CodeBook codes;  // B=2000 fitted codes over V=10000
  bool codes_ready = false;

  ModelParams z_params;  // trained uncompressed model with the z head
  CodeBook z_codes;
  bool z_ready = false;
};

// ---------------------------------------------------------------------------
// 1. Whole-model gradient check.
// ---------------------------------------------------------------------------

CodeBook small_codes() {
  CodeBook book;
  book.base_size = 4;
  book.codes.resize(10);
  const std::vector<std::vector<std::pair<int, float>>> rare = {
      {{0, 0.5f}, {2, 0.5f}},            // 4
      {{1, 0.3f}, {3, 0.7f}},            // 5
      {{0, 0.2f}, {1, 0.3f}, {2, 0.5f}}, // 6
      {{2, 1.0f}},                       // 7
      {{0, 0.6f}, {3, 0.4f}},            // 8
      {{1, 0.8f}, {2, 0.2f}}};           // 9
  for (int i = 0; i < 10; ++i) {
    book.codes[std::size_t(i)].word_id = i;
    book.codes[std::size_t(i)].entries =
        i < 4 ? std::vector<std::pair<int, float>>{{i, 1.0f}}
              : rare[std::size_t(i - 4)];
  }
  return book;
}

struct GradProblem {
  CodeBook codes;
  NoiseDistribution noise;
  std::vector<std::vector<int>> inputs;     // step -> ids, batch of 2
  std::vector<int> targets;                 // flattened, step-major
  std::vector<std::vector<int>> negatives;  // k=3 each, with repeats
};

GradProblem grad_problem(const CodeBook& codes) {
  GradProblem gp{codes,
                 noise_from_counts({30, 20, 15, 10, 8, 6, 5, 4, 3, 2}, 0.75),
                 {{1, 1}, {4, 5}, {6, 7}, {8, 9}},
                 {4, 5, 6, 7, 8, 9, 2, 2},
                 {{3, 5, 5},
                  {0, 4, 2},
                  {8, 9, 9},
                  {1, 2, 3},
                  {5, 5, 5},
                  {0, 7, 3},
                  {2, 4, 6},
                  {9, 0, 2}}};
  return gp;
}

// Full forward pass in 64-bit: codes -> embeddings -> LSTM -> NCE loss.
double grad_loss(const ModelParamsT<double>& p, const GradProblem& gp,
                 ModelParamsT<double>* grads, long long* saturated) {
  const int steps = int(gp.inputs.size());
  const int S = int(gp.inputs[0].size());
  const std::size_t n_steps = gp.inputs.size();
  std::vector<Mat<double>> xs(n_steps);
  for (int t = 0; t < steps; ++t)
    xs[std::size_t(t)] = embed_columns(gp.inputs[std::size_t(t)], p, gp.codes);
  LstmTrace<double> tr = lstm_forward(std::move(xs), p);

  const int N = steps * S;
  Mat<double> H(p.cfg.C, N);
  for (int t = 0; t < steps; ++t)
    for (int s = 0; s < S; ++s) H.col(t * S + s) = tr.h[std::size_t(t)].col(s);

  auto res = nce_batch<double>(H, gp.targets, gp.negatives, p, gp.codes,
                               gp.noise, 30.0, grads);
  if (saturated) *saturated = res.saturated;
  if (grads) {
    std::vector<Mat<double>> dh(n_steps);
    for (int t = 0; t < steps; ++t) {
      dh[std::size_t(t)] = Mat<double>::Zero(p.cfg.C, S);
      for (int s = 0; s < S; ++s)
        dh[std::size_t(t)].col(s) = res.d_h.col(t * S + s);
    }
    LstmGrads<double> lg = lstm_backward(tr, dh, p);
    grads->lstm_wx += lg.d_wx;
    grads->lstm_wh += lg.d_wh;
    grads->lstm_b += lg.d_b;
    for (int t = 0; t < steps; ++t)
      scatter_embedding_grad(gp.inputs[std::size_t(t)], lg.d_x[std::size_t(t)],
                             gp.codes, grads->emb);
  }
  return res.loss;
}

std::string run_criterion_1() {
  double worst = 0.0;
  long long n_coords = 0;
  const std::vector<std::pair<Variant, const char*>> variants = {
      {Variant::kCompressedWb, "z-wb"},
      {Variant::kCompressedW, "z-w"},
      {Variant::kUncompressedZ, "z"}};
  for (const auto& [variant, token] : variants) {
    const bool compressed = variant == Variant::kCompressedWb ||
                            variant == Variant::kCompressedW;
    const CodeBook codes = compressed ? small_codes() : identity_codes(10);
    const GradProblem gp = grad_problem(codes);
    ModelParamsT<double> p;
    p.cfg = VariantConfig::make(variant, 4, 4, compressed ? 4 : 10, 10);
    p.init(17);

    ModelParamsT<double> grads = p.zeros_like();
    long long saturated = -1;
    grad_loss(p, gp, &grads, &saturated);
    expect(saturated == 0,
           fmt("%s: %lld clamped logits make the check degenerate", token,
               saturated));

    auto grad_tensors = grads.tensors();
    std::size_t gi = 0;
    for (auto& [name, mat] : p.tensors()) {
      expect(grad_tensors[gi].first == name, "tensor registry mismatch");
      const Mat<double>& g = *grad_tensors[gi].second;
      ++gi;
      for (Eigen::Index i = 0; i < mat->rows(); ++i)
        for (Eigen::Index j = 0; j < mat->cols(); ++j) {
          const double keep = (*mat)(i, j);
          const double h = 1e-4;
          (*mat)(i, j) = keep + h;
          const double up = grad_loss(p, gp, nullptr, nullptr);
          (*mat)(i, j) = keep - h;
          const double dn = grad_loss(p, gp, nullptr, nullptr);
          (*mat)(i, j) = keep;
          const double fd = (up - dn) / (2 * h);
          const double an = g(i, j);
          const double rel = std::abs(fd - an) /
                             std::max({std::abs(fd), std::abs(an), 1e-8});
          if (rel > worst) worst = rel;
          ++n_coords;
          expect(rel < 1e-4, fmt("%s %s[%lld,%lld]: analytic %.6e vs "
                                 "central-difference %.6e (rel %.3e)",
                                 token, name.c_str(), (long long)i,
                                 (long long)j, an, fd, rel));
        }
    }
  }
  return fmt("max rel err %.3e over %lld coordinates in 3 variants", worst,
             n_coords);
}

// ---------------------------------------------------------------------------
// 2. One-hot compression equivalence.
// ---------------------------------------------------------------------------

std::string run_criterion_2() {
  SynthConfig sc;
  sc.n_classes = 5;
  sc.words_per_class = 8;
  sc.min_len = 4;
  sc.max_len = 10;
  sc.target_tokens = 1000;
  sc.seed = 3;
  const TokenSentences raw = synth_corpus(sc);
  const Vocabulary vocab = build_vocabulary(raw, 10, 100, 1);
  const int V = vocab.size();
  const EncodedCorpus enc = encode(raw, vocab, 11);
  auto [train_enc, val_enc] = split_corpus(enc, 0.1);

  const CodeBook identity = identity_codes(V);
  ModelParams pz, pw;
  pz.cfg = VariantConfig::make(Variant::kUncompressedZ, 8, 8, V, V);
  pw.cfg = VariantConfig::make(Variant::kCompressedW, 8, 8, V, V);
  pz.init(11);
  pw.init(11);

  TrainConfig tc;
  tc.k = 5;
  tc.words_per_batch = 32;
  tc.lr = 0.003;
  tc.epochs = 2;
  tc.seed = 11;
  tc.eval_every = 3;
  tc.z_contexts = 16;
  const TrainResult rz = train(pz, identity, train_enc, val_enc, vocab, tc);
  const TrainResult rw = train(pw, identity, train_enc, val_enc, vocab, tc);

  expect(rz.metrics.size() == rw.metrics.size(), "metric row counts differ");
  for (std::size_t i = 0; i < rz.metrics.size(); ++i) {
    const MetricsRow& a = rz.metrics[i];
    const MetricsRow& b = rw.metrics[i];
    expect(a.batch_index == b.batch_index && a.train_loss == b.train_loss &&
               a.val_ppl == b.val_ppl &&
               a.mean_true_logz == b.mean_true_logz &&
               a.mean_abs_dlogz == b.mean_abs_dlogz,
           fmt("metrics row %zu differs between variants", i));
  }
  expect(rz.epoch_train_loss == rw.epoch_train_loss, "epoch losses differ");
  const double ppl_z = perplexity(pz, identity, val_enc, 64);
  const double ppl_w = perplexity(pw, identity, val_enc, 64);
  expect(ppl_z == ppl_w, fmt("perplexities differ: %.17g vs %.17g", ppl_z,
                             ppl_w));
  long long tokens = 0;
  for (const auto& s : enc.sentences) tokens += (long long)s.size() - 2;
  return fmt("V=%d, %lld tokens: %zu metric rows, %zu epoch losses and "
             "val ppl %.4f all bitwise equal",
             V, tokens, rz.metrics.size(), rz.epoch_train_loss.size(), ppl_z);
}

// ---------------------------------------------------------------------------
// 3. Sparse coder vs grid oracle.
// ---------------------------------------------------------------------------

// Objective at a point, with the penalty weights the adaptive rule assigns
// there: alpha*R1 rescales to L*w_alpha whenever R1 is nonzero (and likewise
// for the sum-to-one term), so J = L * (1 + w_a*[R1>0] + w_b*[R2>0]).
double coded_objective(const VecD& x, const MatD& U, const VecD& w,
                       const CoderConfig& cc) {
  const ObjectiveTerms t = objective_terms(x, U, w);
  double j = t.L;
  if (t.R1 > 1e-12) j += t.L * cc.w_alpha;
  if (t.R2 > 1e-12) j += t.L * cc.w_beta;
  return j;
}

// Exact minimum of the objective above over the grid {0, 0.01, ..., 1}^B
// for U = identity. Separability makes this closed-form: the minimum is one
// of (a) x = 0, (b) the best point on the sum=1 slice (integer knapsack),
// (c) the per-coordinate rounding of w.
double grid_oracle(const VecD& w, const CoderConfig& cc) {
  const int B = int(w.size());
  double l_round = 0.0;
  for (int i = 0; i < B; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int u = 0; u <= 100; ++u) {
      const double d = u / 100.0 - w[i];
      best = std::min(best, d * d);
    }
    l_round += best;
  }
  std::vector<double> dp(101, std::numeric_limits<double>::infinity());
  dp[0] = 0.0;
  for (int i = 0; i < B; ++i) {
    std::vector<double> nd(101, std::numeric_limits<double>::infinity());
    for (int s = 0; s <= 100; ++s) {
      if (!std::isfinite(dp[std::size_t(s)])) continue;
      for (int u = 0; u + s <= 100; ++u) {
        const double d = u / 100.0 - w[i];
        nd[std::size_t(s + u)] =
            std::min(nd[std::size_t(s + u)], dp[std::size_t(s)] + d * d);
      }
    }
    dp = std::move(nd);
  }
  const double l_simplex = dp[100];
  const double j_zero = (1.0 + cc.w_beta) * w.squaredNorm();
  const double j_round = (1.0 + cc.w_alpha + cc.w_beta) * l_round;
  const double j_simplex = (1.0 + cc.w_alpha) * l_simplex;
  return std::min({j_zero, j_round, j_simplex});
}

// Literal enumeration of the same grid, feasible for B <= 3.
double grid_brute(const VecD& w, const CoderConfig& cc) {
  const int B = int(w.size());
  const MatD U = MatD::Identity(B, B);
  double best = std::numeric_limits<double>::infinity();
  VecD x(B);
  const int n2 = B >= 3 ? 100 : 0;
  for (int u0 = 0; u0 <= 100; ++u0)
    for (int u1 = 0; u1 <= 100; ++u1)
      for (int u2 = 0; u2 <= n2; ++u2) {
        x[0] = u0 / 100.0;
        x[1] = u1 / 100.0;
        if (B >= 3) x[2] = u2 / 100.0;
        best = std::min(best, coded_objective(x, U, w, cc));
      }
  return best;
}

std::string run_criterion_3() {
  CoderConfig cc;  // stock settings: w_alpha 1, w_beta 0.1, 2000 Adam steps
  double worst_gap = 0.0;
  int instances = 0;
  for (int B = 2; B <= 5; ++B) {
    const MatD U = MatD::Identity(B, B);
    std::vector<VecD> ws;
    Rng rng(std::uint64_t(100 + B));
    VecD w(B);
    for (int i = 0; i < B; ++i) w[i] = rng.uniform(0.1, 0.9);
    ws.push_back(w);
    VecD simplex(B);  // exact grid point on the sum=1 slice: oracle can hit 0
    if (B == 2) simplex << 0.5, 0.5;
    if (B == 3) simplex << 0.5, 0.3, 0.2;
    if (B == 4) simplex << 0.4, 0.3, 0.2, 0.1;
    if (B == 5) simplex << 0.3, 0.25, 0.2, 0.15, 0.1;
    ws.push_back(simplex);

    for (const VecD& inst : ws) {
      const double oracle = grid_oracle(inst, cc);
      if (B <= 3) {
        const double brute = grid_brute(inst, cc);
        expect(std::abs(brute - oracle) < 1e-12,
               fmt("B=%d: closed-form oracle %.9e disagrees with "
                   "enumeration %.9e",
                   B, oracle, brute));
      }
      const SparseCode code =
          fit_code(inst, U, cc, cc.seed ^ std::uint64_t(37 * B + instances));
      VecD x = VecD::Zero(B);
      for (const auto& [idx, c] : code.entries) x[idx] = double(c);
      const double fitted = coded_objective(x, U, inst, cc);
      // Scale the 5% band by the objective of the empty code: the oracle's
      // optimum can be exactly zero when w lies on grid points, where a
      // plain ratio test is meaningless.
      const double scale = (1.0 + cc.w_beta) * inst.squaredNorm();
      const double gap = (fitted - oracle) / scale;
      worst_gap = std::max(worst_gap, gap);
      expect(gap < 0.05, fmt("B=%d instance %d: fitted objective %.6e vs "
                             "oracle %.6e, gap %.2f%% of the empty-code "
                             "objective %.6e",
                             B, instances, fitted, oracle, 100 * gap, scale));
      ++instances;
    }
  }

  // Base-word self-coding on the same dictionaries: fitting a column of U
  // must recover it nearly exactly (the one-hot code solves it with L = 0).
  double worst_self = 0.0;
  for (int B = 2; B <= 5; ++B) {
    const MatD U = MatD::Identity(B, B);
    for (int j = 0; j < B; ++j) {
      const VecD w = U.col(j);
      const SparseCode code = fit_code(w, U, cc, std::uint64_t(7 + j));
      const VecD rec = reconstruct(U, code);
      const double rel = (rec - w).squaredNorm() / w.squaredNorm();
      worst_self = std::max(worst_self, rel);
      expect(rel < 1e-3, fmt("self-coding of identity(%d) column %d: fitting "
                             "loss %.3e of ||w||^2",
                             B, j, rel));
    }
  }
  return fmt("%d grid instances, worst gap %.3f%% of the empty-code "
             "objective; worst self-coding loss %.2e of ||w||^2",
             instances, 100 * worst_gap, worst_self);
}

// ---------------------------------------------------------------------------
// 4. Code sparsity at desk scale (also builds the shared artifacts).
// ---------------------------------------------------------------------------

std::string run_criterion_4(Desk& desk) {
  desk.raw = synth_corpus(SynthConfig{});
  desk.vocab = build_vocabulary(desk.raw, 2000, 10000, 1);
  expect(desk.vocab.size() == 10000,
         fmt("vocabulary has %d words, wanted 10000", desk.vocab.size()));

  const EncodedCorpus all = encode(desk.raw, desk.vocab, 1);
  const long long n = (long long)all.sentences.size();
  const long long n_test = std::max(1LL, n * 2 / 100);
  const long long n_val = std::max(1LL, n * 2 / 100);
  desk.train.sentences.assign(all.sentences.begin(),
                              all.sentences.end() - n_val - n_test);
  desk.val.sentences.assign(all.sentences.end() - n_val - n_test,
                            all.sentences.end() - n_test);
  desk.test.sentences.assign(all.sentences.end() - n_test,
                             all.sentences.end());

  SgnsConfig sgns;
  sgns.dim = 200;
  sgns.window = 5;
  sgns.negatives = 5;
  sgns.epochs = 3;
  sgns.lr = 0.025;
  sgns.seed = 1;
  desk.table = train_sgns(desk.train, desk.vocab.size(), sgns, nullptr);

  CoderConfig cc;
  cc.seed = 1;
  desk.codes = fit_all(desk.table, desk.vocab, cc);
  desk.codes_ready = true;

  const int B = desk.vocab.base_size;
  const int V = desk.vocab.size();
  long long rare_nonzeros = 0;
  for (int id = B; id < V; ++id) {
    for (const auto& [idx, c] : desk.codes.at(id).entries) {
      expect(idx >= 0 && idx < B, fmt("word %d: base index %d out of range",
                                      id, idx));
      expect(c > 0.0f, fmt("word %d: nonpositive coefficient %g", id, c));
    }
    rare_nonzeros += desk.codes.at(id).nonzeros();
  }
  const double mean_nz = desk.codes.mean_rare_nonzeros();
  const double zero_frac =
      1.0 - double(rare_nonzeros) / (double(V - B) * double(B));
  expect(mean_nz >= 3.0 && mean_nz <= 15.0,
         fmt("mean nonzeros per rare code %.3f outside [3, 15]", mean_nz));
  expect(zero_frac > 0.98,
         fmt("zero coefficient fraction %.5f not above 0.98", zero_frac));
  return fmt("8000 rare codes over B=2000: mean nonzeros %.2f, zero "
             "fraction %.4f, %d flagged, all coefficients positive",
             mean_nz, zero_frac, desk.codes.flagged_count());
}

// ---------------------------------------------------------------------------
// 5. Parameter count closed forms vs tensor census.
// ---------------------------------------------------------------------------

std::string run_criterion_5() {
  const VariantConfig big =
      VariantConfig::make(Variant::kUncompressedZ, 200, 200, 10000, 10000);
  const SubnetCounts c = count_parameters(big);
  expect(c.embedding == 2000000,
         fmt("embedding subnet %lld != 2000000", c.embedding));
  expect(c.encoding == 320800,
         fmt("encoding subnet %lld != 320800", c.encoding));
  expect(c.prediction == 2010000,
         fmt("prediction subnet %lld != 2010000", c.prediction));

  for (Variant v : {Variant::kUncompressedS, Variant::kUncompressedZ,
                    Variant::kCompressedWb, Variant::kCompressedW}) {
    const bool compressed =
        v == Variant::kCompressedWb || v == Variant::kCompressedW;
    const VariantConfig cfg =
        VariantConfig::make(v, 200, 200, compressed ? 8000 : 10000, 10000);
    ModelParams p;
    p.cfg = cfg;
    p.init(1);
    expect(count_parameters(cfg).total() == p.parameter_count(),
           fmt("variant %s: closed form %lld != census %lld",
               variant_token(v), count_parameters(cfg).total(),
               p.parameter_count()));
  }
  return fmt("2000000 / 320800 / 2010000 at V=10k, E=C=200; census matches "
             "for all 4 variants");
}

// ---------------------------------------------------------------------------
// 6. Memory reduction bands.
// ---------------------------------------------------------------------------

CodeBook mean6_codes(int V, int B) {
  CodeBook book;
  book.base_size = B;
  book.codes.resize(std::size_t(V));
  for (int id = 0; id < V; ++id) {
    book.codes[std::size_t(id)].word_id = id;
    auto& entries = book.codes[std::size_t(id)].entries;
    if (id < B) {
      entries = {{id, 1.0f}};
    } else {
      const int start = id % (B - 6);
      for (int d = 0; d < 6; ++d)
        entries.emplace_back(start + d, 1.0f / 6.0f);
    }
  }
  return book;
}

std::string run_criterion_6() {
  const double r10 =
      100.0 * memory_report(VariantConfig::make(Variant::kCompressedW, 200,
                                                200, 8000, 10000),
                            mean6_codes(10000, 8000))
                  .reduction;
  const double r50 =
      100.0 * memory_report(VariantConfig::make(Variant::kCompressedW, 200,
                                                200, 8000, 50000),
                            mean6_codes(50000, 8000))
                  .reduction;
  expect(std::abs(r10 - 17.76) <= 3.0,
         fmt("V=10k reduction %.3f%% not within 17.76%% +- 3", r10));
  expect(std::abs(r50 - 79.75) <= 3.0,
         fmt("V=50k reduction %.3f%% not within 79.75%% +- 3", r50));
  return fmt("B=8000, mean 6 nonzeros: reduction %.2f%% (V=10k, band "
             "17.76+-3) and %.2f%% (V=50k, band 79.75+-3)",
             r10, r50);
}

// ---------------------------------------------------------------------------
// 7. Training sanity on the desk corpus.
// ---------------------------------------------------------------------------

std::string run_criterion_7(Desk& desk) {
  expect(desk.codes_ready, "desk artifacts unavailable (criterion 4 failed)");
  const int V = desk.vocab.size();
  const double uni_bits =
      unigram_cross_entropy_bits(desk.train, desk.val, V);
  const double uni_ppl = std::exp2(uni_bits);

  TrainConfig tc;
  tc.k = 25;
  tc.words_per_batch = 256;
  tc.lr = 0.003;
  tc.epochs = 4;
  tc.seed = 2;
  tc.eval_every = 0;  // one metrics row at the end of training
  tc.noise_distortion = 0.75;

  desk.z_codes = identity_codes(V);
  desk.z_params.cfg = VariantConfig::make(Variant::kUncompressedZ, 64, 64, V, V);
  desk.z_params.init(2);
  const TrainResult rz =
      train(desk.z_params, desk.z_codes, desk.train, desk.val, desk.vocab, tc);
  desk.z_ready = true;
  expect(!rz.metrics.empty(), "no metric rows from the z run");
  const double z_val_ppl = rz.metrics.back().val_ppl;

  ModelParams pw;
  pw.cfg = VariantConfig::make(Variant::kCompressedW, 64, 64, 2000, V);
  pw.init(2);
  const TrainResult rw =
      train(pw, desk.codes, desk.train, desk.val, desk.vocab, tc);

  for (const TrainResult* r : {&rz, &rw}) {
    expect(r->epoch_train_loss.size() == 4, "missing epoch losses");
    for (std::size_t e = 1; e < r->epoch_train_loss.size(); ++e)
      expect(r->epoch_train_loss[e] < r->epoch_train_loss[e - 1],
             fmt("epoch loss rose at epoch %zu: %.6f -> %.6f", e + 1,
                 r->epoch_train_loss[e - 1], r->epoch_train_loss[e]));
  }

  expect(z_val_ppl <= 0.8 * uni_ppl,
         fmt("z val ppl %.2f does not beat unigram %.2f by 20%%", z_val_ppl,
             uni_ppl));

  const double z_test = perplexity(desk.z_params, desk.z_codes, desk.test, 256);
  const double w_test = perplexity(pw, desk.codes, desk.test, 256);
  expect(w_test <= 1.15 * z_test,
         fmt("compressed test ppl %.2f exceeds 1.15x uncompressed %.2f",
             w_test, z_test));
  return fmt("z val ppl %.1f vs unigram %.1f (-%.0f%%); test ppl z %.1f vs "
             "z-w %.1f (ratio %.3f); epoch losses strictly decreasing",
             z_val_ppl, uni_ppl, 100.0 * (1.0 - z_val_ppl / uni_ppl), z_test,
             w_test, w_test / z_test);
}

// ---------------------------------------------------------------------------
// 8. Normalizer regression accuracy.
// ---------------------------------------------------------------------------

std::string run_criterion_8(Desk& desk) {
  expect(desk.z_ready, "trained model unavailable (criterion 7 failed)");
  const MatF contexts =
      collect_contexts(desk.z_params, desk.z_codes, desk.test, 256, 1000);
  expect(contexts.cols() == 1000,
         fmt("only %lld held-out contexts available",
             (long long)contexts.cols()));
  const ZDiagnostics d = z_diagnostics(desk.z_params, desk.z_codes, contexts);

  const std::string path = "acceptance_z_diagnostics.tsv";
  std::ofstream out(path);
  out << "# context\tpredicted_logz\ttrue_logz\n";
  char buf[96];
  for (std::size_t i = 0; i < d.predicted_logz.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu\t%.9g\t%.9g\n", i,
                  d.predicted_logz[i], d.true_logz[i]);
    out << buf;
  }
  expect(bool(out), "cannot write " + path);

  expect(d.mean_abs_diff < d.baseline_mean_abs,
         fmt("mean |predicted - true| %.4f not below the Z=1 baseline %.4f",
             d.mean_abs_diff, d.baseline_mean_abs));
  return fmt("1000 contexts: mean |predicted - true log Z| %.4f vs baseline "
             "%.4f (true log Z in [%.2f, %.2f]); series in %s",
             d.mean_abs_diff, d.baseline_mean_abs, d.min_true_logz,
             d.max_true_logz, path.c_str());
}

// ---------------------------------------------------------------------------
// 9. Determinism and persistence through the command pipeline.
// ---------------------------------------------------------------------------

std::string run_criterion_9() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "sparselm_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto at = [&](const char* name) { return (dir / name).string(); };

  SynthConfig sc;
  sc.n_classes = 6;
  sc.words_per_class = 7;
  sc.min_len = 4;
  sc.max_len = 9;
  sc.target_tokens = 1500;
  sc.seed = 9;
  {
    std::ofstream out(at("corpus.txt"));
    for (const auto& sent : synth_corpus(sc)) {
      for (std::size_t i = 0; i < sent.size(); ++i)
        out << (i ? " " : "") << sent[i];
      out << "\n";
    }
  }

  BuildVocabCmd bv;
  bv.corpus = at("corpus.txt");
  bv.out = at("vocab.tsv");
  bv.base_size = 10;
  bv.max_vocab = 100;
  cmd_build_vocab(bv);

  PretrainCmd pt;
  pt.corpus = bv.corpus;
  pt.vocab = bv.out;
  pt.out = at("emb.tsv");
  pt.sgns = {8, 3, 3, 1, 0.05, 5};
  cmd_pretrain(pt);

  CodeCmd code;
  code.embeddings = pt.out;
  code.vocab = bv.out;
  code.out = at("codes.tsv");
  code.base_size = 10;
  code.coder.steps = 150;
  cmd_code(code);

  TrainCmd tr;
  tr.corpus = bv.corpus;
  tr.vocab = bv.out;
  tr.codes = code.out;
  tr.variant = "z-wb";
  tr.base_size = 10;
  tr.dim_e = 8;
  tr.dim_c = 8;
  tr.train.k = 3;
  tr.train.words_per_batch = 32;
  tr.train.epochs = 1;
  tr.train.eval_every = 2;
  tr.train.z_contexts = 8;
  tr.train.seed = 5;
  tr.config_echo = "variant = z-wb";
  tr.checkpoint_out = at("a.ckpt");
  tr.metrics_out = at("a.tsv");
  cmd_train(tr);
  tr.checkpoint_out = at("b.ckpt");
  tr.metrics_out = at("b.tsv");
  cmd_train(tr);

  expect(slurp(at("a.ckpt")) == slurp(at("b.ckpt")),
         "repeated runs wrote different checkpoints");
  expect(slurp(at("a.tsv")) == slurp(at("b.tsv")),
         "repeated runs wrote different metrics");

  const Checkpoint ck = load_checkpoint(at("a.ckpt"));
  save_checkpoint(ck, at("c.ckpt"));
  expect(slurp(at("a.ckpt")) == slurp(at("c.ckpt")),
         "checkpoint round-trip changed bytes");

  EvalCmd ev;
  ev.checkpoint = at("a.ckpt");
  ev.test_corpus = bv.corpus;
  const EvalResult er = cmd_eval(ev);
  expect(std::isfinite(er.ppl) && er.ppl > 1.0,
         fmt("eval ppl %.4f not a sane perplexity", er.ppl));
  fs::remove_all(dir);
  return fmt("checkpoints, metrics and round-trip all byte-identical; "
             "reloaded model evals to ppl %.2f",
             er.ppl);
}

// ---------------------------------------------------------------------------
// 10. Softmax and perplexity identities.
// ---------------------------------------------------------------------------

CodeBook pair_codes(int V, int B) {
  CodeBook book;
  book.base_size = B;
  book.codes.resize(std::size_t(V));
  for (int id = 0; id < V; ++id) {
    book.codes[std::size_t(id)].word_id = id;
    if (id < B)
      book.codes[std::size_t(id)].entries = {{id, 1.0f}};
    else
      book.codes[std::size_t(id)].entries = {{id % (B / 2), 0.7f},
                                             {B / 2 + id % (B / 2), 0.3f}};
  }
  return book;
}

std::string run_criterion_10() {
  ModelParams p;
  p.cfg = VariantConfig::make(Variant::kCompressedWb, 16, 16, 12, 50);
  p.init(4);
  const CodeBook codes = pair_codes(50, 12);

  Rng rng(44);
  double worst_sum = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    VecF h(16);
    for (int i = 0; i < 16; ++i) h[i] = float(rng.uniform(-3.0, 3.0));
    const double sum = full_distribution(h, p, codes).sum();
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
  }
  expect(worst_sum <= 1e-6,
         fmt("softmax mass off by %.3e on random states", worst_sum));

  // Uniform model: every parameter zero, so every word scores 0.
  ModelParams p0;
  p0.cfg = VariantConfig::make(Variant::kUncompressedZ, 8, 8, 300, 300);
  p0.init(3);
  for (auto& [name, m] : p0.tensors()) m->setZero();
  EncodedCorpus rand_corpus;
  for (int s = 0; s < 40; ++s) {
    std::vector<int> sent = {1};
    const int len = 3 + int(rng.below(10));
    for (int t = 0; t < len; ++t) sent.push_back(3 + int(rng.below(297)));
    sent.push_back(2);
    rand_corpus.sentences.push_back(std::move(sent));
  }
  const CodeBook id300 = identity_codes(300);
  const double uni = perplexity(p0, id300, rand_corpus, 64);
  expect(std::abs(uni - 300.0) <= 1e-9 * 300.0,
         fmt("uniform-model ppl %.12f != V = 300", uni));

  // Base-2 and natural-log accumulations of the same probabilities.
  EncodedCorpus small;
  for (int s = 0; s < 25; ++s) {
    std::vector<int> sent = {1};
    const int len = 3 + int(rng.below(9));
    for (int t = 0; t < len; ++t) sent.push_back(3 + int(rng.below(47)));
    sent.push_back(2);
    small.sentences.push_back(std::move(sent));
  }
  double sum_log2 = 0.0, sum_ln = 0.0;
  long long n = 0;
  for (const auto& sent : small.sentences) {
    VecF h = VecF::Zero(16), c = VecF::Zero(16), h2(16), c2(16);
    for (std::size_t t = 0; t + 1 < sent.size(); ++t) {
      const VecF x = embed(sent[t], p, codes);
      lstm_step(x, h, c, p, h2, c2);
      h = h2;
      c = c2;
      const VecD probs = full_distribution(h, p, codes);
      sum_log2 += std::log2(probs[sent[t + 1]]);
      sum_ln += std::log(probs[sent[t + 1]]);
      ++n;
    }
  }
  const double ppl_bits = std::exp2(-sum_log2 / double(n));
  const double ppl_nats = std::exp(-sum_ln / double(n));
  const double rel = std::abs(ppl_bits - ppl_nats) / ppl_bits;
  expect(rel <= 1e-6,
         fmt("bits ppl %.9f vs nats ppl %.9f, rel %.3e", ppl_bits, ppl_nats,
             rel));
  return fmt("softmax mass within %.2e of 1 over 1000 states; uniform ppl "
             "%.9f = V; bits/nats ppl agree to %.2e",
             worst_sum, uni, rel);
}

}  // namespace

int main() {
  std::printf("acceptance suite: 10 criteria\n");
  Desk desk;
  criterion(1, "whole-model gradient check", run_criterion_1);
  criterion(2, "one-hot compression equivalence", run_criterion_2);
  criterion(3, "sparse coder vs grid oracle", run_criterion_3);
  criterion(4, "code sparsity at desk scale",
            [&] { return run_criterion_4(desk); });
  criterion(5, "parameter count closed forms", run_criterion_5);
  criterion(6, "memory reduction bands", run_criterion_6);
  criterion(7, "training sanity on the desk corpus",
            [&] { return run_criterion_7(desk); });
  criterion(8, "normalizer regression accuracy",
            [&] { return run_criterion_8(desk); });
  criterion(9, "determinism and persistence", run_criterion_9);
  criterion(10, "softmax and perplexity identities", run_criterion_10);
  if (g_failures == 0) {
    std::printf("acceptance: all 10 criteria passed\n");
  } else {
    std::printf("acceptance: %d of 10 criteria FAILED\n", g_failures);
  }
  return g_failures == 0 ? 0 : 1;
}
