#include "sparselm/sparse_coder.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace sparselm {

ObjectiveTerms objective_terms(const VecD& x, const MatD& U, const VecD& w) {
  if (U.cols() != x.size() || U.rows() != w.size())
    throw ShapeError("objective_terms: U " + shape_str(U) + " vs x " +
                     std::to_string(x.size()) + ", w " +
                     std::to_string(w.size()));
  ObjectiveTerms t;
  t.L = (U * x - w).squaredNorm();
  t.R1 = x.cwiseAbs().sum();
  t.R2 = std::fabs(x.sum() - 1.0);
  return t;
}

namespace {
constexpr double kHoldTol = 1e-12;
// The adaptive l1 weight L*w_alpha/R1 diverges when a trajectory drifts
// toward the origin, which strands the fit at x=0. Reseeded restarts find
// the basin of a real solution in practice; collapse is init-dependent.
constexpr int kMaxRestarts = 4;
constexpr std::uint64_t kReseed = 0x9E3779B97F4A7C15ull;

std::uint64_t restart_seed(std::uint64_t seed, int attempt) {
  return attempt == 0 ? seed : seed ^ (kReseed * std::uint64_t(attempt));
}
}

void adaptive_weights(const VecD& x, const MatD& U, const VecD& w,
                      const CoderConfig& cfg, double& alpha_t,
                      double& beta_t) {
  const ObjectiveTerms t = objective_terms(x, U, w);
  if (t.R1 > kHoldTol) alpha_t = t.L * cfg.w_alpha / t.R1;
  if (t.R2 > kHoldTol) beta_t = t.L * cfg.w_beta / t.R2;
}

VecD coder_gradient(const VecD& x, const MatD& U, const VecD& w, double alpha,
                    double beta) {
  if (U.cols() != x.size() || U.rows() != w.size())
    throw ShapeError("coder_gradient: U " + shape_str(U) + " vs x " +
                     std::to_string(x.size()) + ", w " +
                     std::to_string(w.size()));
  VecD g = 2.0 * (U.transpose() * (U * x - w));
  const double sum = x.sum();
  const double s = sum > 1.0 ? beta : (sum < 1.0 ? -beta : 0.0);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    g[i] += (x[i] > 0.0 ? alpha : (x[i] < 0.0 ? -alpha : 0.0)) + s;
  return g;
}

VecD threshold(const VecD& x, double rel, bool* flagged_empty) {
  if (x.size() == 0) throw ConfigError("threshold: empty vector");
  if (x.minCoeff() < 0.0)
    throw ConfigError("threshold: input must be nonnegative");
  if (flagged_empty) *flagged_empty = false;
  const double mx = x.maxCoeff();
  if (mx <= 0.0) {
    if (flagged_empty) *flagged_empty = true;
    return x;
  }
  const double cut = rel * mx;
  VecD out = x;
  for (Eigen::Index i = 0; i < out.size(); ++i)
    if (out[i] < cut) out[i] = 0.0;
  return out;
}

SparseCode fit_code(const VecD& w, const MatD& U, const CoderConfig& cfg,
                    std::uint64_t seed) {
  cfg.validate();
  const int B = int(U.cols());
  const int E = int(U.rows());
  if (E != w.size())
    throw ShapeError("fit_code: U " + shape_str(U) + " vs w " +
                     std::to_string(w.size()));
  if (B < 1) throw ConfigError("fit_code: empty dictionary");
  if (!w.allFinite()) throw NumericError("fit_code: non-finite target vector");

  VecD x(B), xt(B);
  bool empty = false;
  for (int attempt = 0; attempt <= kMaxRestarts; ++attempt) {
    Rng rng(restart_seed(seed, attempt));
    for (int i = 0; i < B; ++i) x[i] = rng.uniform() * (2.0 / double(B));

    AdamSlot<VecD> slot;
    double alpha = 0.0, beta = 0.0;
    VecD r(E), g(B);
    for (int step = 0; step < cfg.steps; ++step) {
      // residual via the active set: most coordinates are clipped to 0 early
      r = -w;
      for (int i = 0; i < B; ++i)
        if (x[i] != 0.0) r.noalias() += x[i] * U.col(i);
      const double L = r.squaredNorm();
      const double sum = x.sum();  // x >= 0, so this is R1
      const double R2 = std::fabs(sum - 1.0);
      if (!std::isfinite(L) || !std::isfinite(sum))
        throw NumericError("fit_code: non-finite objective at step " +
                           std::to_string(step) + " (L=" + std::to_string(L) +
                           ", R1=" + std::to_string(sum) + ")");
      if (sum > kHoldTol) alpha = L * cfg.w_alpha / sum;
      if (R2 > kHoldTol) beta = L * cfg.w_beta / R2;

      g.noalias() = 2.0 * (U.transpose() * r);
      const double s = sum > 1.0 ? beta : (sum < 1.0 ? -beta : 0.0);
      for (int i = 0; i < B; ++i) g[i] += (x[i] > 0.0 ? alpha : 0.0) + s;

      adam_step(x, g, slot, cfg.adam, "sparse_code");
      x = x.cwiseMax(0.0);
    }

    xt = threshold(x, cfg.rel_threshold, &empty);
    if (!empty) break;
  }

  SparseCode code;
  code.flagged = empty;
  for (int i = 0; i < B; ++i) {
    const float c = float(xt[i]);
    if (c > 0.0f) code.entries.emplace_back(i, c);
  }
  if (code.entries.empty() && !empty) {
    // thresholding cannot remove the max, but guard the float cast anyway
    Eigen::Index arg = 0;
    x.maxCoeff(&arg);
    if (float(x[arg]) > 0.0f) code.entries.emplace_back(int(arg), float(x[arg]));
    code.flagged = true;
  }
  return code;
}

namespace {

// Runs fit_code's update rule on a block of words at once so the two gemms
// per step dominate. Column trajectories are independent and identical to
// the per-word path up to gemm accumulation order.
void fit_block(const MatD& U, const EmbeddingTable& table,
               const int* ids, int count, const CoderConfig& cfg,
               CodeBook& book) {
  const int B = int(U.cols());
  const int E = int(U.rows());
  MatD targets(E, count), x(B, count);
  for (int c = 0; c < count; ++c) {
    targets.col(c) = table.vectors.col(ids[c]).cast<double>();
    if (!targets.col(c).allFinite())
      throw NumericError("fit_all: non-finite embedding for word id " +
                         std::to_string(ids[c]));
    Rng rng(cfg.seed ^ std::uint64_t(ids[c]));
    for (int i = 0; i < B; ++i) x(i, c) = rng.uniform() * (2.0 / double(B));
  }

  MatD m = MatD::Zero(B, count), v = MatD::Zero(B, count);
  VecD alpha = VecD::Zero(count), beta = VecD::Zero(count);
  MatD r(E, count), g(B, count);
  for (int step = 0; step < cfg.steps; ++step) {
    r.noalias() = U * x;
    r -= targets;
    g.noalias() = U.transpose() * r;
    g *= 2.0;
    for (int c = 0; c < count; ++c) {
      const double L = r.col(c).squaredNorm();
      const double sum = x.col(c).sum();  // x >= 0, so this is R1
      if (!std::isfinite(L) || !std::isfinite(sum))
        throw NumericError("fit_all: non-finite objective for word id " +
                           std::to_string(ids[c]) + " at step " +
                           std::to_string(step));
      if (sum > kHoldTol) alpha[c] = L * cfg.w_alpha / sum;
      const double R2 = std::fabs(sum - 1.0);
      if (R2 > kHoldTol) beta[c] = L * cfg.w_beta / R2;
      const double s = sum > 1.0 ? beta[c] : (sum < 1.0 ? -beta[c] : 0.0);
      for (int i = 0; i < B; ++i)
        g(i, c) += (x(i, c) > 0.0 ? alpha[c] : 0.0) + s;
    }
    // same update as adam_step, one shared step counter
    const double b1 = cfg.adam.beta1, b2 = cfg.adam.beta2;
    m = b1 * m + (1.0 - b1) * g;
    v = (b2 * v.array() + (1.0 - b2) * g.array().square()).matrix();
    const double c1 = 1.0 - std::pow(b1, double(step + 1));
    const double c2 = 1.0 - std::pow(b2, double(step + 1));
    x.array() -= (cfg.adam.lr / c1) * m.array() /
                 ((v.array() * (1.0 / c2)).sqrt() + cfg.adam.eps);
    x = x.cwiseMax(0.0);
  }

  for (int c = 0; c < count; ++c) {
    bool empty = false;
    const VecD xt = threshold(x.col(c), cfg.rel_threshold, &empty);
    if (empty) {
      // collapsed to zero; rerun this word through fit_code's restart ladder
      SparseCode code = fit_code(targets.col(c), U, cfg,
                                 cfg.seed ^ std::uint64_t(ids[c]));
      code.word_id = ids[c];
      book.codes[std::size_t(ids[c])] = std::move(code);
      continue;
    }
    SparseCode code;
    code.word_id = ids[c];
    for (int i = 0; i < B; ++i) {
      const float co = float(xt[i]);
      if (co > 0.0f) code.entries.emplace_back(i, co);
    }
    if (code.entries.empty()) {
      Eigen::Index arg = 0;
      x.col(c).maxCoeff(&arg);
      if (float(x(arg, c)) > 0.0f)
        code.entries.emplace_back(int(arg), float(x(arg, c)));
      code.flagged = true;
    }
    book.codes[std::size_t(ids[c])] = std::move(code);
  }
}

constexpr int kFitBlock = 256;

}  // namespace

CodeBook fit_all(const EmbeddingTable& table, const Vocabulary& vocab,
                 const CoderConfig& cfg) {
  cfg.validate();
  if (table.size() != vocab.size())
    throw ShapeError("fit_all: table has " + std::to_string(table.size()) +
                     " vectors, vocabulary " + std::to_string(vocab.size()));
  const int B = vocab.base_size;
  const int V = vocab.size();
  if (B < 1 || B > V)
    throw ConfigError("fit_all: base size " + std::to_string(B) +
                      " invalid for V=" + std::to_string(V));

  CodeBook book;
  book.base_size = B;
  book.codes.resize(std::size_t(V));
  for (int j = 0; j < B; ++j) {
    book.codes[std::size_t(j)].word_id = j;
    book.codes[std::size_t(j)].entries = {{j, 1.0f}};
  }

  std::vector<int> rare_ids;
  rare_ids.reserve(std::size_t(V - B));
  for (int id = B; id < V; ++id) rare_ids.push_back(id);
  const int n_blocks = int((rare_ids.size() + kFitBlock - 1) / kFitBlock);

  const MatD U = base_matrix(table, vocab).cast<double>();
  std::atomic<int> next{0};
  std::atomic<int> done{0};
  std::atomic<bool> failed{false};
  std::mutex err_mu;
  std::string first_err;

  auto worker = [&]() {
    for (;;) {
      if (failed.load(std::memory_order_relaxed)) return;
      const int blk = next.fetch_add(1);
      if (blk >= n_blocks) return;
      const int lo = blk * kFitBlock;
      const int hi = std::min(lo + kFitBlock, int(rare_ids.size()));
      try {
        fit_block(U, table, rare_ids.data() + lo, hi - lo, cfg, book);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!failed.exchange(true)) first_err = std::string(e.what());
        return;
      }
      const int d = done.fetch_add(hi - lo) + (hi - lo);
      if (cfg.verbose)
        std::fprintf(stderr, "fit_all: coded %d/%d rare words\n", d, V - B);
    }
  };

  if (cfg.threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(cfg.threads));
    for (int t = 0; t < cfg.threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failed.load()) throw NumericError(first_err);
  return book;
}

VecD reconstruct(const MatD& U, const SparseCode& code) {
  VecD out = VecD::Zero(U.rows());
  for (const auto& [idx, c] : code.entries) out += double(c) * U.col(idx);
  return out;
}

void save_codes(const CodeBook& book, const Vocabulary& vocab,
                const std::string& path) {
  if (book.size() != vocab.size())
    throw ShapeError("save_codes: book has " + std::to_string(book.size()) +
                     " codes, vocabulary " + std::to_string(vocab.size()));
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write codes file: " + path);
  char buf[64];
  for (int id = 0; id < book.size(); ++id) {
    out << vocab.word(id);
    for (const auto& [idx, c] : book.at(id).entries) {
      std::snprintf(buf, sizeof buf, " %d:%.9g", idx, double(c));
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw FormatError("write failed for codes file: " + path);
}

CodeBook load_codes(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open codes file: " + path);
  const int B = vocab.base_size;
  const int V = vocab.size();
  CodeBook book;
  book.base_size = B;
  book.codes.resize(std::size_t(V));
  std::vector<char> seen(std::size_t(V), 0);

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (!vocab.contains(word))
      throw FormatError("codes file " + path + " line " +
                        std::to_string(lineno) + ": word '" + word +
                        "' is not in the vocabulary");
    const int id = vocab.id(word);
    if (seen[std::size_t(id)])
      throw FormatError("codes file " + path + ": duplicate word '" + word +
                        "'");
    seen[std::size_t(id)] = 1;

    SparseCode code;
    code.word_id = id;
    std::string entry;
    int prev = -1;
    while (ss >> entry) {
      const auto colon = entry.find(':');
      if (colon == std::string::npos || colon == 0)
        throw FormatError("codes file " + path + " line " +
                          std::to_string(lineno) +
                          ": expected idx:coeff, got '" + entry + "'");
      int idx = 0;
      float coeff = 0.0f;
      try {
        idx = std::stoi(entry.substr(0, colon));
        coeff = std::stof(entry.substr(colon + 1));
      } catch (const std::exception&) {
        throw FormatError("codes file " + path + " line " +
                          std::to_string(lineno) + ": bad entry '" + entry +
                          "'");
      }
      if (idx < 0 || idx >= B)
        throw FormatError("codes file " + path + ": word '" + word +
                          "' has base index " + std::to_string(idx) +
                          " outside [0, " + std::to_string(B) + ")");
      if (idx <= prev)
        throw FormatError("codes file " + path + ": word '" + word +
                          "' has non-ascending base indices");
      if (!(coeff > 0.0f))
        throw FormatError("codes file " + path + ": word '" + word +
                          "' has non-positive coefficient");
      prev = idx;
      code.entries.emplace_back(idx, coeff);
    }
    if (id < B &&
        !(code.entries.size() == 1 && code.entries[0].first == id &&
          code.entries[0].second == 1.0f))
      throw FormatError("codes file " + path + ": base word '" + word +
                        "' must have exactly the one-hot entry " +
                        std::to_string(id) + ":1");
    code.flagged = id >= B && code.entries.empty();
    book.codes[std::size_t(id)] = std::move(code);
  }
  for (int id = 0; id < V; ++id)
    if (!seen[std::size_t(id)])
      throw FormatError("codes file " + path + ": vocabulary word '" +
                        vocab.word(id) + "' is missing");
  return book;
}

}  // namespace sparselm
