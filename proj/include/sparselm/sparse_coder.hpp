#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sparselm/embedding.hpp"
#include "sparselm/numeric.hpp"

namespace sparselm {

struct CoderConfig {
  double w_alpha = 1.0;       // l1 penalty / fitting loss ratio
  double w_beta = 0.1;        // sum-to-one penalty / fitting loss ratio
  int steps = 2000;
  AdamConfig adam{0.01, 0.9, 0.999, 1e-8};
  double rel_threshold = 0.015;
  std::uint64_t seed = 1;
  int threads = 1;
  bool verbose = false;

  void validate() const {
    if (w_alpha <= 0.0 || w_beta <= 0.0)
      throw ConfigError("coder: w_alpha and w_beta must be > 0");
    if (rel_threshold < 0.0 || rel_threshold >= 1.0)
      throw ConfigError("coder: rel_threshold must be in [0, 1)");
    if (steps < 0) throw ConfigError("coder: steps must be >= 0");
    if (threads < 1) throw ConfigError("coder: threads must be >= 1");
  }
};

// Nonnegative sparse coefficients over the base dictionary. Base words carry
// the exact one-hot code [(id, 1)]. `flagged` marks codes that went empty
// after thresholding and were replaced by their largest coefficient.
struct SparseCode {
  int word_id = -1;
  std::vector<std::pair<int, float>> entries;  // ascending base index
  bool flagged = false;

  int nonzeros() const { return int(entries.size()); }
};

struct CodeBook {
  int base_size = 0;
  std::vector<SparseCode> codes;  // index = word id

  int size() const { return int(codes.size()); }
  const SparseCode& at(int id) const { return codes.at(std::size_t(id)); }

  long long total_nonzeros() const {
    long long n = 0;
    for (const auto& c : codes) n += c.nonzeros();
    return n;
  }
  double mean_rare_nonzeros() const {
    const int rare = size() - base_size;
    if (rare <= 0) return 0.0;
    long long n = 0;
    for (int i = base_size; i < size(); ++i) n += codes[std::size_t(i)].nonzeros();
    return double(n) / double(rare);
  }
  int flagged_count() const {
    int n = 0;
    for (const auto& c : codes) n += c.flagged ? 1 : 0;
    return n;
  }
};

struct ObjectiveTerms {
  double L = 0.0;   // ||Ux - w||^2
  double R1 = 0.0;  // ||x||_1
  double R2 = 0.0;  // |1'x - 1|
};

ObjectiveTerms objective_terms(const VecD& x, const MatD& U, const VecD& w);

// alpha_t = L*w_alpha/R1, beta_t = L*w_beta/R2. When R1 or R2 is below
// machine tolerance the previous value is held (in/out parameters).
void adaptive_weights(const VecD& x, const MatD& U, const VecD& w,
                      const CoderConfig& cfg, double& alpha_t, double& beta_t);

// Gradient of L + alpha*R1 + beta*R2 at fixed weights; l1 subgradient 0 at
// x_i = 0, sum-to-one subgradient 0 at 1'x = 1. For gradient checking.
VecD coder_gradient(const VecD& x, const MatD& U, const VecD& w, double alpha,
                    double beta);

// Zeroes entries strictly below rel * max(x); all-zero input is returned
// unchanged with *flagged_empty set.
VecD threshold(const VecD& x, double rel, bool* flagged_empty = nullptr);

// Adam on L + alpha_t*R1 + beta_t*R2 with weights refreshed each step and x
// clipped to >= 0, then thresholded. A run that collapses to the all-zero
// code is retried with reseeded inits; a code still empty after the ladder
// comes back flagged.
SparseCode fit_code(const VecD& w, const MatD& U, const CoderConfig& cfg,
                    std::uint64_t seed);

// One-hot codes for base ids, fit_code for rare ids with per-word seed
// cfg.seed ^ word_id, so any thread fan-out gives bit-identical results.
CodeBook fit_all(const EmbeddingTable& table, const Vocabulary& vocab,
                 const CoderConfig& cfg);

// Embedding reconstruction Ux for one code.
VecD reconstruct(const MatD& U, const SparseCode& code);

// Codes file: one "word idx:coeff idx:coeff ..." line per word in id order,
// indices ascending, 9 significant digits; base words appear as "word j:1".
void save_codes(const CodeBook& book, const Vocabulary& vocab,
                const std::string& path);
CodeBook load_codes(const std::string& path, const Vocabulary& vocab);

}  // namespace sparselm
