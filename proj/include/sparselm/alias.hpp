#pragma once

#include <vector>

#include "sparselm/common.hpp"

namespace sparselm {

// Vose alias table: O(n) build, O(1) draws. Zero weights are legal and are
// never sampled; the total weight must be positive.
class AliasTable {
 public:
  explicit AliasTable(const std::vector<double>& weights) {
    const std::size_t n = weights.size();
    if (n == 0) throw ConfigError("AliasTable: empty weight vector");
    double sum = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw ConfigError("AliasTable: negative weight");
      sum += w;
    }
    if (sum <= 0.0) throw ConfigError("AliasTable: total weight is zero");

    norm_.resize(n);
    for (std::size_t i = 0; i < n; ++i) norm_[i] = weights[i] / sum;

    prob_.assign(n, 0.0);
    alias_.assign(n, 0);
    std::vector<double> scaled(n);
    std::vector<int> small, large;
    small.reserve(n);
    large.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = norm_[i] * double(n);
      (scaled[i] < 1.0 ? small : large).push_back(int(i));
    }
    while (!small.empty() && !large.empty()) {
      const int s = small.back(); small.pop_back();
      const int l = large.back(); large.pop_back();
      prob_[std::size_t(s)] = scaled[std::size_t(s)];
      alias_[std::size_t(s)] = l;
      scaled[std::size_t(l)] -= 1.0 - scaled[std::size_t(s)];
      (scaled[std::size_t(l)] < 1.0 ? small : large).push_back(l);
    }
    // leftovers are 1 up to rounding
    for (int i : large) prob_[std::size_t(i)] = 1.0;
    for (int i : small) prob_[std::size_t(i)] = 1.0;
  }

  int sample(Rng& rng) const {
    const std::size_t i = std::size_t(rng.below(prob_.size()));
    return rng.uniform() < prob_[i] ? int(i) : alias_[i];
  }

  const std::vector<double>& probs() const { return norm_; }
  std::size_t size() const { return prob_.size(); }

 private:
  std::vector<double> prob_;
  std::vector<int> alias_;
  std::vector<double> norm_;
};

}  // namespace sparselm
