#pragma once

#include <string>

#include "sparselm/corpus.hpp"
#include "sparselm/model.hpp"

namespace sparselm {

struct PerplexityStats {
  long long targets = 0;
  long long unk_targets = 0;
  double mean_log2p = 0.0;
};

// PPL = 2^{-(1/N) sum log2 p(w|h)} with probabilities from the explicitly
// normalized softmax; N counts masked target positions only.
double perplexity(const ModelParams& params, const CodeBook& codes,
                  const EncodedCorpus& corpus, int words_per_batch = 256,
                  PerplexityStats* stats = nullptr);

struct SubnetCounts {
  long long embedding = 0;
  long long encoding = 0;
  long long prediction = 0;
  long long zregression = 0;
  long long total() const {
    return embedding + encoding + prediction + zregression;
  }
};

// Closed-form trainable parameter counts per subnet:
//   embedding VE (BE compressed), encoding 4(CE+C^2+C),
//   prediction V(C+1) (B(C+1) compressed, +V for independent biases),
//   zregression C+1.
SubnetCounts count_parameters(const VariantConfig& cfg);

struct MemoryReport {
  SubnetCounts counts;
  long long trainable_params = 0;
  long long code_nonzeros = 0;     // over all words, base one-hots included
  long long code_bytes = 0;        // 8 bytes per nonzero (index + value)
  long long compressed_bytes = 0;  // params * 4 + code_bytes
  long long reference_params = 0;  // uncompressed-z at the same E, C, V
  long long reference_bytes = 0;
  double reduction = 0.0;          // 1 - compressed/reference
};

MemoryReport memory_report(const VariantConfig& cfg, const CodeBook& codes);

// "key<TAB>value" lines in fixed field order.
std::string format_memory_report(const MemoryReport& r);

}  // namespace sparselm
