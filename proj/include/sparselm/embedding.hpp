#pragma once

#include <string>
#include <vector>

#include "sparselm/corpus.hpp"
#include "sparselm/numeric.hpp"

namespace sparselm {

// Pretrained word vectors, one column per vocabulary id.
struct EmbeddingTable {
  int dim = 0;      // E
  MatF vectors;     // E x V

  int size() const { return int(vectors.cols()); }
  VecF vector_of(int id) const { return vectors.col(id); }
};

struct SgnsConfig {
  int dim = 200;
  int window = 5;
  int negatives = 5;
  int epochs = 5;
  double lr = 0.025;
  std::uint64_t seed = 1;
};

// Skip-gram with negative sampling, the word2vec reference recipe: uniform
// window shrink, unigram^0.75 negatives, plain SGD with linear lr decay.
// Single-threaded and deterministic. With epoch_data_loss non-null, appends
// the full-data negative-sampling loss after each epoch (fixed eval draws).
EmbeddingTable train_sgns(const EncodedCorpus& corpus, int vocab_size,
                          const SgnsConfig& cfg,
                          std::vector<double>* epoch_data_loss = nullptr);

// Text format: header "V E", then one "word v1 ... vE" line per word,
// 9 significant digits. Load resolves words against the vocabulary and
// requires every vocabulary word to be present exactly once.
void save_embeddings(const EmbeddingTable& table, const Vocabulary& vocab,
                     const std::string& path);
EmbeddingTable load_embeddings(const std::string& path,
                               const Vocabulary& vocab);

// Columns 0..B-1 of the table: the dictionary U of common-word embeddings.
MatF base_matrix(const EmbeddingTable& table, const Vocabulary& vocab);

}  // namespace sparselm
