#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "sparselm/common.hpp"

namespace sparselm {

// Frequency-split vocabulary. ids 0..B-1 are the base set, B..V-1 the rare
// set. Sentinels live at fixed ids inside the base set so they always carry
// dense parameters. Frequency is non-increasing over ids >= 3; sentinel
// counts are bookkeeping (unk: tokens mapped to it, bos/eos: sentences).
struct Vocabulary {
  static constexpr int kUnkId = 0;
  static constexpr int kBosId = 1;
  static constexpr int kEosId = 2;
  static constexpr int kNumSentinels = 3;

  std::vector<std::string> words;                 // id -> surface form
  std::unordered_map<std::string, int> id_of;
  std::vector<long long> freq;                    // id -> corpus count
  int base_size = 0;                              // B

  int size() const { return int(words.size()); }  // V

  int id(const std::string& w) const {
    auto it = id_of.find(w);
    return it == id_of.end() ? kUnkId : it->second;
  }
  bool contains(const std::string& w) const { return id_of.count(w) != 0; }
  const std::string& word(int id) const { return words.at(std::size_t(id)); }
};

using TokenSentences = std::vector<std::vector<std::string>>;

// Counts words, keeps those with freq >= min_count, caps total size (with
// sentinels) at max_vocab. Order: count descending, lexicographic tie-break.
Vocabulary build_vocabulary(const TokenSentences& sentences, int base_size,
                            int max_vocab, int min_count);

struct EncodedCorpus {
  std::vector<std::vector<int>> sentences;  // each begins bos, ends eos
  int bos_id = Vocabulary::kBosId;
  int eos_id = Vocabulary::kEosId;
  int unk_id = Vocabulary::kUnkId;
  long long skipped_empty = 0;              // empty input lines dropped

  long long total_targets() const {
    long long n = 0;
    for (const auto& s : sentences) n += (long long)s.size() - 1;
    return n;
  }
};

// OOV -> unk, bos/eos attached, sentence order shuffled once by seed.
EncodedCorpus encode(const TokenSentences& sentences, const Vocabulary& vocab,
                     std::uint64_t seed);

// S sentences padded to T steps, row-major grids. target_ids[s*T+t] is the
// token following input_ids[s*T+t]; mask 0 marks padding excluded from loss.
struct Batch {
  int S = 0, T = 0;
  std::vector<int> input_ids;
  std::vector<int> target_ids;
  std::vector<unsigned char> mask;

  long long mask_count() const {
    long long n = 0;
    for (unsigned char m : mask) n += m;
    return n;
  }
};

// Greedy whole-sentence packing: sentences are appended until the masked
// target count would exceed words_per_batch. No sentence spans two batches.
class BatchStream {
 public:
  BatchStream(const EncodedCorpus& corpus, int words_per_batch);
  bool next(Batch& out);
  void reset() { pos_ = 0; }

 private:
  const EncodedCorpus& corpus_;
  int budget_;
  std::size_t pos_ = 0;
};

std::vector<Batch> make_batches(const EncodedCorpus& corpus,
                                int words_per_batch);

// Corpus file: UTF-8, one sentence per line, space-separated tokens.
// Empty lines are preserved (encode skips and counts them).
TokenSentences load_corpus(const std::string& path);

// Vocabulary file: "word<TAB>count" per line, line number = id. The base
// split is not part of the format and must be supplied on load.
void save_vocabulary(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocabulary(const std::string& path, int base_size);

}  // namespace sparselm
