#include "sparselm/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace sparselm {

namespace {
const char* kUnk = "<unk>";
const char* kBos = "<bos>";
const char* kEos = "<eos>";
}  // namespace

Vocabulary build_vocabulary(const TokenSentences& sentences, int base_size,
                            int max_vocab, int min_count) {
  if (base_size < Vocabulary::kNumSentinels)
    throw ConfigError("build_vocabulary: base size " +
                      std::to_string(base_size) + " cannot hold the " +
                      std::to_string(Vocabulary::kNumSentinels) +
                      " sentinel words");
  if (base_size > max_vocab)
    throw ConfigError("build_vocabulary: base size " +
                      std::to_string(base_size) + " exceeds max vocab " +
                      std::to_string(max_vocab));

  std::unordered_map<std::string, long long> counts;
  long long total_tokens = 0;
  long long nonempty_sentences = 0;
  for (const auto& sent : sentences) {
    if (!sent.empty()) ++nonempty_sentences;
    for (const auto& tok : sent) {
      ++counts[tok];
      ++total_tokens;
    }
  }
  if (total_tokens == 0)
    throw ConfigError("build_vocabulary: corpus is empty");

  std::vector<std::pair<std::string, long long>> order(counts.begin(),
                                                       counts.end());
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary vocab;
  vocab.base_size = base_size;
  vocab.words = {kUnk, kBos, kEos};
  vocab.freq = {0, nonempty_sentences, nonempty_sentences};

  const std::size_t cap = std::size_t(max_vocab);
  long long unked = 0;
  for (const auto& [w, c] : order) {
    if (c >= min_count && vocab.words.size() < cap) {
      vocab.words.push_back(w);
      vocab.freq.push_back(c);
    } else {
      unked += c;  // dropped tokens will surface as <unk> at encode time
    }
  }
  vocab.freq[Vocabulary::kUnkId] = unked;

  if (base_size > vocab.size())
    throw ConfigError("build_vocabulary: base size " +
                      std::to_string(base_size) +
                      " exceeds vocabulary size " +
                      std::to_string(vocab.size()) + " after filtering");

  vocab.id_of.reserve(vocab.words.size());
  for (int i = 0; i < vocab.size(); ++i) {
    if (!vocab.id_of.emplace(vocab.words[std::size_t(i)], i).second)
      throw ConfigError("build_vocabulary: reserved word '" +
                        vocab.words[std::size_t(i)] +
                        "' appears in the corpus");
  }
  return vocab;
}

EncodedCorpus encode(const TokenSentences& sentences, const Vocabulary& vocab,
                     std::uint64_t seed) {
  EncodedCorpus out;
  out.sentences.reserve(sentences.size());
  for (const auto& sent : sentences) {
    if (sent.empty()) {
      ++out.skipped_empty;
      continue;
    }
    std::vector<int> ids;
    ids.reserve(sent.size() + 2);
    ids.push_back(out.bos_id);
    for (const auto& tok : sent) ids.push_back(vocab.id(tok));
    ids.push_back(out.eos_id);
    out.sentences.push_back(std::move(ids));
  }
  Rng rng(seed_for(seed, "corpus_shuffle"));
  rng.shuffle(out.sentences);
  return out;
}

BatchStream::BatchStream(const EncodedCorpus& corpus, int words_per_batch)
    : corpus_(corpus), budget_(words_per_batch) {
  for (const auto& s : corpus.sentences) {
    const long long targets = (long long)s.size() - 1;
    if (targets > budget_)
      throw ConfigError("batches: sentence with " + std::to_string(targets) +
                        " targets exceeds words-per-batch " +
                        std::to_string(budget_));
  }
}

bool BatchStream::next(Batch& out) {
  const auto& sents = corpus_.sentences;
  if (pos_ >= sents.size()) return false;

  std::size_t first = pos_;
  long long used = 0;
  std::size_t max_len = 0;
  while (pos_ < sents.size()) {
    const long long targets = (long long)sents[pos_].size() - 1;
    if (used + targets > budget_) break;
    used += targets;
    max_len = std::max(max_len, sents[pos_].size() - 1);
    ++pos_;
  }

  out.S = int(pos_ - first);
  out.T = int(max_len);
  const std::size_t cells = std::size_t(out.S) * std::size_t(out.T);
  out.input_ids.assign(cells, 0);
  out.target_ids.assign(cells, 0);
  out.mask.assign(cells, 0);
  for (std::size_t s = first; s < pos_; ++s) {
    const auto& ids = sents[s];
    const std::size_t row = (s - first) * max_len;
    for (std::size_t t = 0; t + 1 < ids.size(); ++t) {
      out.input_ids[row + t] = ids[t];
      out.target_ids[row + t] = ids[t + 1];
      out.mask[row + t] = 1;
    }
  }
  return true;
}

std::vector<Batch> make_batches(const EncodedCorpus& corpus,
                                int words_per_batch) {
  BatchStream stream(corpus, words_per_batch);
  std::vector<Batch> out;
  Batch b;
  while (stream.next(b)) out.push_back(b);
  return out;
}

TokenSentences load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open corpus file: " + path);
  TokenSentences out;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> toks;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) toks.push_back(tok);
    out.push_back(std::move(toks));
  }
  return out;
}

void save_vocabulary(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write vocabulary file: " + path);
  for (int i = 0; i < vocab.size(); ++i)
    out << vocab.words[std::size_t(i)] << '\t' << vocab.freq[std::size_t(i)]
        << '\n';
  if (!out) throw FormatError("write failed for vocabulary file: " + path);
}

Vocabulary load_vocabulary(const std::string& path, int base_size) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open vocabulary file: " + path);
  Vocabulary vocab;
  vocab.base_size = base_size;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw FormatError("vocabulary file " + path + " line " +
                        std::to_string(lineno) + ": expected word<TAB>count");
    const std::string word = line.substr(0, tab);
    long long count = 0;
    try {
      count = std::stoll(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw FormatError("vocabulary file " + path + " line " +
                        std::to_string(lineno) + ": bad count field");
    }
    const int id = vocab.size();
    vocab.words.push_back(word);
    vocab.freq.push_back(count);
    if (!vocab.id_of.emplace(word, id).second)
      throw FormatError("vocabulary file " + path + ": duplicate word '" +
                        word + "'");
  }
  if (vocab.size() < Vocabulary::kNumSentinels ||
      vocab.words[0] != kUnk || vocab.words[1] != kBos ||
      vocab.words[2] != kEos)
    throw FormatError("vocabulary file " + path +
                      ": ids 0..2 must be <unk>, <bos>, <eos>");
  if (base_size < Vocabulary::kNumSentinels || base_size > vocab.size())
    throw ConfigError("load_vocabulary: base size " +
                      std::to_string(base_size) +
                      " invalid for vocabulary of size " +
                      std::to_string(vocab.size()));
  return vocab;
}

}  // namespace sparselm
