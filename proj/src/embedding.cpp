#include "sparselm/embedding.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sparselm/alias.hpp"

namespace sparselm {

namespace {

AliasTable unigram_sampler(const EncodedCorpus& corpus, int vocab_size,
                           double distortion) {
  std::vector<double> w(std::size_t(vocab_size), 0.0);
  for (const auto& sen : corpus.sentences)
    for (int id : sen) w[std::size_t(id)] += 1.0;
  for (auto& x : w)
    if (x > 0.0) x = std::pow(x, distortion);
  return AliasTable(w);
}

// Negative-sampling objective over the whole corpus with draws from a fixed
// eval stream, so successive epochs are measured on identical pairs.
double data_loss(const MatF& syn0, const MatF& syn1,
                 const EncodedCorpus& corpus, const SgnsConfig& cfg,
                 const AliasTable& noise) {
  Rng rng(seed_for(cfg.seed, "sgns_eval"));
  double total = 0.0;
  long long pairs = 0;
  for (const auto& sen : corpus.sentences) {
    const int n = int(sen.size());
    for (int pos = 0; pos < n; ++pos) {
      const int center = sen[std::size_t(pos)];
      const int b = int(rng.below(std::uint64_t(cfg.window)));
      for (int a = b; a < 2 * cfg.window + 1 - b; ++a) {
        if (a == cfg.window) continue;
        const int cpos = pos - cfg.window + a;
        if (cpos < 0 || cpos >= n) continue;
        const int context = sen[std::size_t(cpos)];
        const double f =
            double(syn0.col(context).dot(syn1.col(center)));
        total += softplus(-f);
        for (int d = 0; d < cfg.negatives; ++d) {
          const int target = noise.sample(rng);
          if (target == center) continue;
          const double fn =
              double(syn0.col(context).dot(syn1.col(target)));
          total += softplus(fn);
        }
        ++pairs;
      }
    }
  }
  return pairs == 0 ? 0.0 : total / double(pairs);
}

}  // namespace

EmbeddingTable train_sgns(const EncodedCorpus& corpus, int vocab_size,
                          const SgnsConfig& cfg,
                          std::vector<double>* epoch_data_loss) {
  if (cfg.dim < 1)
    throw ConfigError("train_sgns: dim must be >= 1");
  if (cfg.window < 1)
    throw ConfigError("train_sgns: window must be >= 1");
  if (cfg.negatives < 0 || cfg.epochs < 0)
    throw ConfigError("train_sgns: negatives and epochs must be >= 0");

  long long total_tokens = 0;
  for (const auto& sen : corpus.sentences)
    total_tokens += (long long)sen.size();
  if (total_tokens == 0)
    throw ConfigError("train_sgns: corpus is empty");
  if (total_tokens < cfg.window)
    throw ConfigError("train_sgns: corpus (" + std::to_string(total_tokens) +
                      " tokens) is shorter than the window " +
                      std::to_string(cfg.window));

  const int E = cfg.dim;
  const int V = vocab_size;
  MatF syn0(E, V);
  Rng init_rng(seed_for(cfg.seed, "sgns_syn0"));
  for (int j = 0; j < V; ++j)
    for (int i = 0; i < E; ++i)
      syn0(i, j) = float((init_rng.uniform() - 0.5) / double(E));
  MatF syn1 = MatF::Zero(E, V);

  if (cfg.epochs > 0) {
    const AliasTable noise = unigram_sampler(corpus, V, 0.75);
    Rng rng(seed_for(cfg.seed, "sgns_train"));
    const double lr0 = cfg.lr;
    const double lr_min = cfg.lr * 1e-4;
    const long long planned = total_tokens * cfg.epochs;
    long long processed = 0;
    VecF neu1e(E);
    for (int ep = 0; ep < cfg.epochs; ++ep) {
      for (const auto& sen : corpus.sentences) {
        const int n = int(sen.size());
        for (int pos = 0; pos < n; ++pos) {
          const double alpha = std::max(
              lr_min, lr0 * (1.0 - double(processed) / double(planned + 1)));
          ++processed;
          const int center = sen[std::size_t(pos)];
          const int b = int(rng.below(std::uint64_t(cfg.window)));
          for (int a = b; a < 2 * cfg.window + 1 - b; ++a) {
            if (a == cfg.window) continue;
            const int cpos = pos - cfg.window + a;
            if (cpos < 0 || cpos >= n) continue;
            const int context = sen[std::size_t(cpos)];
            neu1e.setZero();
            for (int d = 0; d <= cfg.negatives; ++d) {
              int target;
              float label;
              if (d == 0) {
                target = center;
                label = 1.0f;
              } else {
                target = noise.sample(rng);
                if (target == center) continue;
                label = 0.0f;
              }
              const float f = syn0.col(context).dot(syn1.col(target));
              const float g = float((double(label) - sigmoid(double(f))) *
                                    alpha);
              neu1e += g * syn1.col(target);
              syn1.col(target) += g * syn0.col(context);
            }
            syn0.col(context) += neu1e;
          }
        }
      }
      if (epoch_data_loss)
        epoch_data_loss->push_back(data_loss(syn0, syn1, corpus, cfg, noise));
    }
  }

  EmbeddingTable out;
  out.dim = E;
  out.vectors = std::move(syn0);
  return out;
}

void save_embeddings(const EmbeddingTable& table, const Vocabulary& vocab,
                     const std::string& path) {
  if (table.size() != vocab.size())
    throw ShapeError("save_embeddings: table has " +
                     std::to_string(table.size()) + " vectors, vocabulary " +
                     std::to_string(vocab.size()) + " words");
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write embeddings file: " + path);
  out << table.size() << ' ' << table.dim << '\n';
  char buf[64];
  for (int i = 0; i < table.size(); ++i) {
    out << vocab.word(i);
    for (int r = 0; r < table.dim; ++r) {
      std::snprintf(buf, sizeof buf, " %.9g", double(table.vectors(r, i)));
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw FormatError("write failed for embeddings file: " + path);
}

EmbeddingTable load_embeddings(const std::string& path,
                               const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open embeddings file: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw FormatError("embeddings file " + path + ": missing header");
  int file_v = 0, dim = 0;
  {
    std::istringstream ss(line);
    if (!(ss >> file_v >> dim) || file_v < 1 || dim < 1)
      throw FormatError("embeddings file " + path +
                        ": header must be 'V E' with positive integers");
  }
  if (file_v != vocab.size())
    throw FormatError("embeddings file " + path + ": header says " +
                      std::to_string(file_v) + " words, vocabulary has " +
                      std::to_string(vocab.size()));

  EmbeddingTable table;
  table.dim = dim;
  table.vectors = MatF::Zero(dim, vocab.size());
  std::vector<char> seen(std::size_t(vocab.size()), 0);
  for (int row = 0; row < file_v; ++row) {
    if (!std::getline(in, line))
      throw FormatError("embeddings file " + path + ": expected " +
                        std::to_string(file_v) + " word lines, got " +
                        std::to_string(row));
    std::istringstream ss(line);
    std::string word;
    if (!(ss >> word))
      throw FormatError("embeddings file " + path + " line " +
                        std::to_string(row + 2) + ": missing word");
    if (!vocab.contains(word))
      throw FormatError("embeddings file " + path + ": word '" + word +
                        "' is not in the vocabulary");
    const int id = vocab.id(word);
    if (seen[std::size_t(id)])
      throw FormatError("embeddings file " + path + ": duplicate word '" +
                        word + "'");
    seen[std::size_t(id)] = 1;
    for (int r = 0; r < dim; ++r) {
      double v;
      if (!(ss >> v))
        throw FormatError("embeddings file " + path + ": word '" + word +
                          "' has fewer than " + std::to_string(dim) +
                          " values");
      table.vectors(r, id) = float(v);
    }
    double extra;
    if (ss >> extra)
      throw FormatError("embeddings file " + path + ": word '" + word +
                        "' has more than " + std::to_string(dim) + " values");
  }
  for (int i = 0; i < vocab.size(); ++i)
    if (!seen[std::size_t(i)])
      throw FormatError("embeddings file " + path + ": vocabulary word '" +
                        vocab.word(i) + "' is missing");
  return table;
}

MatF base_matrix(const EmbeddingTable& table, const Vocabulary& vocab) {
  if (vocab.base_size > table.size())
    throw ShapeError("base_matrix: base size " +
                     std::to_string(vocab.base_size) + " exceeds table size " +
                     std::to_string(table.size()));
  return table.vectors.leftCols(vocab.base_size);
}

}  // namespace sparselm
