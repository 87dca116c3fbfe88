#include "sparselm/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace sparselm {

namespace {

constexpr char kMagic[8] = {'S', 'P', 'L', 'M', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

// Explicit little-endian byte packing, independent of host endianness.
class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), std::streamsize(n));
  }
  void u32(std::uint32_t v) {
    unsigned char b[4] = {(unsigned char)(v), (unsigned char)(v >> 8),
                          (unsigned char)(v >> 16), (unsigned char)(v >> 24)};
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    u32(std::uint32_t(v));
    u32(std::uint32_t(v >> 32));
  }
  void i64(long long v) { u64(std::uint64_t(v)); }
  void f32(float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    u32(u);
  }
  void f64(double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    u64(u);
  }
  void str(const std::string& s) {
    u32(std::uint32_t(s.size()));
    bytes(s.data(), s.size());
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string path)
      : in_(in), path_(std::move(path)) {}
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), std::streamsize(n));
    if (std::size_t(in_.gcount()) != n)
      throw FormatError("checkpoint " + path_ + ": truncated file");
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 |
           std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    return lo | std::uint64_t(u32()) << 32;
  }
  long long i64() { return (long long)u64(); }
  float f32() {
    const std::uint32_t u = u32();
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }
  double f64() {
    const std::uint64_t u = u64();
    double v;
    std::memcpy(&v, &u, 8);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > (1u << 24))
      throw FormatError("checkpoint " + path_ + ": implausible string length");
    std::string s(n, '\0');
    if (n) bytes(s.data(), n);
    return s;
  }

 private:
  std::istream& in_;
  std::string path_;
};

// Tensor shapes each variant is required to carry, keyed by block name.
std::map<std::string, std::pair<long, long>> expected_shapes(
    const VariantConfig& cfg) {
  std::map<std::string, std::pair<long, long>> m;
  const long E = cfg.E, C = cfg.C, B = cfg.B, V = cfg.V;
  const long P = cfg.emb_cols();
  m["emb"] = {E, P};
  m["lstm_wx"] = {4 * C, E};
  m["lstm_wh"] = {4 * C, C};
  m["lstm_b"] = {4 * C, 1};
  m["out_w"] = {C, P};
  if (cfg.has_out_c()) m["out_c"] = {B, 1};
  if (cfg.has_out_b()) m["out_b"] = {V, 1};
  if (cfg.use_zregression) {
    m["z_w"] = {C, 1};
    m["z_b"] = {1, 1};
  }
  return m;
}

}  // namespace

std::uint64_t file_fnv1a(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open file for hashing: " + path);
  std::uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h = fnv1a64(buf, std::size_t(in.gcount()), h);
  }
  return h;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  ckpt.cfg.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint file: " + path);
  Writer w(out);
  w.bytes(kMagic, 8);
  w.u32(kVersion);
  w.str(variant_token(ckpt.cfg.variant));
  w.u32(std::uint32_t(ckpt.cfg.E));
  w.u32(std::uint32_t(ckpt.cfg.C));
  w.u32(std::uint32_t(ckpt.cfg.B));
  w.u32(std::uint32_t(ckpt.cfg.V));
  w.str(ckpt.vocab_path);
  w.u64(ckpt.vocab_hash);

  w.u32(std::uint32_t(ckpt.codes.base_size));
  w.u32(std::uint32_t(ckpt.codes.size()));
  for (const auto& code : ckpt.codes.codes) {
    w.u32(std::uint32_t(code.entries.size()));
    for (const auto& [idx, c] : code.entries) {
      w.u32(std::uint32_t(idx));
      w.f32(c);
    }
  }

  const auto tensors = ckpt.params.tensors();
  w.u32(std::uint32_t(tensors.size()));
  for (const auto& [name, m] : tensors) {
    w.str(name);
    w.u32(std::uint32_t(m->rows()));
    w.u32(std::uint32_t(m->cols()));
    for (Eigen::Index i = 0; i < m->rows(); ++i)      // row-major blocks
      for (Eigen::Index j = 0; j < m->cols(); ++j) w.f32((*m)(i, j));
  }

  w.u32(std::uint32_t(ckpt.epochs_trained));
  w.u64(ckpt.seed);
  w.u32(std::uint32_t(ckpt.metrics_tail.size()));
  for (const auto& row : ckpt.metrics_tail) {
    w.i64(row.batch_index);
    w.f64(row.train_loss);
    w.f64(row.val_ppl);
    w.f64(row.mean_true_logz);
    w.f64(row.mean_abs_dlogz);
  }
  w.str(ckpt.config_echo);
  if (!out) throw FormatError("write failed for checkpoint file: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint file: " + path);
  Reader r(in, path);

  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw FormatError("checkpoint " + path + ": bad magic");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw FormatError("checkpoint " + path + ": version " +
                      std::to_string(version) + " unsupported (expected " +
                      std::to_string(kVersion) + ")");

  Checkpoint ckpt;
  const Variant variant = parse_variant(r.str());
  const int E = int(r.u32()), C = int(r.u32());
  const int B = int(r.u32()), V = int(r.u32());
  ckpt.cfg = VariantConfig::make(variant, E, C, B, V);
  ckpt.vocab_path = r.str();
  ckpt.vocab_hash = r.u64();

  ckpt.codes.base_size = int(r.u32());
  const std::uint32_t n_codes = r.u32();
  if (int(n_codes) != V)
    throw FormatError("checkpoint " + path + ": codebook covers " +
                      std::to_string(n_codes) + " words, config V=" +
                      std::to_string(V));
  ckpt.codes.codes.resize(n_codes);
  for (std::uint32_t id = 0; id < n_codes; ++id) {
    SparseCode& code = ckpt.codes.codes[id];
    code.word_id = int(id);
    const std::uint32_t n_entries = r.u32();
    code.entries.resize(n_entries);
    int prev = -1;
    for (auto& [idx, c] : code.entries) {
      idx = int(r.u32());
      c = r.f32();
      if (idx <= prev || idx >= ckpt.codes.base_size)
        throw FormatError("checkpoint " + path + ": invalid code entry for word " +
                          std::to_string(id));
      prev = idx;
    }
    code.flagged = int(id) >= ckpt.codes.base_size && code.entries.empty();
  }

  ckpt.params.cfg = ckpt.cfg;
  auto expected = expected_shapes(ckpt.cfg);
  std::map<std::string, MatF*> members = {
      {"emb", &ckpt.params.emb},         {"lstm_wx", &ckpt.params.lstm_wx},
      {"lstm_wh", &ckpt.params.lstm_wh}, {"lstm_b", &ckpt.params.lstm_b},
      {"out_w", &ckpt.params.out_w},     {"out_c", &ckpt.params.out_c},
      {"out_b", &ckpt.params.out_b},     {"z_w", &ckpt.params.z_w},
      {"z_b", &ckpt.params.z_b}};
  const std::uint32_t n_tensors = r.u32();
  if (n_tensors != expected.size())
    throw FormatError("checkpoint " + path + ": has " +
                      std::to_string(n_tensors) + " tensors, variant needs " +
                      std::to_string(expected.size()));
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::string name = r.str();
    const auto it = expected.find(name);
    if (it == expected.end())
      throw FormatError("checkpoint " + path + ": unexpected tensor '" +
                        name + "'");
    const long rows = long(r.u32()), cols = long(r.u32());
    if (rows != it->second.first || cols != it->second.second)
      throw FormatError("checkpoint " + path + ": tensor '" + name +
                        "' has shape " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", expected " +
                        std::to_string(it->second.first) + "x" +
                        std::to_string(it->second.second));
    MatF& m = *members.at(name);
    m.resize(rows, cols);
    for (long a = 0; a < rows; ++a)
      for (long b = 0; b < cols; ++b) m(a, b) = r.f32();
    expected.erase(it);
  }

  ckpt.epochs_trained = int(r.u32());
  ckpt.seed = r.u64();
  const std::uint32_t n_rows = r.u32();
  ckpt.metrics_tail.resize(n_rows);
  for (auto& row : ckpt.metrics_tail) {
    row.batch_index = r.i64();
    row.train_loss = r.f64();
    row.val_ppl = r.f64();
    row.mean_true_logz = r.f64();
    row.mean_abs_dlogz = r.f64();
  }
  ckpt.config_echo = r.str();
  return ckpt;
}

}  // namespace sparselm
