#pragma once

#include <string>
#include <vector>

#include "sparselm/model.hpp"
#include "sparselm/trainer.hpp"

namespace sparselm {

// On-disk model bundle: config, vocabulary reference (path + FNV-1a hash of
// the file bytes), codebook, all tensors as named little-endian f32 blocks,
// and training metadata. save -> load -> save is byte-identical.
struct Checkpoint {
  VariantConfig cfg;
  std::string vocab_path;
  std::uint64_t vocab_hash = 0;
  CodeBook codes;
  ModelParams params;
  int epochs_trained = 0;
  std::uint64_t seed = 0;
  std::vector<MetricsRow> metrics_tail;
  std::string config_echo;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

// Verifies magic, version, tensor names and shapes; throws FormatError on
// any mismatch rather than coercing.
Checkpoint load_checkpoint(const std::string& path);

std::uint64_t file_fnv1a(const std::string& path);

}  // namespace sparselm
