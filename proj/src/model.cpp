#include "sparselm/model.hpp"

namespace sparselm {

Variant parse_variant(const std::string& token) {
  if (token == "s") return Variant::kUncompressedS;
  if (token == "z") return Variant::kUncompressedZ;
  if (token == "z-wb") return Variant::kCompressedWb;
  if (token == "z-w") return Variant::kCompressedW;
  throw ConfigError("unknown variant '" + token +
                    "' (expected s, z, z-wb, or z-w)");
}

const char* variant_token(Variant v) {
  switch (v) {
    case Variant::kUncompressedS: return "s";
    case Variant::kUncompressedZ: return "z";
    case Variant::kCompressedWb: return "z-wb";
    case Variant::kCompressedW: return "z-w";
  }
  return "?";
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kUncompressedS: return "uncompressed-s";
    case Variant::kUncompressedZ: return "uncompressed-z";
    case Variant::kCompressedWb: return "compressed-wb";
    case Variant::kCompressedW: return "compressed-w";
  }
  return "?";
}

VariantConfig VariantConfig::make(Variant v, int E, int C, int B, int V) {
  VariantConfig cfg;
  cfg.variant = v;
  cfg.E = E;
  cfg.C = C;
  cfg.B = B;
  cfg.V = V;
  cfg.use_zregression = v != Variant::kUncompressedS;
  cfg.validate();
  return cfg;
}

void VariantConfig::validate() const {
  if (E <= 0 || C <= 0)
    throw ConfigError("model: E and C must be positive (E=" +
                      std::to_string(E) + ", C=" + std::to_string(C) + ")");
  if (V <= 0) throw ConfigError("model: V must be positive");
  if (B <= 0 || B > V)
    throw ConfigError("model: base size B=" + std::to_string(B) +
                      " must be in [1, V=" + std::to_string(V) + "]");
  if (variant == Variant::kUncompressedS && use_zregression)
    throw ConfigError("model: variant s cannot use ZRegression");
  if (variant != Variant::kUncompressedS && !use_zregression)
    throw ConfigError("model: variant " +
                      std::string(variant_token(variant)) +
                      " requires ZRegression");
}

CodeBook identity_codes(int vocab_size) {
  CodeBook book;
  book.base_size = vocab_size;
  book.codes.resize(std::size_t(vocab_size));
  for (int i = 0; i < vocab_size; ++i) {
    book.codes[std::size_t(i)].word_id = i;
    book.codes[std::size_t(i)].entries = {{i, 1.0f}};
  }
  return book;
}

}  // namespace sparselm
