#pragma once

#include <string>

#include "cbpfa/model.hpp"

namespace cbpfa {

// CBPD container: magic "CBPD", little-endian u32 version (1), u32 byte
// length of a UTF-8 JSON metadata block, then the arrays named by the
// metadata manifest as contiguous little-endian f64: phi (2P x K,
// column-major), Phi (K), tau1 (K), tau2 (K), lambda (2), eps (2).
struct ModelFile {
  GlobalVariationalState state;
  PosteriorEstimate estimate;
};

void save_model(const std::string& path, const GlobalVariationalState& g,
                const PosteriorEstimate& est);

ModelFile load_model(const std::string& path);

}  // namespace cbpfa
