#pragma once

#include <cstdint>
#include <optional>

#include "cbpfa/model.hpp"
#include "cbpfa/patches.hpp"

namespace cbpfa {

// One full draw from the generative model, kept around so tests can
// compare inferred quantities against the truth that produced the data.
struct GenerativeDraw {
  CoupledDictionary dictionary;
  Eigen::VectorXd pi;        // K
  Eigen::MatrixXd z;         // N x K in {0,1}
  Eigen::MatrixXd s;         // N x K
  double gamma = 0.0;
  double alpha = 0.0;
  PatchMatrix x;             // 2P x N coupled observations
};

struct GenerativeOptions {
  // Fixing the precisions pins the signal-to-noise ratio in tests.
  std::optional<double> fixed_gamma;
  std::optional<double> fixed_alpha;
};

// pi_k ~ Beta(c0 eta0, c0(1-eta0)); z_ik ~ Bern(pi_k); alpha ~ Gamma(e,f);
// s_ik ~ N(0, 1/alpha); d_k ~ N(0, (2P)^-1 I); gamma ~ Gamma(c,d);
// x_i = D(s_i .* z_i) + noise. Bit-reproducible for a given seed.
GenerativeDraw sample_generative(const Hyperparameters& h, Eigen::Index P,
                                 Eigen::Index N, std::uint64_t seed,
                                 const GenerativeOptions& opts = {});

}  // namespace cbpfa
