#include "cbpfa/generative.hpp"

#include "cbpfa/rng.hpp"

namespace cbpfa {

GenerativeDraw sample_generative(const Hyperparameters& h, Eigen::Index P,
                                 Eigen::Index N, std::uint64_t seed,
                                 const GenerativeOptions& opts) {
  h.validate();
  if (P < 1 || N < 1)
    throw ModelError("sample_generative needs P >= 1 and N >= 1");
  const Eigen::Index K = h.K;
  const Eigen::Index M = 2 * P;
  Rng rng(seed, 0);

  GenerativeDraw draw;
  draw.pi.resize(K);
  for (Eigen::Index k = 0; k < K; ++k)
    draw.pi[k] = rng.beta(h.pi_a(), h.pi_b());

  draw.alpha = opts.fixed_alpha ? *opts.fixed_alpha : rng.gamma(h.e, h.f);
  draw.gamma = opts.fixed_gamma ? *opts.fixed_gamma : rng.gamma(h.c, h.d);

  draw.dictionary = CoupledDictionary(P, K);
  double dict_sd = std::sqrt(1.0 / static_cast<double>(M));
  for (Eigen::Index k = 0; k < K; ++k)
    for (Eigen::Index j = 0; j < M; ++j)
      draw.dictionary.data(j, k) = dict_sd * rng.normal();

  draw.z.resize(N, K);
  draw.s.resize(N, K);
  double s_sd = std::sqrt(1.0 / draw.alpha);
  for (Eigen::Index i = 0; i < N; ++i) {
    for (Eigen::Index k = 0; k < K; ++k) {
      draw.z(i, k) = rng.bernoulli(draw.pi[k]) ? 1.0 : 0.0;
      draw.s(i, k) = s_sd * rng.normal();
    }
  }

  draw.x.patch_size = 0;
  draw.x.stride = 0;
  draw.x.data.resize(M, N);
  Eigen::MatrixXd weights = (draw.s.array() * draw.z.array()).matrix();
  draw.x.data = draw.dictionary.data * weights.transpose();
  double noise_sd = std::sqrt(1.0 / draw.gamma);
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = 0; j < M; ++j)
      draw.x.data(j, i) += noise_sd * rng.normal();
  draw.x.coords.assign(static_cast<std::size_t>(N), {0, 0});
  return draw;
}

}  // namespace cbpfa
