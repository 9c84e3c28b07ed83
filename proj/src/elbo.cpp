#include "cbpfa/elbo.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cbpfa/math_util.hpp"
#include "cbpfa/threading.hpp"

namespace cbpfa {

namespace {

double log_beta_fn(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

double bernoulli_entropy(double nu) {
  double h = 0.0;
  if (nu > 0.0) h -= nu * std::log(nu);
  if (nu < 1.0) h -= (1.0 - nu) * std::log(1.0 - nu);
  return h;
}

double gamma_entropy(double shape, double rate) {
  return shape - std::log(rate) + std::lgamma(shape) +
         (1.0 - shape) * digamma(shape);
}

constexpr double kLog2Pi = 1.8378770664093453;

}  // namespace

Eigen::VectorXd expected_residual(Eigen::Index i, Eigen::Index k,
                                  const GlobalVariationalState& g,
                                  const LocalState& l, const PatchMatrix& X) {
  Eigen::VectorXd r = X.data.col(i);
  for (Eigen::Index j = 0; j < g.K(); ++j) {
    if (j == k) continue;
    r -= g.phi.col(j) * (l.theta(i, j) * l.nu(i, j));
  }
  return r;
}

Eigen::VectorXd expected_sq_error(const GlobalVariationalState& g,
                                  const LocalState& l, const PatchMatrix& X) {
  const Eigen::Index N = X.count();
  const Eigen::Index K = g.K();
  const double M = static_cast<double>(g.M());

  Eigen::VectorXd col_sq = g.phi.colwise().squaredNorm();       // phi'phi
  Eigen::VectorXd col_mom = col_sq + M * g.Phi;                 // E[d'd]

  Eigen::VectorXd out(N);
  parallel_for(0, static_cast<std::size_t>(N), [&](std::size_t ii) {
    Eigen::Index i = static_cast<Eigen::Index>(ii);
    Eigen::VectorXd mean_code(K);
    for (Eigen::Index k = 0; k < K; ++k)
      mean_code[k] = l.theta(i, k) * l.nu(i, k);
    double sq = (X.data.col(i) - g.phi * mean_code).squaredNorm();
    for (Eigen::Index k = 0; k < K; ++k) {
      double nu = l.nu(i, k);
      double th = l.theta(i, k);
      double s2 = th * th + l.Theta(i, k);
      // nu * (E[s^2] E[d'd] - nu theta^2 phi'phi) >= 0 termwise.
      sq += nu * (s2 * col_mom[k] - nu * th * th * col_sq[k]);
    }
    out[i] = sq;
  });
  return out;
}

double compute_elbo(const GlobalVariationalState& g, const LocalState& l,
                    const PatchMatrix& X, const Hyperparameters& h) {
  g.validate();
  if ((l.Theta.array() <= 0).any())
    throw ModelError("compute_elbo: weight variances must be positive");
  if ((l.nu.array() < 0).any() || (l.nu.array() > 1).any())
    throw ModelError("compute_elbo: nu must lie in [0, 1]");

  const Eigen::Index N = X.count();
  const Eigen::Index K = g.K();
  const double M = static_cast<double>(g.M());
  const double a = h.pi_a(), b = h.pi_b();

  const double e_ln_gamma = digamma(g.lambda1) - std::log(g.lambda2);
  const double e_gamma = g.gamma_mean();
  const double e_ln_alpha = digamma(g.eps1) - std::log(g.eps2);
  const double e_alpha = g.alpha_mean();

  double elbo = 0.0;

  // Beta prior, z prior given pi, and dictionary prior (per column).
  for (Eigen::Index k = 0; k < K; ++k) {
    double psi_sum = digamma(g.tau1[k] + g.tau2[k]);
    double e_ln_pi = digamma(g.tau1[k]) - psi_sum;
    double e_ln_1mpi = digamma(g.tau2[k]) - psi_sum;
    elbo += (a - 1.0) * e_ln_pi + (b - 1.0) * e_ln_1mpi - log_beta_fn(a, b);

    double nu_sum = l.nu.col(k).sum();
    elbo += nu_sum * e_ln_pi + (N - nu_sum) * e_ln_1mpi;

    double e_dd = g.phi.col(k).squaredNorm() + M * g.Phi[k];
    elbo += 0.5 * M * (std::log(M) - kLog2Pi) - 0.5 * M * e_dd;

    // Entropies of q(pi_k) and q(d_k).
    elbo += log_beta_fn(g.tau1[k], g.tau2[k]) -
            (g.tau1[k] - 1.0) * digamma(g.tau1[k]) -
            (g.tau2[k] - 1.0) * digamma(g.tau2[k]) +
            (g.tau1[k] + g.tau2[k] - 2.0) * digamma(g.tau1[k] + g.tau2[k]);
    elbo += 0.5 * M * (1.0 + kLog2Pi) + 0.5 * M * std::log(g.Phi[k]);
  }

  // Per-patch pieces: weight prior, z and s entropies. Chunked partial
  // sums, combined in index order, keep the reduction deterministic.
  const std::size_t chunk = 256;
  std::size_t n_chunks = (static_cast<std::size_t>(N) + chunk - 1) / chunk;
  std::vector<double> partial(n_chunks, 0.0);
  parallel_for(0, n_chunks, [&](std::size_t ci) {
    double acc = 0.0;
    Eigen::Index lo = static_cast<Eigen::Index>(ci * chunk);
    Eigen::Index hi = std::min<Eigen::Index>(lo + chunk, N);
    for (Eigen::Index i = lo; i < hi; ++i) {
      for (Eigen::Index k = 0; k < K; ++k) {
        double th = l.theta(i, k);
        double e_s2 = th * th + l.Theta(i, k);
        acc += 0.5 * (e_ln_alpha - kLog2Pi) - 0.5 * e_alpha * e_s2;
        acc += bernoulli_entropy(l.nu(i, k));
        acc += 0.5 * (1.0 + kLog2Pi) + 0.5 * std::log(l.Theta(i, k));
      }
    }
    partial[ci] = acc;
  }, 1);
  for (double p : partial) elbo += p;

  // Likelihood term.
  double sq_total = expected_sq_error(g, l, X).sum();
  elbo += N * 0.5 * M * (e_ln_gamma - kLog2Pi) - 0.5 * e_gamma * sq_total;

  // Gamma priors on the precisions and their entropies.
  elbo += h.c * std::log(h.d) - std::lgamma(h.c) + (h.c - 1.0) * e_ln_gamma -
          h.d * e_gamma;
  elbo += h.e * std::log(h.f) - std::lgamma(h.e) + (h.e - 1.0) * e_ln_alpha -
          h.f * e_alpha;
  elbo += gamma_entropy(g.lambda1, g.lambda2);
  elbo += gamma_entropy(g.eps1, g.eps2);

  if (!std::isfinite(elbo)) throw ModelError("ELBO is not finite");
  return elbo;
}

}  // namespace cbpfa
