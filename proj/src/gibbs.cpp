#include "cbpfa/gibbs.hpp"

#include <algorithm>
#include <cmath>

#include "cbpfa/threading.hpp"

namespace cbpfa {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

// z/s block for every (i, k) against a fixed dictionary. R holds the
// full residuals X - D(S.*Z)' and is kept current column-by-column; each
// patch touches only its own residual column and RNG substream.
void sample_locals(const Eigen::MatrixXd& dict, const Eigen::VectorXd& pi,
                   double gamma, double alpha, const Eigen::MatrixXd& X,
                   Eigen::MatrixXd& Z, Eigen::MatrixXd& S, Eigen::MatrixXd& R,
                   std::vector<Rng>& patch_rng) {
  const Eigen::Index N = X.cols();
  const Eigen::Index K = dict.cols();
  const double s_prior_sd = std::sqrt(1.0 / alpha);

  for (Eigen::Index k = 0; k < K; ++k) {
    const double dd = dict.col(k).squaredNorm();
    const double p = std::clamp(pi[k], 1e-300, 1.0 - 1e-16);
    const double log_pi_odds = std::log(p) - std::log1p(-p);
    parallel_for(0, static_cast<std::size_t>(N), [&](std::size_t ii) {
      Eigen::Index i = static_cast<Eigen::Index>(ii);
      Rng& rng = patch_rng[ii];
      auto r = R.col(i);
      double s = S(i, k);
      double z = Z(i, k);
      // Residual with column k withheld.
      if (z != 0.0) r += dict.col(k) * (s * z);
      double dx = dict.col(k).dot(r);

      double log_odds =
          log_pi_odds - 0.5 * gamma * (s * s * dd - 2.0 * s * dx);
      double z_new = rng.bernoulli_log_odds(log_odds) ? 1.0 : 0.0;

      double s_new;
      if (z_new != 0.0) {
        double prec = alpha + gamma * dd;
        double mean = gamma * dx / prec;
        s_new = rng.normal(mean, 1.0 / prec);
      } else {
        s_new = s_prior_sd * rng.normal();
      }
      Z(i, k) = z_new;
      S(i, k) = s_new;
      if (z_new != 0.0) r -= dict.col(k) * (s_new * z_new);
    });
  }
}

Eigen::MatrixXd full_residual(const Eigen::MatrixXd& dict,
                              const Eigen::MatrixXd& Z,
                              const Eigen::MatrixXd& S,
                              const Eigen::MatrixXd& X) {
  return X - dict * (S.array() * Z.array()).matrix().transpose();
}

double data_loglik(const GibbsState& st, const Eigen::MatrixXd& R) {
  double n = static_cast<double>(st.N());
  double m = static_cast<double>(st.M());
  return 0.5 * n * m * (std::log(st.gamma) - kLog2Pi) -
         0.5 * st.gamma * R.squaredNorm();
}

int used_element_count(const Eigen::MatrixXd& Z) {
  int used = 0;
  for (Eigen::Index k = 0; k < Z.cols(); ++k)
    if (Z.col(k).sum() > 0.0) ++used;
  return used;
}

}  // namespace

GibbsState init_gibbs_state(const PatchMatrix& X, const Hyperparameters& h,
                            std::uint64_t seed) {
  h.validate();
  const Eigen::Index N = X.count();
  const Eigen::Index M = X.dim();
  const Eigen::Index K = h.K;
  if (N < 1) throw ModelError("no patches to train on");

  GibbsState st;
  st.chain_rng = Rng(seed, 0);
  st.patch_rng.reserve(static_cast<std::size_t>(N));
  for (Eigen::Index i = 0; i < N; ++i)
    st.patch_rng.emplace_back(seed, static_cast<std::uint64_t>(i) + 1);

  st.pi.resize(K);
  for (Eigen::Index k = 0; k < K; ++k)
    st.pi[k] = st.chain_rng.beta(h.pi_a(), h.pi_b());
  st.alpha = h.e / h.f;

  st.D.resize(M, K);
  double dict_sd = std::sqrt(1.0 / static_cast<double>(M));
  for (Eigen::Index k = 0; k < K; ++k)
    for (Eigen::Index j = 0; j < M; ++j)
      st.D(j, k) = dict_sd * st.chain_rng.normal();

  // Codes start silent with prior-drawn weights; gamma comes from its
  // full conditional at this state, which tracks the raw data variance.
  st.Z = Eigen::MatrixXd::Zero(N, K);
  st.S.resize(N, K);
  double s_sd = std::sqrt(1.0 / st.alpha);
  for (Eigen::Index i = 0; i < N; ++i) {
    Rng& rng = st.patch_rng[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < K; ++k) st.S(i, k) = s_sd * rng.normal();
  }
  st.gamma =
      st.chain_rng.gamma(h.c + 0.5 * static_cast<double>(N * M),
                         h.d + 0.5 * X.data.squaredNorm());
  return st;
}

void gibbs_sweep(GibbsState& st, const PatchMatrix& X,
                 const Hyperparameters& h) {
  const Eigen::Index N = st.N();
  const Eigen::Index M = st.M();
  const Eigen::Index K = st.K();
  const double n = static_cast<double>(N);

  // Fresh residuals each sweep; incremental updates below keep them
  // current within the sweep.
  Eigen::MatrixXd R = full_residual(st.D, st.Z, st.S, X.data);

  sample_locals(st.D, st.pi, st.gamma, st.alpha, X.data, st.Z, st.S, R,
                st.patch_rng);

  // Dictionary columns.
  for (Eigen::Index k = 0; k < K; ++k) {
    double weight_sq = 0.0;         // sum_i z s^2
    Eigen::VectorXd moment = Eigen::VectorXd::Zero(M);  // sum_i z s r_i
    for (Eigen::Index i = 0; i < N; ++i) {
      double w = st.Z(i, k) * st.S(i, k);
      if (w == 0.0) continue;
      weight_sq += w * st.S(i, k);
      moment += R.col(i) * w;
    }
    // x~_{i(-k)} = r_i + d_k s z, so the mean picks up a d_k term.
    moment += st.D.col(k) * weight_sq;

    double prec = static_cast<double>(M) + st.gamma * weight_sq;
    Eigen::VectorXd mean = (st.gamma / prec) * moment;
    Eigen::VectorXd d_new(M);
    double sd = std::sqrt(1.0 / prec);
    for (Eigen::Index j = 0; j < M; ++j)
      d_new[j] = mean[j] + sd * st.chain_rng.normal();

    Eigen::VectorXd delta = st.D.col(k) - d_new;
    for (Eigen::Index i = 0; i < N; ++i) {
      double w = st.Z(i, k) * st.S(i, k);
      if (w != 0.0) R.col(i) += delta * w;
    }
    st.D.col(k) = d_new;
  }

  for (Eigen::Index k = 0; k < K; ++k) {
    double count = st.Z.col(k).sum();
    st.pi[k] = st.chain_rng.beta(h.pi_a() + count, h.pi_b() + n - count);
  }

  st.gamma = st.chain_rng.gamma(h.c + 0.5 * n * static_cast<double>(M),
                                h.d + 0.5 * R.squaredNorm());
  st.alpha = st.chain_rng.gamma(h.e + 0.5 * n * static_cast<double>(K),
                                h.f + 0.5 * st.S.squaredNorm());
}

void gibbs_resample_data(GibbsState& st, PatchMatrix& X) {
  Eigen::MatrixXd mean =
      st.D * (st.S.array() * st.Z.array()).matrix().transpose();
  double sd = std::sqrt(1.0 / st.gamma);
  parallel_for(0, static_cast<std::size_t>(st.N()), [&](std::size_t ii) {
    Eigen::Index i = static_cast<Eigen::Index>(ii);
    Rng& rng = st.patch_rng[ii];
    for (Eigen::Index j = 0; j < st.M(); ++j)
      X.data(j, i) = mean(j, i) + sd * rng.normal();
  });
}

GibbsRunResult run_gibbs(const PatchMatrix& X, const Hyperparameters& h,
                         const GibbsConfig& cfg) {
  cfg.validate();
  if (cfg.collect < 1) throw ModelError("run_gibbs needs collect >= 1");
  const Eigen::Index M = X.dim();
  if (M % 2 != 0)
    throw ModelError("coupled patches must have even dimension");

  GibbsState st = init_gibbs_state(X, h, cfg.seed);
  SampleStats stats;
  stats.burn_in = cfg.burn_in;

  auto record = [&](const GibbsState& s) {
    Eigen::MatrixXd R = full_residual(s.D, s.Z, s.S, X.data);
    stats.used_elements.push_back(used_element_count(s.Z));
    stats.loglik.push_back(data_loglik(s, R));
    stats.gamma_trace.push_back(s.gamma);
    stats.alpha_trace.push_back(s.alpha);
  };

  for (int sweep = 0; sweep < cfg.burn_in; ++sweep) {
    gibbs_sweep(st, X, h);
    record(st);
  }

  Eigen::MatrixXd d_sum = Eigen::MatrixXd::Zero(M, st.K());
  Eigen::VectorXd pi_sum = Eigen::VectorXd::Zero(st.K());
  double gamma_sum = 0.0, alpha_sum = 0.0;
  Eigen::Index samples = 0;
  for (int sweep = 1; sweep <= cfg.collect; ++sweep) {
    gibbs_sweep(st, X, h);
    record(st);
    if (sweep % cfg.thin == 0) {
      d_sum += st.D;
      pi_sum += st.pi;
      gamma_sum += st.gamma;
      alpha_sum += st.alpha;
      ++samples;
    }
  }
  if (samples == 0)
    throw ModelError("thinning left no collected samples");

  const double inv = 1.0 / static_cast<double>(samples);
  const double n = static_cast<double>(X.count());

  GibbsRunResult out;
  out.estimate.dictionary = CoupledDictionary(M / 2, st.K());
  out.estimate.dictionary.data = d_sum * inv;
  out.estimate.pi_hat = pi_sum * inv;
  out.estimate.gamma_hat = gamma_sum * inv;
  out.estimate.alpha_hat = alpha_sum * inv;
  out.estimate.hyper = h;
  out.estimate.method = "gibbs";
  out.estimate.seed = cfg.seed;
  out.estimate.n_train_patches = X.count();

  // Posterior means in variational form, for the model file.
  GlobalVariationalState& g = out.state;
  g.phi = out.estimate.dictionary.data;
  g.Phi = Eigen::VectorXd::Constant(st.K(), 1.0 / static_cast<double>(M));
  double tau_total = h.c0 + n;
  g.tau1 = out.estimate.pi_hat * tau_total;
  g.tau2 = (Eigen::VectorXd::Ones(st.K()) - out.estimate.pi_hat) * tau_total;
  g.tau1 = g.tau1.cwiseMax(1e-12);
  g.tau2 = g.tau2.cwiseMax(1e-12);
  g.lambda1 = h.c + 0.5 * n * static_cast<double>(M);
  g.lambda2 = g.lambda1 / out.estimate.gamma_hat;
  g.eps1 = h.e + 0.5 * n * static_cast<double>(st.K());
  g.eps2 = g.eps1 / out.estimate.alpha_hat;

  out.stats = std::move(stats);
  return out;
}

std::pair<GlobalVariationalState, LocalState> map_state_to_variational(
    const GibbsState& st, const Hyperparameters& h) {
  const double n = static_cast<double>(st.N());
  const double m = static_cast<double>(st.M());

  GlobalVariationalState g;
  g.phi = st.D;
  g.Phi = Eigen::VectorXd::Constant(st.K(), 1.0 / m);
  g.tau1.resize(st.K());
  g.tau2.resize(st.K());
  for (Eigen::Index k = 0; k < st.K(); ++k) {
    double count = st.Z.col(k).sum();
    g.tau1[k] = h.pi_a() + count;
    g.tau2[k] = h.pi_b() + n - count;
  }
  g.lambda1 = h.c + 0.5 * n * m;
  g.lambda2 = g.lambda1 / st.gamma;
  g.eps1 = h.e + 0.5 * n * static_cast<double>(st.K());
  g.eps2 = g.eps1 / st.alpha;

  LocalState l;
  l.nu = st.Z.cwiseMax(0.01).cwiseMin(0.99);
  l.theta = st.S;
  l.Theta = Eigen::MatrixXd::Constant(st.N(), st.K(), 1.0 / st.alpha);
  return {std::move(g), std::move(l)};
}

GibbsState sample_state_from_variational(const GlobalVariationalState& g,
                                         const LocalState& l,
                                         std::uint64_t seed) {
  GibbsState st;
  st.D = g.phi;
  st.pi = g.pi_mean().cwiseMax(1e-12).cwiseMin(1.0 - 1e-12);
  st.gamma = g.gamma_mean();
  st.alpha = g.alpha_mean();
  st.chain_rng = Rng(seed, 0);
  const Eigen::Index N = l.N();
  st.patch_rng.reserve(static_cast<std::size_t>(N));
  for (Eigen::Index i = 0; i < N; ++i)
    st.patch_rng.emplace_back(seed, static_cast<std::uint64_t>(i) + 1);
  st.Z.resize(N, l.K());
  st.S.resize(N, l.K());
  for (Eigen::Index i = 0; i < N; ++i) {
    Rng& rng = st.patch_rng[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < l.K(); ++k) {
      st.Z(i, k) = rng.bernoulli(l.nu(i, k)) ? 1.0 : 0.0;
      st.S(i, k) = rng.normal(l.theta(i, k), l.Theta(i, k));
    }
  }
  return st;
}

std::pair<GlobalVariationalState, LocalState> gibbs_init(
    const PatchMatrix& X, const Hyperparameters& h, int sweeps,
    std::uint64_t seed) {
  if (sweeps < 1) throw ModelError("gibbs_init needs sweeps >= 1");
  GibbsState st = init_gibbs_state(X, h, seed);
  for (int s = 0; s < sweeps; ++s) gibbs_sweep(st, X, h);
  return map_state_to_variational(st, h);
}

void gibbs_local_sweep(const Eigen::MatrixXd& dict, const Eigen::VectorXd& pi,
                       double gamma, double alpha, const Eigen::MatrixXd& X,
                       Eigen::MatrixXd& Z, Eigen::MatrixXd& S,
                       Eigen::MatrixXd& R, std::vector<Rng>& patch_rng) {
  sample_locals(dict, pi, gamma, alpha, X, Z, S, R, patch_rng);
}

LocalState gibbs_local_init(const Eigen::MatrixXd& dict,
                            const Eigen::VectorXd& pi, double gamma,
                            double alpha, const Eigen::MatrixXd& X,
                            int sweeps, std::uint64_t seed) {
  if (sweeps < 1) throw ModelError("gibbs_local_init needs sweeps >= 1");
  const Eigen::Index N = X.cols();
  const Eigen::Index K = dict.cols();

  std::vector<Rng> patch_rng;
  patch_rng.reserve(static_cast<std::size_t>(N));
  for (Eigen::Index i = 0; i < N; ++i)
    patch_rng.emplace_back(seed, static_cast<std::uint64_t>(i) + 1);

  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(N, K);
  Eigen::MatrixXd S(N, K);
  double s_sd = std::sqrt(1.0 / alpha);
  for (Eigen::Index i = 0; i < N; ++i) {
    Rng& rng = patch_rng[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < K; ++k) S(i, k) = s_sd * rng.normal();
  }

  Eigen::MatrixXd R = full_residual(dict, Z, S, X);
  for (int s = 0; s < sweeps; ++s)
    sample_locals(dict, pi, gamma, alpha, X, Z, S, R, patch_rng);

  LocalState l;
  l.nu = Z.cwiseMax(0.01).cwiseMin(0.99);
  l.theta = S;
  l.Theta = Eigen::MatrixXd::Constant(N, K, 1.0 / alpha);
  return l;
}

}  // namespace cbpfa
