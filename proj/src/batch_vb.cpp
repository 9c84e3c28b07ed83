#include "cbpfa/batch_vb.hpp"

#include <cmath>

#include "cbpfa/elbo.hpp"
#include "cbpfa/gibbs.hpp"
#include "cbpfa/math_util.hpp"
#include "cbpfa/threading.hpp"

namespace cbpfa {

namespace {

// Everything the (nu, theta, Theta) update needs from the globals. The
// same kernel serves batch training (variational dictionary) and
// LR-only code inference (point dictionary, fixed precisions).
struct LocalContext {
  const Eigen::MatrixXd* dict = nullptr;  // M x K means
  Eigen::VectorXd col_sq;                 // phi_k' phi_k
  Eigen::VectorXd col_mom;                // E[d_k' d_k]
  Eigen::VectorXd e_ln_pi;
  Eigen::VectorXd e_ln_1mpi;
  double e_gamma = 0.0;
  double e_alpha = 0.0;
};

LocalContext make_context(const GlobalVariationalState& g) {
  LocalContext ctx;
  ctx.dict = &g.phi;
  ctx.col_sq = g.phi.colwise().squaredNorm();
  ctx.col_mom = ctx.col_sq + static_cast<double>(g.M()) * g.Phi;
  ctx.e_gamma = g.gamma_mean();
  ctx.e_alpha = g.alpha_mean();
  // psi(c0 + N) = psi(tau1 + tau2) once the tau updates have run; using
  // the current tau keeps the update exact during coordinate ascent.
  ctx.e_ln_pi.resize(g.K());
  ctx.e_ln_1mpi.resize(g.K());
  for (Eigen::Index k = 0; k < g.K(); ++k) {
    double psi_sum = digamma(g.tau1[k] + g.tau2[k]);
    ctx.e_ln_pi[k] = digamma(g.tau1[k]) - psi_sum;
    ctx.e_ln_1mpi[k] = digamma(g.tau2[k]) - psi_sum;
  }
  return ctx;
}

// Coordinate update at one (i, k). `r` is the full expected residual
// column for patch i; updated in place to stay current.
void local_update_at(const LocalContext& ctx, Eigen::Index i, Eigen::Index k,
                     LocalState& l, Eigen::Ref<Eigen::VectorXd> r) {
  const auto& dict = *ctx.dict;
  double theta = l.theta(i, k);
  double Theta = l.Theta(i, k);
  double code_old = theta * l.nu(i, k);
  // phi_k' E[x~_{i(-k)}] without materializing the withheld residual.
  double dx = dict.col(k).dot(r) + ctx.col_sq[k] * code_old;

  double e_s2 = theta * theta + Theta;
  double log_odds = ctx.e_ln_pi[k] - ctx.e_ln_1mpi[k] -
                    0.5 * ctx.e_gamma * (e_s2 * ctx.col_mom[k] -
                                         2.0 * theta * dx);
  double nu;
  if (log_odds > 36.0)
    nu = 1.0;
  else if (log_odds < -36.0)
    nu = 0.0;
  else
    nu = 1.0 / (1.0 + std::exp(-log_odds));
  if (!std::isfinite(nu))
    throw ModelError("local update produced non-finite nu at (" +
                     std::to_string(i) + "," + std::to_string(k) + ")");

  double Theta_new = 1.0 / (ctx.e_alpha + ctx.e_gamma * nu * ctx.col_mom[k]);
  double theta_new = ctx.e_gamma * Theta_new * nu * dx;
  if (!std::isfinite(theta_new) || !(Theta_new > 0.0))
    throw ModelError("local update produced non-finite weight at (" +
                     std::to_string(i) + "," + std::to_string(k) + ")");

  l.nu(i, k) = nu;
  l.theta(i, k) = theta_new;
  l.Theta(i, k) = Theta_new;
  double code_new = theta_new * nu;
  if (code_new != code_old) r += dict.col(k) * (code_old - code_new);
}

Eigen::MatrixXd expected_residual_matrix(const Eigen::MatrixXd& dict,
                                         const LocalState& l,
                                         const Eigen::MatrixXd& X) {
  return X - dict * (l.theta.array() * l.nu.array()).matrix().transpose();
}

// (theta, Theta)-only pass. MCMC warm starts map Theta to the prior
// variance, which makes the very first nu update condemn any weakly
// weighted component; fitting the weight beliefs first removes the
// stale-variance penalty.
void refresh_weights(const LocalContext& ctx, LocalState& l,
                     Eigen::MatrixXd& R) {
  const auto& dict = *ctx.dict;
  const Eigen::Index N = l.N();
  for (Eigen::Index k = 0; k < l.K(); ++k) {
    parallel_for(0, static_cast<std::size_t>(N), [&](std::size_t ii) {
      Eigen::Index i = static_cast<Eigen::Index>(ii);
      auto r = R.col(i);
      double nu = l.nu(i, k);
      double code_old = l.theta(i, k) * nu;
      double dx = dict.col(k).dot(r) + ctx.col_sq[k] * code_old;
      double Theta_new =
          1.0 / (ctx.e_alpha + ctx.e_gamma * nu * ctx.col_mom[k]);
      double theta_new = ctx.e_gamma * Theta_new * nu * dx;
      l.theta(i, k) = theta_new;
      l.Theta(i, k) = Theta_new;
      double code_new = theta_new * nu;
      if (code_new != code_old) r += dict.col(k) * (code_old - code_new);
    });
  }
}

// Dictionary column update against residuals R (kept current by the
// caller across columns). Scale multiplies the data sums.
void dictionary_update_column(GlobalVariationalState& g, const LocalState& l,
                              Eigen::MatrixXd& R, Eigen::Index k,
                              double e_gamma, double scale,
                              bool paper_literal) {
  const Eigen::Index N = l.N();
  const double M = static_cast<double>(g.M());

  double weight = 0.0;
  for (Eigen::Index i = 0; i < N; ++i) {
    double th = l.theta(i, k);
    double e_s2 = th * th + l.Theta(i, k);
    double m_z = paper_literal ? l.nu(i, k) * l.nu(i, k) : l.nu(i, k);
    weight += e_s2 * m_z;
  }

  Eigen::VectorXd code = (l.theta.col(k).array() * l.nu.col(k).array());
  // sum_i code_i E[x~_{i(-k)}] = R * code + phi_k * ||code||^2.
  Eigen::VectorXd moment = R * code + g.phi.col(k) * code.squaredNorm();

  double Phi_new = 1.0 / (M + e_gamma * scale * weight);
  Eigen::VectorXd phi_new = (e_gamma * scale * Phi_new) * moment;

  R.noalias() += (g.phi.col(k) - phi_new) * code.transpose();
  g.phi.col(k) = phi_new;
  g.Phi[k] = Phi_new;
}

double sum_expected_s2(const LocalState& l, bool paper_literal) {
  if (paper_literal)
    return l.theta.squaredNorm() + l.Theta.squaredNorm();
  return l.theta.squaredNorm() + l.Theta.sum();
}

double scaled_lambda2(const GlobalVariationalState& g, const LocalState& l,
                      const PatchMatrix& X, const Hyperparameters& h,
                      double scale, bool paper_literal) {
  if (!paper_literal)
    return h.d + 0.5 * scale * expected_sq_error(g, l, X).sum();
  // Published form: the subtracted diagonal uses nu instead of nu^2.
  const Eigen::Index N = X.count();
  const Eigen::Index K = g.K();
  const double M = static_cast<double>(g.M());
  Eigen::VectorXd col_sq = g.phi.colwise().squaredNorm();
  Eigen::VectorXd col_mom = col_sq + M * g.Phi;
  double total = 0.0;
  for (Eigen::Index i = 0; i < N; ++i) {
    Eigen::VectorXd code(K);
    for (Eigen::Index k = 0; k < K; ++k)
      code[k] = l.theta(i, k) * l.nu(i, k);
    double sq = (X.data.col(i) - g.phi * code).squaredNorm();
    for (Eigen::Index k = 0; k < K; ++k) {
      double th = l.theta(i, k);
      double nu = l.nu(i, k);
      sq += nu * (th * th + l.Theta(i, k)) * col_mom[k] -
            nu * th * th * col_sq[k];
    }
    total += sq;
  }
  return h.d + 0.5 * scale * total;
}

}  // namespace

void update_local(Eigen::Index i, const GlobalVariationalState& g,
                  LocalState& l, const PatchMatrix& X) {
  LocalContext ctx = make_context(g);
  Eigen::VectorXd r = X.data.col(i);
  for (Eigen::Index k = 0; k < g.K(); ++k)
    r -= g.phi.col(k) * (l.theta(i, k) * l.nu(i, k));
  for (Eigen::Index k = 0; k < g.K(); ++k) local_update_at(ctx, i, k, l, r);
}

void update_dictionary(GlobalVariationalState& g, const LocalState& l,
                       const PatchMatrix& X, bool paper_literal) {
  Eigen::MatrixXd R = expected_residual_matrix(g.phi, l, X.data);
  double e_gamma = g.gamma_mean();
  for (Eigen::Index k = 0; k < g.K(); ++k)
    dictionary_update_column(g, l, R, k, e_gamma, 1.0, paper_literal);
}

void update_pi(GlobalVariationalState& g, const LocalState& l,
               const Hyperparameters& h) {
  const double n = static_cast<double>(l.N());
  for (Eigen::Index k = 0; k < g.K(); ++k) {
    double nu_sum = l.nu.col(k).sum();
    g.tau1[k] = h.pi_a() + nu_sum;
    g.tau2[k] = n - nu_sum + h.pi_b();
  }
}

void update_gamma(GlobalVariationalState& g, const LocalState& l,
                  const PatchMatrix& X, const Hyperparameters& h,
                  bool paper_literal) {
  const double n = static_cast<double>(X.count());
  const double m = static_cast<double>(g.M());
  g.lambda1 = h.c + 0.5 * n * m;
  g.lambda2 = scaled_lambda2(g, l, X, h, 1.0, paper_literal);
  if (!(g.lambda2 > 0.0))
    throw ModelError("gamma update produced non-positive rate");
}

void update_alpha(GlobalVariationalState& g, const LocalState& l,
                  const Hyperparameters& h, bool paper_literal) {
  const double n = static_cast<double>(l.N());
  const double kk = static_cast<double>(l.K());
  g.eps1 = h.e + 0.5 * n * kk;
  g.eps2 = h.f + 0.5 * sum_expected_s2(l, paper_literal);
}

void batch_vb_sweep(GlobalVariationalState& g, LocalState& l,
                    const PatchMatrix& X, const Hyperparameters& h,
                    bool paper_literal) {
  const Eigen::Index N = X.count();
  LocalContext ctx = make_context(g);
  Eigen::MatrixXd R = expected_residual_matrix(g.phi, l, X.data);
  double e_gamma = g.gamma_mean();

  for (Eigen::Index k = 0; k < g.K(); ++k) {
    parallel_for(0, static_cast<std::size_t>(N), [&](std::size_t i) {
      local_update_at(ctx, static_cast<Eigen::Index>(i), k, l, R.col(i));
    });
    dictionary_update_column(g, l, R, k, e_gamma, 1.0, paper_literal);
    ctx.col_sq[k] = g.phi.col(k).squaredNorm();
    ctx.col_mom[k] = ctx.col_sq[k] + static_cast<double>(g.M()) * g.Phi[k];
  }

  update_pi(g, l, h);
  update_gamma(g, l, X, h, paper_literal);
  update_alpha(g, l, h, paper_literal);
}

GlobalVariationalState compute_global_update(const GlobalVariationalState& g,
                                             const LocalState& l,
                                             const PatchMatrix& X,
                                             const Hyperparameters& h,
                                             double n_effective,
                                             bool paper_literal) {
  const double n_batch = static_cast<double>(X.count());
  const double scale = n_effective / n_batch;
  const double m = static_cast<double>(g.M());
  const double e_gamma = g.gamma_mean();

  GlobalVariationalState out = g;
  Eigen::MatrixXd R = expected_residual_matrix(out.phi, l, X.data);
  for (Eigen::Index k = 0; k < out.K(); ++k)
    dictionary_update_column(out, l, R, k, e_gamma, scale, paper_literal);

  for (Eigen::Index k = 0; k < out.K(); ++k) {
    double nu_sum = scale * l.nu.col(k).sum();
    out.tau1[k] = h.pi_a() + nu_sum;
    out.tau2[k] = n_effective - nu_sum + h.pi_b();
  }
  out.lambda1 = h.c + 0.5 * n_effective * m;
  out.lambda2 = scaled_lambda2(out, l, X, h, scale, paper_literal);
  out.eps1 = h.e + 0.5 * n_effective * static_cast<double>(out.K());
  out.eps2 = h.f + 0.5 * scale * sum_expected_s2(l, paper_literal);
  return out;
}

namespace {

// Local-only part of the bound; enough to detect a stall of the inner
// coordinate ascent.
double local_objective(const LocalContext& ctx,
                       const GlobalVariationalState& g, const LocalState& l,
                       const PatchMatrix& X) {
  double obj = -0.5 * ctx.e_gamma * expected_sq_error(g, l, X).sum();
  for (Eigen::Index i = 0; i < l.N(); ++i) {
    for (Eigen::Index k = 0; k < l.K(); ++k) {
      double nu = l.nu(i, k);
      double th = l.theta(i, k);
      obj += nu * ctx.e_ln_pi[k] + (1.0 - nu) * ctx.e_ln_1mpi[k];
      obj += -0.5 * ctx.e_alpha * (th * th + l.Theta(i, k));
      if (nu > 0.0) obj -= nu * std::log(nu);
      if (nu < 1.0) obj -= (1.0 - nu) * std::log(1.0 - nu);
      obj += 0.5 * std::log(l.Theta(i, k));
    }
  }
  return obj;
}

}  // namespace

LocalState fit_local_state(const GlobalVariationalState& g,
                           const PatchMatrix& X, const Hyperparameters& h,
                           const LocalFitOptions& opts) {
  LocalState l = gibbs_local_init(g.phi, g.pi_mean(), g.gamma_mean(),
                                  g.alpha_mean(), X.data, opts.init_sweeps,
                                  opts.seed);
  LocalContext ctx = make_context(g);
  Eigen::MatrixXd R = expected_residual_matrix(g.phi, l, X.data);
  refresh_weights(ctx, l, R);

  double prev = local_objective(ctx, g, l, X);
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    for (Eigen::Index k = 0; k < g.K(); ++k) {
      parallel_for(0, static_cast<std::size_t>(X.count()), [&](std::size_t i) {
        local_update_at(ctx, static_cast<Eigen::Index>(i), k, l, R.col(i));
      });
    }
    double obj = local_objective(ctx, g, l, X);
    if (std::abs(obj - prev) < opts.tol * (std::abs(prev) + 1e-12)) break;
    prev = obj;
  }
  return l;
}

void warm_start_refresh(GlobalVariationalState& g, LocalState& l,
                        const PatchMatrix& X, bool paper_literal) {
  update_dictionary(g, l, X, paper_literal);
  LocalContext ctx = make_context(g);
  Eigen::MatrixXd R = expected_residual_matrix(g.phi, l, X.data);
  refresh_weights(ctx, l, R);
}

int vb_used_elements(const LocalState& l) {
  int used = 0;
  for (Eigen::Index k = 0; k < l.K(); ++k)
    if (l.nu.col(k).sum() > 0.5) ++used;
  return used;
}

PosteriorEstimate estimate_from_global(const GlobalVariationalState& g,
                                       const Hyperparameters& h) {
  PosteriorEstimate est;
  est.dictionary = CoupledDictionary(g.M() / 2, g.K());
  est.dictionary.data = g.phi;
  est.pi_hat = g.pi_mean();
  est.gamma_hat = g.gamma_mean();
  est.alpha_hat = g.alpha_mean();
  est.hyper = h;
  return est;
}

VbRunResult run_batch_vb(const PatchMatrix& X, const Hyperparameters& h,
                         const VbOptions& opts) {
  h.validate();
  if (X.count() < 1) throw ModelError("run_batch_vb needs patches");

  auto [g, l] = gibbs_init(X, h, opts.init_sweeps, opts.seed);
  // The init maps the dictionary variances to their prior value, which
  // overstates uncertainty against the fitted sample codes; one
  // dictionary pass puts the column posteriors onto the data before any
  // local update runs.
  update_dictionary(g, l, X, opts.paper_literal_updates);

  VbRunResult out;
  int sweeps_used = 0;
  double best_elbo = compute_elbo(g, l, X, h);

  // Outer rounds interleave coordinate ascent with short MCMC excursions
  // seeded from the incumbent beliefs; the sampler's noise re-sorts
  // dictionary columns where coordinate moves cannot. A round is kept
  // only if its stalled bound beats the best seen, so the committed
  // trajectory never walks downhill.
  for (int round = 0; sweeps_used < opts.max_sweeps; ++round) {
    GlobalVariationalState g_try = g;
    LocalState l_try = l;
    if (round > 0) {
      GibbsState excursion = sample_state_from_variational(
          g, l, opts.seed + 0x9e3779b9u * static_cast<std::uint64_t>(round));
      for (int s = 0; s < opts.excursion_sweeps; ++s)
        gibbs_sweep(excursion, X, h);
      std::tie(g_try, l_try) = map_state_to_variational(excursion, h);
      update_dictionary(g_try, l_try, X, opts.paper_literal_updates);
    }

    std::vector<ElboTracePoint> round_trace;
    double prev = compute_elbo(g_try, l_try, X, h);
    int inner = 0;
    while (sweeps_used < opts.max_sweeps && inner < opts.inner_sweeps) {
      batch_vb_sweep(g_try, l_try, X, h, opts.paper_literal_updates);
      ++sweeps_used;
      ++inner;
      double elbo = compute_elbo(g_try, l_try, X, h);
      round_trace.push_back({sweeps_used, elbo, vb_used_elements(l_try)});
      double rel = (elbo - prev) / std::abs(prev);
      prev = elbo;
      if (rel < opts.tol && round_trace.size() > 1) break;
    }

    if (round == 0 || prev > best_elbo) {
      best_elbo = prev;
      g = std::move(g_try);
      l = std::move(l_try);
      for (const auto& tp : round_trace)
        if (out.trace.empty() || tp.elbo >= out.trace.back().elbo)
          out.trace.push_back(tp);
    } else {
      break;  // an excursion that cannot beat the incumbent ends the run
    }
  }

  out.estimate = estimate_from_global(g, h);
  out.estimate.method = "vb";
  out.estimate.seed = opts.seed;
  out.estimate.n_train_patches = X.count();
  out.g = std::move(g);
  out.l = std::move(l);
  return out;
}

}  // namespace cbpfa
