#include "cbpfa/online_vb.hpp"

#include <cmath>
#include <numeric>

#include "cbpfa/elbo.hpp"
#include "cbpfa/gibbs.hpp"
#include "cbpfa/rng.hpp"

namespace cbpfa {

double step_size(int t, const LearningSchedule& sched) {
  sched.validate();
  if (t < 1) throw ModelError("schedule is defined for t >= 1");
  return std::pow(sched.rho0 + static_cast<double>(t), -sched.kappa);
}

GlobalVariationalState blend_natural(const GlobalVariationalState& g,
                                     const GlobalVariationalState& g_new,
                                     double rho) {
  if (rho < 0.0 || rho > 1.0) throw ModelError("rho must lie in [0, 1]");
  if (rho == 0.0) return g;
  if (rho == 1.0) return g_new;
  const double keep = 1.0 - rho;

  GlobalVariationalState out = g;
  out.tau1 = keep * g.tau1 + rho * g_new.tau1;
  out.tau2 = keep * g.tau2 + rho * g_new.tau2;
  out.lambda1 = keep * g.lambda1 + rho * g_new.lambda1;
  out.lambda2 = keep * g.lambda2 + rho * g_new.lambda2;
  out.eps1 = keep * g.eps1 + rho * g_new.eps1;
  out.eps2 = keep * g.eps2 + rho * g_new.eps2;

  for (Eigen::Index k = 0; k < g.K(); ++k) {
    double prec = keep / g.Phi[k] + rho / g_new.Phi[k];
    out.Phi[k] = 1.0 / prec;
    out.phi.col(k) = out.Phi[k] * (keep / g.Phi[k] * g.phi.col(k) +
                                   rho / g_new.Phi[k] * g_new.phi.col(k));
  }
  return out;
}

GlobalVariationalState online_step(const GlobalVariationalState& g,
                                   const PatchMatrix& batch, int t,
                                   const LearningSchedule& sched,
                                   const Hyperparameters& h,
                                   const OnlineStepOptions& opts) {
  if (batch.count() < 1) throw ModelError("online_step needs a batch");
  double n_eff = static_cast<double>(
      sched.n_total > 0 ? sched.n_total : batch.count());

  LocalState l = fit_local_state(g, batch, h, opts.local_fit);
  GlobalVariationalState intermediate = compute_global_update(
      g, l, batch, h, n_eff, opts.paper_literal_updates);
  return blend_natural(g, intermediate, step_size(t, sched));
}

OnlineRunResult run_online_vb(const PatchMatrix& X, const Hyperparameters& h,
                              const LearningSchedule& sched,
                              const OnlineVbOptions& opts) {
  h.validate();
  sched.validate();
  const Eigen::Index N = X.count();
  if (N < 1) throw ModelError("run_online_vb needs patches");
  const Eigen::Index bs = std::min<Eigen::Index>(sched.batch_size, N);

  LearningSchedule effective = sched;
  effective.batch_size = bs;
  if (effective.n_total <= 0) effective.n_total = N;

  Rng shuffle_rng(opts.seed, 0);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), 0);

  auto take_batch = [&](Eigen::Index start) {
    PatchMatrix b;
    b.patch_size = X.patch_size;
    b.stride = X.stride;
    Eigen::Index len = std::min<Eigen::Index>(bs, N - start);
    b.data.resize(X.dim(), len);
    b.coords.reserve(static_cast<std::size_t>(len));
    for (Eigen::Index i = 0; i < len; ++i) {
      Eigen::Index src = order[static_cast<std::size_t>(start + i)];
      b.data.col(i) = X.data.col(src);
      b.coords.push_back(X.coords.empty()
                             ? std::pair<int, int>{0, 0}
                             : X.coords[static_cast<std::size_t>(src)]);
    }
    return b;
  };

  auto reshuffle = [&]() {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::size_t j =
          static_cast<std::size_t>(shuffle_rng.next_u64() % (i + 1));
      std::swap(order[i], order[j]);
    }
  };

  OnlineRunResult out;
  reshuffle();
  PatchMatrix first = take_batch(0);
  auto [g, l0] = gibbs_init(first, h, opts.init_sweeps, opts.seed);
  // Same warm refresh as the batch engine before the first step.
  warm_start_refresh(g, l0, first, opts.step.paper_literal_updates);
  out.g = std::move(g);

  int t = 0;
  for (int pass = 0; pass < opts.passes; ++pass) {
    if (pass > 0) reshuffle();
    for (Eigen::Index start = 0; start < N; start += bs) {
      ++t;
      PatchMatrix batch = pass == 0 && start == 0 ? std::move(first)
                                                  : take_batch(start);
      OnlineStepOptions step_opts = opts.step;
      step_opts.local_fit.seed =
          opts.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(t));
      double rho = step_size(t, effective);
      LocalState l = fit_local_state(out.g, batch, h, step_opts.local_fit);
      GlobalVariationalState intermediate =
          compute_global_update(out.g, l, batch, h,
                                static_cast<double>(effective.n_total),
                                step_opts.paper_literal_updates);
      out.g = blend_natural(out.g, intermediate, rho);

      OnlineTracePoint tp;
      tp.t = t;
      tp.rho = rho;
      tp.elbo_batch_estimate = compute_elbo(out.g, l, batch, h);
      tp.used_elements = vb_used_elements(l);
      out.trace.push_back(tp);
    }
  }

  out.estimate = estimate_from_global(out.g, h);
  out.estimate.method = "online";
  out.estimate.seed = opts.seed;
  out.estimate.n_train_patches = N;
  return out;
}

}  // namespace cbpfa
