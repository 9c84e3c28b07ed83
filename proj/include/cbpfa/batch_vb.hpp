#pragma once

#include <cstdint>
#include <vector>

#include "cbpfa/model.hpp"
#include "cbpfa/patches.hpp"

namespace cbpfa {

struct VbOptions {
  double tol = 1e-5;        // relative ELBO improvement stop
  int max_sweeps = 200;     // total coordinate-ascent sweep budget
  int inner_sweeps = 15;    // sweep cap between MCMC excursions
  int excursion_sweeps = 10;  // sampler advance per round
  int init_sweeps = 5;      // MCMC warm-start sweeps
  std::uint64_t seed = 0;
  // Use the update equations exactly as published (nu^2 in the
  // dictionary update, Theta^2 in the alpha update, nu in the noise
  // update) instead of the conjugate-exact forms.
  bool paper_literal_updates = false;
};

struct ElboTracePoint {
  int sweep = 0;
  double elbo = 0.0;
  int used_elements = 0;
};

struct VbRunResult {
  PosteriorEstimate estimate;
  GlobalVariationalState g;
  LocalState l;
  std::vector<ElboTracePoint> trace;
};

// Exact coordinate updates. Each one maximizes the bound over its own
// block with everything else held fixed.
void update_local(Eigen::Index i, const GlobalVariationalState& g,
                  LocalState& l, const PatchMatrix& X);
void update_dictionary(GlobalVariationalState& g, const LocalState& l,
                       const PatchMatrix& X, bool paper_literal = false);
void update_pi(GlobalVariationalState& g, const LocalState& l,
               const Hyperparameters& h);
void update_gamma(GlobalVariationalState& g, const LocalState& l,
                  const PatchMatrix& X, const Hyperparameters& h,
                  bool paper_literal = false);
void update_alpha(GlobalVariationalState& g, const LocalState& l,
                  const Hyperparameters& h, bool paper_literal = false);

// One sweep in the nesting of the batch algorithm: per column, local
// updates for every patch then that dictionary column; afterwards pi,
// gamma, alpha.
void batch_vb_sweep(GlobalVariationalState& g, LocalState& l,
                    const PatchMatrix& X, const Hyperparameters& h,
                    bool paper_literal = false);

// Global-parameter updates from frozen locals, with every data sum
// scaled to n_effective patches. With n_effective = N this is exactly
// the global half of a batch sweep; the online engine calls it with
// n_effective = dataset size to pretend the mini-batch repeats.
GlobalVariationalState compute_global_update(const GlobalVariationalState& g,
                                             const LocalState& l,
                                             const PatchMatrix& X,
                                             const Hyperparameters& h,
                                             double n_effective,
                                             bool paper_literal = false);

// Post-warm-start refresh: dictionary posteriors, then weight beliefs.
// MCMC warm starts map the variances to prior values; fitting them to
// the data first keeps the subsequent nu updates from acting on stale
// uncertainty.
void warm_start_refresh(GlobalVariationalState& g, LocalState& l,
                        const PatchMatrix& X, bool paper_literal = false);

struct LocalFitOptions {
  int init_sweeps = 5;
  int max_iters = 30;
  double tol = 1e-4;
  std::uint64_t seed = 0;
};

// Local coordinate ascent against frozen globals: MCMC warm start, then
// sweeps until the local part of the objective stalls.
LocalState fit_local_state(const GlobalVariationalState& g,
                           const PatchMatrix& X, const Hyperparameters& h,
                           const LocalFitOptions& opts);

// Count of columns whose expected usage exceeds one half.
int vb_used_elements(const LocalState& l);

PosteriorEstimate estimate_from_global(const GlobalVariationalState& g,
                                       const Hyperparameters& h);

VbRunResult run_batch_vb(const PatchMatrix& X, const Hyperparameters& h,
                         const VbOptions& opts);

}  // namespace cbpfa
