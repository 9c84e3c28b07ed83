#pragma once

#include <cstdint>
#include <vector>

#include "cbpfa/batch_vb.hpp"
#include "cbpfa/model.hpp"
#include "cbpfa/patches.hpp"

namespace cbpfa {

// Robbins-Monro schedule rho_t = (rho0 + t)^(-kappa). kappa in (0.5, 1]
// makes the step sizes square-summable but not summable.
struct LearningSchedule {
  double rho0 = 3.0;
  double kappa = 0.501;
  Eigen::Index batch_size = 5000;
  Eigen::Index n_total = 0;  // dataset size the sums are scaled to

  LearningSchedule() = default;
  LearningSchedule(double rho0_, double kappa_, Eigen::Index batch,
                   Eigen::Index total)
      : rho0(rho0_), kappa(kappa_), batch_size(batch), n_total(total) {
    validate();
  }

  void validate() const {
    if (rho0 < 0.0) throw ModelError("rho0 must be >= 0");
    if (!(kappa > 0.5 && kappa <= 1.0))
      throw ModelError("kappa must lie in (0.5, 1]");
    if (batch_size < 1) throw ModelError("batch size must be >= 1");
  }
};

double step_size(int t, const LearningSchedule& sched);

// Convex combination of natural parameters: tau and the gamma shapes /
// rates blend directly, Gaussians blend precision and precision-times-
// mean. rho = 1 reproduces the incoming update; rho = 0 is a no-op.
GlobalVariationalState blend_natural(const GlobalVariationalState& g,
                                     const GlobalVariationalState& g_new,
                                     double rho);

struct OnlineStepOptions {
  LocalFitOptions local_fit;
  bool paper_literal_updates = false;
};

// One stochastic update: fit the batch locals against frozen globals,
// compute intermediate globals as if the batch repeated to n_total
// patches, then step along the natural gradient by rho_t.
GlobalVariationalState online_step(const GlobalVariationalState& g,
                                   const PatchMatrix& batch, int t,
                                   const LearningSchedule& sched,
                                   const Hyperparameters& h,
                                   const OnlineStepOptions& opts = {});

struct OnlineTracePoint {
  int t = 0;
  double rho = 0.0;
  double elbo_batch_estimate = 0.0;
  int used_elements = 0;
  double heldout_psnr = -1.0;  // negative when not measured
};

struct OnlineVbOptions {
  int passes = 1;
  int init_sweeps = 5;
  std::uint64_t seed = 0;
  OnlineStepOptions step;
};

struct OnlineRunResult {
  PosteriorEstimate estimate;
  GlobalVariationalState g;
  std::vector<OnlineTracePoint> trace;
};

// Shuffled mini-batch passes over X; t keeps increasing across passes.
OnlineRunResult run_online_vb(const PatchMatrix& X, const Hyperparameters& h,
                              const LearningSchedule& sched,
                              const OnlineVbOptions& opts);

}  // namespace cbpfa
