#pragma once

#include <cstdint>
#include <vector>

#include "cbpfa/model.hpp"
#include "cbpfa/patches.hpp"
#include "cbpfa/rng.hpp"

namespace cbpfa {

// Full state of one Markov chain. Patch-level draws come from per-patch
// RNG substreams so parallel sweeps stay reproducible; everything else
// uses the chain stream.
struct GibbsState {
  Eigen::MatrixXd D;     // M x K dictionary
  Eigen::MatrixXd Z;     // N x K binary assignments
  Eigen::MatrixXd S;     // N x K weights
  Eigen::VectorXd pi;    // K usage probabilities
  double gamma = 1.0;    // noise precision
  double alpha = 1.0;    // weight precision
  Rng chain_rng;
  std::vector<Rng> patch_rng;

  Eigen::Index M() const { return D.rows(); }
  Eigen::Index K() const { return D.cols(); }
  Eigen::Index N() const { return Z.rows(); }
};

struct GibbsConfig {
  int burn_in = 1500;
  int collect = 1500;
  int thin = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (burn_in < 0 || collect < 0)
      throw ModelError("burn_in and collect must be >= 0");
    if (thin < 1) throw ModelError("thin must be >= 1");
  }
};

struct SampleStats {
  std::vector<int> used_elements;   // per sweep, burn-in included
  std::vector<double> loglik;       // data log-likelihood per sweep
  std::vector<double> gamma_trace;
  std::vector<double> alpha_trace;
  int burn_in = 0;                  // sweeps before collection starts
};

struct GibbsRunResult {
  PosteriorEstimate estimate;
  GlobalVariationalState state;  // posterior means mapped for CBPD output
  SampleStats stats;
};

// Fresh chain: pi and D drawn from their priors, codes silent (Z = 0)
// with prior-drawn weights, alpha at its prior mean, and gamma drawn
// from its full conditional at that state so it starts matched to the
// raw data variance.
GibbsState init_gibbs_state(const PatchMatrix& X, const Hyperparameters& h,
                            std::uint64_t seed);

// One systematic scan: z/s for every (i,k) with a running residual, then
// every dictionary column, then pi, gamma, alpha. Bernoulli draws are
// taken in log-odds space.
void gibbs_sweep(GibbsState& state, const PatchMatrix& X,
                 const Hyperparameters& h);

// Redraws X from the likelihood given the current state (the
// complementary move of the joint-distribution checks).
void gibbs_resample_data(GibbsState& state, PatchMatrix& X);

// Burn-in + collection; returns posterior means over collected samples.
GibbsRunResult run_gibbs(const PatchMatrix& X, const Hyperparameters& h,
                         const GibbsConfig& cfg);

// Deterministic mapping of a chain state onto variational parameters:
// phi = D, Phi = 1/(2P), theta = S, Theta = 1/alpha, nu = clip(z),
// tau from the assignment counts, lambda/eps matched to the sampled
// precisions.
std::pair<GlobalVariationalState, LocalState> map_state_to_variational(
    const GibbsState& st, const Hyperparameters& h);

// Inverse direction: draw a chain state from the variational beliefs
// (z ~ Bern(nu), s ~ N(theta, Theta), point globals at their means).
GibbsState sample_state_from_variational(const GlobalVariationalState& g,
                                         const LocalState& l,
                                         std::uint64_t seed);

// A few MCMC sweeps mapped onto variational parameters; the standard
// warm start for both VB engines.
std::pair<GlobalVariationalState, LocalState> gibbs_init(
    const PatchMatrix& X, const Hyperparameters& h, int sweeps,
    std::uint64_t seed);

// Local-only variant against fixed globals: initializes (Z, S) from the
// given priors, sweeps them, and maps to a LocalState. Used for
// mini-batch warm starts and LR-only code inference.
LocalState gibbs_local_init(const Eigen::MatrixXd& dict,
                            const Eigen::VectorXd& pi, double gamma,
                            double alpha, const Eigen::MatrixXd& X,
                            int sweeps, std::uint64_t seed);

// One z/s sweep against fixed globals for callers that keep their own
// chain state. R must hold X - dict*(S.*Z)' on entry; kept current.
void gibbs_local_sweep(const Eigen::MatrixXd& dict, const Eigen::VectorXd& pi,
                       double gamma, double alpha, const Eigen::MatrixXd& X,
                       Eigen::MatrixXd& Z, Eigen::MatrixXd& S,
                       Eigen::MatrixXd& R, std::vector<Rng>& patch_rng);

}  // namespace cbpfa
