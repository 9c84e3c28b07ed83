#pragma once

#include "cbpfa/model.hpp"
#include "cbpfa/patches.hpp"

namespace cbpfa {

// E_q[x_i - D(s_i .* z_i) + d_k s_ik z_ik]: the residual with column k
// withheld, evaluated at the variational means.
Eigen::VectorXd expected_residual(Eigen::Index i, Eigen::Index k,
                                  const GlobalVariationalState& g,
                                  const LocalState& l, const PatchMatrix& X);

// E_q || x_i - D(s_i .* z_i) ||^2 for every patch. Shared by the ELBO
// and the noise-precision update so the two can never disagree.
Eigen::VectorXd expected_sq_error(const GlobalVariationalState& g,
                                  const LocalState& l, const PatchMatrix& X);

// The variational lower bound on log p(X | hyperparameters): closed-form
// expectations of the joint under q plus the entropy of q. Each prior is
// counted once.
double compute_elbo(const GlobalVariationalState& g, const LocalState& l,
                    const PatchMatrix& X, const Hyperparameters& h);

}  // namespace cbpfa
