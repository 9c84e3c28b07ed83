#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace cbpfa {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Hyperparameters of the beta-Bernoulli factor model. Gamma priors use
// the shape/rate convention (mean = shape/rate).
struct Hyperparameters {
  double c0 = 2.0;      // beta-process concentration
  double eta0 = 0.5;    // beta-process mean
  double c = 1e-6;      // noise precision gamma ~ Gamma(c, d)
  double d = 1e-6;
  double e = 1e-6;      // weight precision alpha ~ Gamma(e, f)
  double f = 1e-6;
  int K = 512;          // truncation level

  void validate() const {
    if (!(c0 > 0) || !(c > 0) || !(d > 0) || !(e > 0) || !(f > 0))
      throw ModelError("hyperparameters must be strictly positive");
    if (!(eta0 > 0.0 && eta0 < 1.0))
      throw ModelError("eta0 must lie in (0, 1)");
    if (K < 1) throw ModelError("truncation level K must be >= 1");
  }

  double pi_a() const { return c0 * eta0; }
  double pi_b() const { return c0 * (1.0 - eta0); }
};

// The learned artifact: a 2P x K matrix whose top P rows are the LR
// dictionary and bottom P rows the HR dictionary, sharing one sparse
// code per column.
struct CoupledDictionary {
  Eigen::Index P = 0;
  Eigen::MatrixXd data;  // 2P x K

  CoupledDictionary() = default;
  CoupledDictionary(Eigen::Index p, Eigen::Index k)
      : P(p), data(Eigen::MatrixXd::Zero(2 * p, k)) {}

  Eigen::Index K() const { return data.cols(); }
  auto lr_half() const { return data.topRows(P); }
  auto hr_half() const { return data.bottomRows(P); }
  auto lr_half() { return data.topRows(P); }
  auto hr_half() { return data.bottomRows(P); }
};

// Per-patch mean-field beliefs over (z, s).
struct LocalState {
  Eigen::MatrixXd nu;     // N x K, E[z] in [0,1]
  Eigen::MatrixXd theta;  // N x K, E[s]
  Eigen::MatrixXd Theta;  // N x K, Var[s] > 0

  Eigen::Index N() const { return nu.rows(); }
  Eigen::Index K() const { return nu.cols(); }

  static LocalState zeros(Eigen::Index n, Eigen::Index k,
                          double prior_variance) {
    LocalState l;
    l.nu = Eigen::MatrixXd::Zero(n, k);
    l.theta = Eigen::MatrixXd::Zero(n, k);
    l.Theta = Eigen::MatrixXd::Constant(n, k, prior_variance);
    return l;
  }
};

// Posteriors over the global variables. Phi holds one per-element
// variance per dictionary column (the column covariance is isotropic).
struct GlobalVariationalState {
  Eigen::VectorXd tau1;   // K
  Eigen::VectorXd tau2;   // K
  Eigen::MatrixXd phi;    // M x K dictionary means
  Eigen::VectorXd Phi;    // K per-element variances
  double lambda1 = 0.0;   // gamma | data ~ Gamma(lambda1, lambda2)
  double lambda2 = 0.0;
  double eps1 = 0.0;      // alpha | data ~ Gamma(eps1, eps2)
  double eps2 = 0.0;

  Eigen::Index M() const { return phi.rows(); }
  Eigen::Index K() const { return phi.cols(); }

  double gamma_mean() const { return lambda1 / lambda2; }
  double alpha_mean() const { return eps1 / eps2; }
  Eigen::VectorXd pi_mean() const {
    return tau1.array() / (tau1 + tau2).array();
  }

  void validate() const {
    if ((tau1.array() <= 0).any() || (tau2.array() <= 0).any())
      throw ModelError("tau parameters must stay positive");
    if ((Phi.array() <= 0).any())
      throw ModelError("dictionary variances must stay positive");
    if (!(lambda1 > 0) || !(lambda2 > 0) || !(eps1 > 0) || !(eps2 > 0))
      throw ModelError("gamma-posterior parameters must stay positive");
  }
};

// Point estimates consumed at test time, plus enough metadata to check
// that a model matches the images it is applied to.
struct PosteriorEstimate {
  CoupledDictionary dictionary;
  Eigen::VectorXd pi_hat;
  double gamma_hat = 0.0;
  double alpha_hat = 0.0;

  int patch_size = 0;
  int sr_ratio = 0;
  Hyperparameters hyper;
  std::string method;          // "gibbs" | "vb" | "online"
  std::uint64_t seed = 0;
  Eigen::Index n_train_patches = 0;

  Eigen::Index K() const { return dictionary.K(); }
};

}  // namespace cbpfa
