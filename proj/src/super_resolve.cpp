#include "cbpfa/super_resolve.hpp"

#include <algorithm>
#include <cmath>

#include "cbpfa/gibbs.hpp"
#include "cbpfa/resample.hpp"
#include "cbpfa/rng.hpp"
#include "cbpfa/threading.hpp"

namespace cbpfa {

namespace {

// (theta, Theta)-only refresh against the point globals; run once after
// the MCMC warm start so the first nu update does not see the mapped
// prior variance.
void point_weight_refresh(const Eigen::MatrixXd& dict, double gamma,
                          double alpha, LocalState& l, Eigen::MatrixXd& R) {
  const Eigen::Index N = l.N();
  Eigen::VectorXd col_sq = dict.colwise().squaredNorm();
  for (Eigen::Index k = 0; k < l.K(); ++k) {
    const double dd = col_sq[k];
    parallel_for(0, static_cast<std::size_t>(N), [&](std::size_t ii) {
      Eigen::Index i = static_cast<Eigen::Index>(ii);
      auto r = R.col(i);
      double nu = l.nu(i, k);
      double code_old = l.theta(i, k) * nu;
      double dx = dict.col(k).dot(r) + dd * code_old;
      double Theta_new = 1.0 / (alpha + gamma * nu * dd);
      double theta_new = gamma * Theta_new * nu * dx;
      l.theta(i, k) = theta_new;
      l.Theta(i, k) = Theta_new;
      double code_new = theta_new * nu;
      if (code_new != code_old) r += dict.col(k) * (code_old - code_new);
    });
  }
}

// Local coordinate ascent against point-estimate globals: likelihood
// through the LR dictionary half with precision gamma_hat, weight prior
// alpha_hat, assignment prior log pi_hat.
void point_local_sweep(const Eigen::MatrixXd& dict,
                       const Eigen::VectorXd& log_pi,
                       const Eigen::VectorXd& log_1mpi, double gamma,
                       double alpha, const Eigen::MatrixXd& X, LocalState& l,
                       Eigen::MatrixXd& R) {
  const Eigen::Index N = X.cols();
  const Eigen::Index K = dict.cols();
  Eigen::VectorXd col_sq = dict.colwise().squaredNorm();

  for (Eigen::Index k = 0; k < K; ++k) {
    const double dd = col_sq[k];
    const double prior_gap = log_pi[k] - log_1mpi[k];
    parallel_for(0, static_cast<std::size_t>(N), [&](std::size_t ii) {
      Eigen::Index i = static_cast<Eigen::Index>(ii);
      auto r = R.col(i);
      double theta = l.theta(i, k);
      double code_old = theta * l.nu(i, k);
      double dx = dict.col(k).dot(r) + dd * code_old;

      double e_s2 = theta * theta + l.Theta(i, k);
      double log_odds =
          prior_gap - 0.5 * gamma * (e_s2 * dd - 2.0 * theta * dx);
      double nu;
      if (log_odds > 36.0)
        nu = 1.0;
      else if (log_odds < -36.0)
        nu = 0.0;
      else
        nu = 1.0 / (1.0 + std::exp(-log_odds));
      if (!std::isfinite(nu))
        throw ModelError("code inference produced non-finite nu at (" +
                         std::to_string(i) + "," + std::to_string(k) + ")");

      double Theta_new = 1.0 / (alpha + gamma * nu * dd);
      double theta_new = gamma * Theta_new * nu * dx;
      l.nu(i, k) = nu;
      l.theta(i, k) = theta_new;
      l.Theta(i, k) = Theta_new;
      double code_new = theta_new * nu;
      if (code_new != code_old) r += dict.col(k) * (code_old - code_new);
    });
  }
}

Eigen::VectorXd clamped_pi(const PosteriorEstimate& est) {
  return est.pi_hat.cwiseMax(1e-12).cwiseMin(1.0 - 1e-12);
}

}  // namespace

LocalState infer_codes_lr(const PatchMatrix& lr_patches,
                          const PosteriorEstimate& est, const SRConfig& cfg) {
  cfg.validate();
  const Eigen::Index P = est.dictionary.P;
  if (lr_patches.dim() != P)
    throw ModelError("patch dimension " + std::to_string(lr_patches.dim()) +
                     " does not match model LR dimension " +
                     std::to_string(P));
  if (!(est.gamma_hat > 0.0) || !(est.alpha_hat > 0.0))
    throw ModelError("model precisions must be positive");

  Eigen::MatrixXd dict = est.dictionary.lr_half();
  Eigen::VectorXd pi = clamped_pi(est);
  const Eigen::MatrixXd& X = lr_patches.data;
  const Eigen::Index N = X.cols();
  const Eigen::Index K = dict.cols();

  if (cfg.code_inference == SRConfig::CodeInference::kGibbs) {
    // Short chain; average the assignments and weights past mid-run.
    std::vector<Rng> patch_rng;
    patch_rng.reserve(static_cast<std::size_t>(N));
    for (Eigen::Index i = 0; i < N; ++i)
      patch_rng.emplace_back(cfg.seed, static_cast<std::uint64_t>(i) + 1);
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(N, K);
    Eigen::MatrixXd S(N, K);
    double s_sd = std::sqrt(1.0 / est.alpha_hat);
    for (Eigen::Index i = 0; i < N; ++i) {
      Rng& rng = patch_rng[static_cast<std::size_t>(i)];
      for (Eigen::Index k = 0; k < K; ++k) S(i, k) = s_sd * rng.normal();
    }
    Eigen::MatrixXd R = X - dict * (S.array() * Z.array()).matrix().transpose();
    int total = cfg.code_init_sweeps + std::max(cfg.code_iters, 1);
    int keep_from = total / 2;
    Eigen::MatrixXd z_sum = Eigen::MatrixXd::Zero(N, K);
    Eigen::MatrixXd s_sum = Eigen::MatrixXd::Zero(N, K);
    int kept = 0;
    for (int sweep = 0; sweep < total; ++sweep) {
      gibbs_local_sweep(dict, pi, est.gamma_hat, est.alpha_hat, X, Z, S, R,
                        patch_rng);
      if (sweep >= keep_from) {
        z_sum += Z;
        s_sum += S;
        ++kept;
      }
    }
    LocalState codes;
    codes.nu = z_sum / static_cast<double>(kept);
    codes.theta = s_sum / static_cast<double>(kept);
    codes.Theta = Eigen::MatrixXd::Constant(N, K, 1.0 / est.alpha_hat);
    return codes;
  }

  LocalState codes = gibbs_local_init(dict, pi, est.gamma_hat, est.alpha_hat,
                                      X, cfg.code_init_sweeps, cfg.seed);
  Eigen::MatrixXd R =
      X - dict * (codes.theta.array() * codes.nu.array()).matrix().transpose();
  point_weight_refresh(dict, est.gamma_hat, est.alpha_hat, codes, R);
  Eigen::VectorXd log_pi = pi.array().log();
  Eigen::VectorXd log_1mpi = (1.0 - pi.array()).log();
  for (int it = 0; it < cfg.code_iters; ++it)
    point_local_sweep(dict, log_pi, log_1mpi, est.gamma_hat, est.alpha_hat, X,
                      codes, R);
  return codes;
}

PatchMatrix synthesize_hr(const LocalState& codes,
                          const PosteriorEstimate& est,
                          const Eigen::VectorXd& means,
                          const PatchMatrix& lr_patches, bool soft_codes) {
  if (codes.K() != est.K())
    throw ModelError("codes and model disagree on K");
  if (means.size() != codes.N())
    throw ModelError("one mean per patch required");

  Eigen::MatrixXd weights;  // N x K effective codes
  if (soft_codes) {
    weights = (codes.theta.array() * codes.nu.array()).matrix();
  } else {
    weights = (codes.nu.array() > 0.5)
                  .select(codes.theta, Eigen::MatrixXd::Zero(codes.N(),
                                                             codes.K()));
  }

  PatchMatrix out;
  out.patch_size = lr_patches.patch_size;
  out.stride = lr_patches.stride;
  out.coords = lr_patches.coords;
  out.data = est.dictionary.hr_half() * weights.transpose();
  out.data.rowwise() += means.transpose();
  return out;
}

double back_project_objective(const ImagePlane& x, const ImagePlane& lr_obs,
                              const ImagePlane& hr_est, const SRConfig& cfg) {
  ResampleAxis rows = bicubic_axis(x.height, lr_obs.height);
  ResampleAxis cols = bicubic_axis(x.width, lr_obs.width);
  ImagePlane fx = apply_separable(rows, cols, x);
  double data_term = 0.0;
  for (std::size_t i = 0; i < fx.size(); ++i) {
    double d = fx.data[i] - lr_obs.data[i];
    data_term += d * d;
  }
  double anchor = 0.0;
  if (cfg.postprocess_literal_objective) {
    ImagePlane fh = apply_separable(rows, cols, hr_est);
    for (std::size_t i = 0; i < fx.size(); ++i) {
      double d = fx.data[i] - fh.data[i];
      anchor += d * d;
    }
  } else {
    for (std::size_t i = 0; i < x.size(); ++i) {
      double d = x.data[i] - hr_est.data[i];
      anchor += d * d;
    }
  }
  return data_term + cfg.postprocess_c * anchor;
}

ImagePlane back_project_gradient(const ImagePlane& x, const ImagePlane& lr_obs,
                                 const ImagePlane& hr_est,
                                 const SRConfig& cfg) {
  ResampleAxis rows = bicubic_axis(x.height, lr_obs.height);
  ResampleAxis cols = bicubic_axis(x.width, lr_obs.width);
  ImagePlane fx = apply_separable(rows, cols, x);

  ImagePlane lr_diff(lr_obs.width, lr_obs.height);
  for (std::size_t i = 0; i < fx.size(); ++i)
    lr_diff.data[i] = fx.data[i] - lr_obs.data[i];
  ImagePlane grad = apply_separable_adjoint(rows, cols, lr_diff);
  for (double& v : grad.data) v *= 2.0;

  if (cfg.postprocess_literal_objective) {
    ImagePlane fh = apply_separable(rows, cols, hr_est);
    ImagePlane hr_diff(lr_obs.width, lr_obs.height);
    for (std::size_t i = 0; i < fx.size(); ++i)
      hr_diff.data[i] = fx.data[i] - fh.data[i];
    ImagePlane anchor_grad = apply_separable_adjoint(rows, cols, hr_diff);
    for (std::size_t i = 0; i < grad.size(); ++i)
      grad.data[i] += 2.0 * cfg.postprocess_c * anchor_grad.data[i];
  } else {
    for (std::size_t i = 0; i < grad.size(); ++i)
      grad.data[i] +=
          2.0 * cfg.postprocess_c * (x.data[i] - hr_est.data[i]);
  }
  return grad;
}

ImagePlane back_project(const ImagePlane& hr_est, const ImagePlane& lr_obs,
                        const SRConfig& cfg) {
  // Ratio 1 (identity operator) is allowed here for testing; the full
  // pipeline validates the stricter SRConfig invariants itself.
  if (hr_est.width % lr_obs.width != 0 ||
      hr_est.height % lr_obs.height != 0 ||
      hr_est.width / lr_obs.width != hr_est.height / lr_obs.height)
    throw ModelError("back_project: LR dimensions must be HR / ratio");
  if (cfg.postprocess_iters == 0) return hr_est;

  ImagePlane x = hr_est;
  double objective = back_project_objective(x, lr_obs, hr_est, cfg);
  double step = cfg.postprocess_step;

  for (int it = 0; it < cfg.postprocess_iters; ++it) {
    ImagePlane grad = back_project_gradient(x, lr_obs, hr_est, cfg);
    bool accepted = false;
    for (int halvings = 0; halvings < 30; ++halvings) {
      ImagePlane candidate = x;
      for (std::size_t i = 0; i < x.size(); ++i)
        candidate.data[i] =
            std::clamp(x.data[i] - step * grad.data[i], 0.0, 255.0);
      double cand_obj = back_project_objective(candidate, lr_obs, hr_est, cfg);
      if (std::isnan(cand_obj))
        throw ModelError(
            "back_project diverged; reduce postprocess_step");
      if (cand_obj <= objective) {
        x = std::move(candidate);
        objective = cand_obj;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // line search exhausted, at a stationary point
  }
  return x;
}

YCbCrImage super_resolve(const YCbCrImage& lr_image,
                         const PosteriorEstimate& est, const SRConfig& cfg) {
  cfg.validate();
  if (est.patch_size > 0 && est.patch_size != cfg.patch_size)
    throw ModelError("model was trained with patch size " +
                     std::to_string(est.patch_size) + ", config says " +
                     std::to_string(cfg.patch_size));
  if (est.sr_ratio > 0 && est.sr_ratio != cfg.sr_ratio)
    throw ModelError("model was trained for ratio " +
                     std::to_string(est.sr_ratio) + ", config says " +
                     std::to_string(cfg.sr_ratio));
  if (est.dictionary.P !=
      static_cast<Eigen::Index>(cfg.patch_size) * cfg.patch_size)
    throw ModelError("model dictionary dimension does not match patch size");

  const int W = lr_image.width() * cfg.sr_ratio;
  const int H = lr_image.height() * cfg.sr_ratio;

  ImagePlane upscaled = resize_bicubic(lr_image.y, W, H);
  PatchMatrix patches = extract_patches(upscaled, cfg.patch_size, cfg.stride);

  // Center by the LR patch mean, invert after synthesis.
  Eigen::VectorXd means = patches.data.colwise().mean();
  PatchMatrix centered = patches;
  centered.data.rowwise() -= means.transpose();

  LocalState codes = infer_codes_lr(centered, est, cfg);
  PatchMatrix hr_patches =
      synthesize_hr(codes, est, means, patches, cfg.soft_codes);
  ImagePlane y = reassemble(hr_patches, W, H);
  if (cfg.postprocess) y = back_project(y, lr_image.y, cfg);

  YCbCrImage out;
  out.y = std::move(y);
  out.cb = resize_bicubic(lr_image.cb, W, H);
  out.cr = resize_bicubic(lr_image.cr, W, H);
  return out;
}

}  // namespace cbpfa
