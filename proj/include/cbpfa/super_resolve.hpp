#pragma once

#include <cstdint>

#include "cbpfa/image.hpp"
#include "cbpfa/model.hpp"
#include "cbpfa/patches.hpp"

namespace cbpfa {

struct SRConfig {
  int sr_ratio = 2;
  int patch_size = 8;
  int stride = 2;
  enum class CodeInference { kVb, kGibbs };
  CodeInference code_inference = CodeInference::kVb;
  int code_iters = 20;
  int code_init_sweeps = 3;
  bool soft_codes = false;     // nu .* theta instead of thresholded z
  bool postprocess = true;
  double postprocess_c = 1.0;
  int postprocess_iters = 20;
  double postprocess_step = 0.1;
  // Published objective puts the downsampling operator in the anchor
  // term as well.
  bool postprocess_literal_objective = false;
  std::uint64_t seed = 0;

  void validate() const {
    if (sr_ratio < 2) throw ModelError("sr_ratio must be >= 2");
    if (stride < 1 || stride > patch_size)
      throw ModelError("stride must lie in [1, patch_size]");
    if (code_iters < 0 || code_init_sweeps < 1)
      throw ModelError("bad code inference iteration counts");
    if (!(postprocess_c > 0.0))
      throw ModelError("postprocess weight must be > 0");
    if (postprocess_iters < 0 || !(postprocess_step > 0.0))
      throw ModelError("bad postprocess settings");
  }
};

// Sparse-code beliefs for LR-only patches against the frozen model: the
// LR dictionary half in the likelihood, gamma_hat as noise precision,
// alpha_hat as weight precision, pi_hat as assignment prior.
LocalState infer_codes_lr(const PatchMatrix& lr_patches,
                          const PosteriorEstimate& est, const SRConfig& cfg);

// HR patches synthesized from codes; `means` holds the per-patch LR DC
// level added back onto each column (pass zeros when patches were never
// centered).
PatchMatrix synthesize_hr(const LocalState& codes,
                          const PosteriorEstimate& est,
                          const Eigen::VectorXd& means,
                          const PatchMatrix& lr_patches, bool soft_codes);

// Gradient descent on ||f(X) - lr||^2 + c ||X - hr_est||^2 where f is
// the bicubic reduction; halving line search, objective never increases
// on accepted steps.
ImagePlane back_project(const ImagePlane& hr_est, const ImagePlane& lr_obs,
                        const SRConfig& cfg);

// Objective/gradient of the back-projection problem, exposed so the
// analytic gradient can be checked against finite differences.
double back_project_objective(const ImagePlane& x, const ImagePlane& lr_obs,
                              const ImagePlane& hr_est, const SRConfig& cfg);
ImagePlane back_project_gradient(const ImagePlane& x, const ImagePlane& lr_obs,
                                 const ImagePlane& hr_est,
                                 const SRConfig& cfg);

// Full prediction path: luma through the learned model, chroma through
// bicubic interpolation.
YCbCrImage super_resolve(const YCbCrImage& lr_image,
                         const PosteriorEstimate& est, const SRConfig& cfg);

}  // namespace cbpfa
