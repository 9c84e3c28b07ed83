#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "cbpfa/image.hpp"

namespace cbpfa {

// Column-stacked patches. `dim` is patch_size^2 for single-scale
// matrices and 2*patch_size^2 for coupled LR;HR columns. coords[i] is
// the (row, col) origin of column i in the source image.
struct PatchMatrix {
  Eigen::MatrixXd data;                       // dim x count
  std::vector<std::pair<int, int>> coords;    // (row, col) origins
  int patch_size = 0;
  int stride = 0;

  Eigen::Index dim() const { return data.rows(); }
  Eigen::Index count() const { return data.cols(); }
};

// Grid of patch origins at the given stride, with a clamped final origin
// per axis so every pixel is covered; patches are raveled row-major. No
// centering.
PatchMatrix extract_patches(const ImagePlane& plane, int patch_size,
                            int stride);

// Training pairs per the coupled pipeline: LR plane is the bicubic
// re-interpolation of the downsampled HR plane; each column is
// (lr_patch; hr_patch) with the LR patch mean subtracted from both
// halves.
PatchMatrix build_coupled_patches(const ImagePlane& hr, int ratio,
                                  int patch_size, int stride);

// Pixel-wise mean of every patch covering each output pixel, clamped to
// [0, 255] at the end. Every pixel must be covered.
ImagePlane reassemble(const PatchMatrix& patches, int width, int height);

// Deterministic subsample of at most max_count columns (used to honor a
// training-patch budget).
PatchMatrix subsample_columns(const PatchMatrix& patches,
                              Eigen::Index max_count, std::uint64_t seed);

// Concatenate matrices with identical dim/patch_size (coords kept).
PatchMatrix concat_patches(const std::vector<PatchMatrix>& parts);

}  // namespace cbpfa
