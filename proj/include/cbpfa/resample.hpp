#pragma once

#include <vector>

#include "cbpfa/image.hpp"

namespace cbpfa {

// Separable cubic convolution, a = -0.5, coordinates clamped at the
// borders. Output clamped to [0, 255]. Same-size calls return the input
// unchanged.
ImagePlane resize_bicubic(const ImagePlane& plane, int out_w, int out_h);

// Integer-factor reduction with the same kernel stretched by the rate,
// which doubles as the anti-alias filter. Dimensions must divide evenly.
ImagePlane downsample(const ImagePlane& plane, int ratio);

ImagePlane resize_nearest(const ImagePlane& plane, int out_w, int out_h);
ImagePlane resize_bilinear(const ImagePlane& plane, int out_w, int out_h);

// One axis of a resampling operator as explicit normalized weights:
// out[i] = sum_j weights[i][j].second * in[weights[i][j].first].
// Exposing the taps makes the exact adjoint available to the
// back-projection step.
struct ResampleAxis {
  std::vector<std::vector<std::pair<int, double>>> taps;
  int in_size = 0;
  int out_size = 0;
};

ResampleAxis bicubic_axis(int in_size, int out_size);

// Unclamped linear application of the separable reduction (rows then
// columns); linear in the input, unlike `downsample` which clamps.
ImagePlane apply_separable(const ResampleAxis& rows, const ResampleAxis& cols,
                           const ImagePlane& plane);
// Exact adjoint of apply_separable with the same axes.
ImagePlane apply_separable_adjoint(const ResampleAxis& rows,
                                   const ResampleAxis& cols,
                                   const ImagePlane& plane);

}  // namespace cbpfa
