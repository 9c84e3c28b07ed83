#include "cbpfa/image.hpp"

#include <algorithm>
#include <cmath>

namespace cbpfa {

void ImagePlane::clamp_range() {
  for (double& v : data) v = std::clamp(v, 0.0, 255.0);
}

ImagePlane ImagePlane::cropped(int w, int h) const {
  if (w > width || h > height)
    throw ImageError("crop larger than source plane");
  ImagePlane out(w, h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) out.at(r, c) = at(r, c);
  return out;
}

namespace {

// Forward BT.601 matrix acting on [R,G,B] -> [Y, Cb-128, Cr-128],
// coefficients exactly as published.
constexpr double kFwd[3][3] = {
    {0.299, 0.587, 0.114},
    {-0.168736, -0.331264, 0.5},
    {0.5, -0.418688, -0.081312},
};

struct Inverse3x3 {
  double m[3][3];
  Inverse3x3() {
    const auto& a = kFwd;
    double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                 a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                 a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    m[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det;
    m[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det;
    m[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det;
    m[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / det;
    m[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det;
    m[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det;
    m[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / det;
    m[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det;
    m[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det;
  }
};

const Inverse3x3 kInv;

}  // namespace

void rgb_to_ycbcr(double r, double g, double b, double& y, double& cb,
                  double& cr) {
  y = kFwd[0][0] * r + kFwd[0][1] * g + kFwd[0][2] * b;
  cb = 128.0 + kFwd[1][0] * r + kFwd[1][1] * g + kFwd[1][2] * b;
  cr = 128.0 + kFwd[2][0] * r + kFwd[2][1] * g + kFwd[2][2] * b;
}

void ycbcr_to_rgb(double y, double cb, double cr, double& r, double& g,
                  double& b) {
  double pb = cb - 128.0;
  double pr = cr - 128.0;
  r = kInv.m[0][0] * y + kInv.m[0][1] * pb + kInv.m[0][2] * pr;
  g = kInv.m[1][0] * y + kInv.m[1][1] * pb + kInv.m[1][2] * pr;
  b = kInv.m[2][0] * y + kInv.m[2][1] * pb + kInv.m[2][2] * pr;
}

std::uint8_t quantize_pixel(double v) {
  double rounded = std::floor(v + 0.5);
  if (rounded < 0.0) return 0;
  if (rounded > 255.0) return 255;
  return static_cast<std::uint8_t>(rounded);
}

}  // namespace cbpfa
