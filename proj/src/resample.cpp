#include "cbpfa/resample.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cbpfa {

namespace {

// Keys cubic convolution kernel with a = -0.5.
double cubic_kernel(double t) {
  t = std::fabs(t);
  if (t < 1.0) return (1.5 * t - 2.5) * t * t + 1.0;
  if (t < 2.0) return ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0;
  return 0.0;
}

}  // namespace

ResampleAxis bicubic_axis(int in_size, int out_size) {
  ResampleAxis axis;
  axis.in_size = in_size;
  axis.out_size = out_size;
  axis.taps.resize(out_size);

  // When reducing, stretch the kernel by the rate so it low-passes.
  double scale = static_cast<double>(in_size) / out_size;
  double support_scale = std::max(scale, 1.0);
  double radius = 2.0 * support_scale;

  for (int o = 0; o < out_size; ++o) {
    double center = (o + 0.5) * scale - 0.5;
    int lo = static_cast<int>(std::floor(center - radius)) + 1;
    int hi = static_cast<int>(std::floor(center + radius));
    auto& row = axis.taps[o];
    double total = 0.0;
    for (int j = lo; j <= hi; ++j) {
      double w = cubic_kernel((j - center) / support_scale);
      if (w == 0.0) continue;
      int src = std::clamp(j, 0, in_size - 1);
      row.emplace_back(src, w);
      total += w;
    }
    for (auto& [src, w] : row) w /= total;
    // Merge duplicate clamped-border taps so the adjoint stays sparse.
    std::sort(row.begin(), row.end());
    std::size_t out = 0;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (out > 0 && row[out - 1].first == row[i].first)
        row[out - 1].second += row[i].second;
      else
        row[out++] = row[i];
    }
    row.resize(out);
  }
  return axis;
}

ImagePlane apply_separable(const ResampleAxis& rows, const ResampleAxis& cols,
                           const ImagePlane& plane) {
  // Horizontal pass, then vertical.
  ImagePlane mid(cols.out_size, plane.height);
  for (int r = 0; r < plane.height; ++r) {
    for (int c = 0; c < cols.out_size; ++c) {
      double acc = 0.0;
      for (const auto& [src, w] : cols.taps[c]) acc += w * plane.at(r, src);
      mid.at(r, c) = acc;
    }
  }
  ImagePlane out(cols.out_size, rows.out_size);
  for (int r = 0; r < rows.out_size; ++r) {
    for (int c = 0; c < cols.out_size; ++c) {
      double acc = 0.0;
      for (const auto& [src, w] : rows.taps[r]) acc += w * mid.at(src, c);
      out.at(r, c) = acc;
    }
  }
  return out;
}

ImagePlane apply_separable_adjoint(const ResampleAxis& rows,
                                   const ResampleAxis& cols,
                                   const ImagePlane& plane) {
  ImagePlane mid(cols.out_size, rows.in_size, 0.0);
  for (int r = 0; r < rows.out_size; ++r) {
    for (const auto& [src, w] : rows.taps[r]) {
      for (int c = 0; c < cols.out_size; ++c)
        mid.at(src, c) += w * plane.at(r, c);
    }
  }
  ImagePlane out(cols.in_size, rows.in_size, 0.0);
  for (int c = 0; c < cols.out_size; ++c) {
    for (const auto& [src, w] : cols.taps[c]) {
      for (int r = 0; r < rows.in_size; ++r)
        out.at(r, src) += w * mid.at(r, c);
    }
  }
  return out;
}

ImagePlane resize_bicubic(const ImagePlane& plane, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1)
    throw std::invalid_argument("resize target must be at least 1x1");
  if (out_w == plane.width && out_h == plane.height) return plane;
  ImagePlane out = apply_separable(bicubic_axis(plane.height, out_h),
                                   bicubic_axis(plane.width, out_w), plane);
  out.clamp_range();
  return out;
}

ImagePlane downsample(const ImagePlane& plane, int ratio) {
  if (ratio < 2) throw std::invalid_argument("downsample ratio must be >= 2");
  if (plane.width % ratio != 0 || plane.height % ratio != 0)
    throw std::invalid_argument(
        "downsample: dimensions " + std::to_string(plane.width) + "x" +
        std::to_string(plane.height) + " not divisible by ratio " +
        std::to_string(ratio) + "; crop the plane first");
  ImagePlane out =
      apply_separable(bicubic_axis(plane.height, plane.height / ratio),
                      bicubic_axis(plane.width, plane.width / ratio), plane);
  out.clamp_range();
  return out;
}

ImagePlane resize_nearest(const ImagePlane& plane, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1)
    throw std::invalid_argument("resize target must be at least 1x1");
  ImagePlane out(out_w, out_h);
  double sx = static_cast<double>(plane.width) / out_w;
  double sy = static_cast<double>(plane.height) / out_h;
  for (int r = 0; r < out_h; ++r) {
    int src_r = std::min(static_cast<int>((r + 0.5) * sy), plane.height - 1);
    for (int c = 0; c < out_w; ++c) {
      int src_c = std::min(static_cast<int>((c + 0.5) * sx), plane.width - 1);
      out.at(r, c) = plane.at(src_r, src_c);
    }
  }
  return out;
}

ImagePlane resize_bilinear(const ImagePlane& plane, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1)
    throw std::invalid_argument("resize target must be at least 1x1");
  if (out_w == plane.width && out_h == plane.height) return plane;
  ImagePlane out(out_w, out_h);
  double sx = static_cast<double>(plane.width) / out_w;
  double sy = static_cast<double>(plane.height) / out_h;
  for (int r = 0; r < out_h; ++r) {
    double fy = (r + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    double wy = fy - y0;
    int y1 = std::clamp(y0 + 1, 0, plane.height - 1);
    y0 = std::clamp(y0, 0, plane.height - 1);
    for (int c = 0; c < out_w; ++c) {
      double fx = (c + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      double wx = fx - x0;
      int x1 = std::clamp(x0 + 1, 0, plane.width - 1);
      x0 = std::clamp(x0, 0, plane.width - 1);
      double top = (1.0 - wx) * plane.at(y0, x0) + wx * plane.at(y0, x1);
      double bot = (1.0 - wx) * plane.at(y1, x0) + wx * plane.at(y1, x1);
      out.at(r, c) = (1.0 - wy) * top + wy * bot;
    }
  }
  out.clamp_range();
  return out;
}

}  // namespace cbpfa
