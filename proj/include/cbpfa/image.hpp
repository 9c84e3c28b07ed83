#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cbpfa {

struct ImageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One real-valued channel, row-major, intensities nominally in [0, 255].
struct ImagePlane {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  ImagePlane() = default;
  ImagePlane(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int row, int col) {
    return data[static_cast<std::size_t>(row) * width + col];
  }
  double at(int row, int col) const {
    return data[static_cast<std::size_t>(row) * width + col];
  }
  std::size_t size() const { return data.size(); }

  void clamp_range();                 // clamp every value into [0, 255]
  ImagePlane cropped(int w, int h) const;  // keep the top-left w x h region
};

struct YCbCrImage {
  ImagePlane y;
  ImagePlane cb;
  ImagePlane cr;

  int width() const { return y.width; }
  int height() const { return y.height; }
};

// BT.601 in both directions. Forward takes integer-valued RGB samples;
// the inverse is the exact algebraic inverse of the forward matrix.
void rgb_to_ycbcr(double r, double g, double b, double& y, double& cb,
                  double& cr);
void ycbcr_to_rgb(double y, double cb, double cr, double& r, double& g,
                  double& b);

// Round half-up, then clamp to [0, 255]. The only place real intensities
// become file bytes.
std::uint8_t quantize_pixel(double v);

// Decoders for 8-bit PNG (gray/RGB), binary PGM (P5), and 24-bit BMP.
// Grayscale sources produce constant-128 chroma planes.
YCbCrImage load_image(const std::string& path);

// Encoder; the container is picked from the extension (.png/.pgm/.bmp).
// PGM stores the luma plane only.
void save_image(const std::string& path, const YCbCrImage& img);

// Single-plane convenience used by tests and the downscale tool.
void save_plane(const std::string& path, const ImagePlane& plane);

}  // namespace cbpfa
