#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cbpfa/image.hpp"
#include "cbpfa/model.hpp"
#include "cbpfa/super_resolve.hpp"

namespace cbpfa {

// 10 log10(255^2 / MSE). Identical planes report the sentinel instead of
// an infinite value.
struct PsnrResult {
  bool identical = false;
  double db = 0.0;
};

PsnrResult psnr(const ImagePlane& a, const ImagePlane& b);

enum class UpscaleMethod { kNearest, kBilinear, kBicubic };

UpscaleMethod parse_upscale_method(const std::string& name);
std::string upscale_method_name(UpscaleMethod m);

ImagePlane baseline_upscale(const ImagePlane& lr, int ratio,
                            UpscaleMethod method);

struct BenchmarkRow {
  std::string image;
  std::string method;
  PsnrResult psnr;
  double seconds = 0.0;
};

struct BenchmarkReport {
  std::vector<BenchmarkRow> rows;
  std::string model_id;
  int failed_images = 0;

  std::string to_csv() const;
  std::string to_table() const;
};

struct BenchmarkConfig {
  int sr_ratio = 2;
  std::vector<std::string> methods = {"nearest", "bilinear", "bicubic"};
  SRConfig sr;               // used when methods include "bp"
  bool shave_border = false; // crop patch_size pixels before PSNR
};

// For each ground-truth image: crop to a ratio-divisible size, form the
// LR input by bicubic reduction, upscale with every method, and score
// PSNR on the luma plane. Unreadable files are skipped with a warning
// and counted in failed_images.
BenchmarkReport run_benchmark(const std::vector<std::string>& image_paths,
                              const PosteriorEstimate* model,
                              const BenchmarkConfig& cfg);

// Sorted listing of the image files in a directory (.png/.pgm/.bmp).
std::vector<std::string> list_image_files(const std::string& dir);

}  // namespace cbpfa
