#include "cbpfa/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "cbpfa/resample.hpp"
#include "cbpfa/threading.hpp"

namespace cbpfa {

PsnrResult psnr(const ImagePlane& a, const ImagePlane& b) {
  if (a.width != b.width || a.height != b.height)
    throw ImageError("psnr: plane dimensions differ (" +
                     std::to_string(a.width) + "x" + std::to_string(a.height) +
                     " vs " + std::to_string(b.width) + "x" +
                     std::to_string(b.height) + ")");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a.data[i] - b.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  PsnrResult out;
  if (mse == 0.0) {
    out.identical = true;
    return out;
  }
  out.db = 10.0 * std::log10(255.0 * 255.0 / mse);
  return out;
}

UpscaleMethod parse_upscale_method(const std::string& name) {
  if (name == "nearest") return UpscaleMethod::kNearest;
  if (name == "bilinear") return UpscaleMethod::kBilinear;
  if (name == "bicubic") return UpscaleMethod::kBicubic;
  throw ImageError("unknown upscale method: " + name);
}

std::string upscale_method_name(UpscaleMethod m) {
  switch (m) {
    case UpscaleMethod::kNearest: return "nearest";
    case UpscaleMethod::kBilinear: return "bilinear";
    case UpscaleMethod::kBicubic: return "bicubic";
  }
  return "?";
}

ImagePlane baseline_upscale(const ImagePlane& lr, int ratio,
                            UpscaleMethod method) {
  if (ratio < 2) throw ImageError("upscale ratio must be >= 2");
  int w = lr.width * ratio;
  int h = lr.height * ratio;
  switch (method) {
    case UpscaleMethod::kNearest: return resize_nearest(lr, w, h);
    case UpscaleMethod::kBilinear: return resize_bilinear(lr, w, h);
    case UpscaleMethod::kBicubic: return resize_bicubic(lr, w, h);
  }
  throw ImageError("unknown upscale method");
}

namespace {

std::string format_psnr(const PsnrResult& p) {
  if (p.identical) return "identical";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", p.db);
  return buf;
}

ImagePlane shave(const ImagePlane& p, int border) {
  if (border <= 0 || p.width <= 2 * border || p.height <= 2 * border)
    return p;
  ImagePlane out(p.width - 2 * border, p.height - 2 * border);
  for (int r = 0; r < out.height; ++r)
    for (int c = 0; c < out.width; ++c)
      out.at(r, c) = p.at(r + border, c + border);
  return out;
}

}  // namespace

std::string BenchmarkReport::to_csv() const {
  std::ostringstream os;
  os << "image,method,psnr_db,seconds\n";
  for (const auto& row : rows) {
    char sec[32];
    std::snprintf(sec, sizeof(sec), "%.3f", row.seconds);
    os << row.image << "," << row.method << "," << format_psnr(row.psnr)
       << "," << sec << "\n";
  }
  return os.str();
}

std::string BenchmarkReport::to_table() const {
  std::size_t name_w = 5;
  std::size_t method_w = 6;
  for (const auto& row : rows) {
    name_w = std::max(name_w, row.image.size());
    method_w = std::max(method_w, row.method.size());
  }
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-*s  %-*s  %10s  %8s\n",
                static_cast<int>(name_w), "image", static_cast<int>(method_w),
                "method", "psnr_db", "seconds");
  os << buf;
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%-*s  %-*s  %10s  %8.3f\n",
                  static_cast<int>(name_w), row.image.c_str(),
                  static_cast<int>(method_w), row.method.c_str(),
                  format_psnr(row.psnr).c_str(), row.seconds);
    os << buf;
  }
  return os.str();
}

BenchmarkReport run_benchmark(const std::vector<std::string>& image_paths,
                              const PosteriorEstimate* model,
                              const BenchmarkConfig& cfg) {
  if (image_paths.empty())
    throw ImageError("benchmark needs at least one image");

  struct PerImage {
    std::vector<BenchmarkRow> rows;
    bool failed = false;
  };
  std::vector<PerImage> results(image_paths.size());

  parallel_for(0, image_paths.size(), [&](std::size_t idx) {
    PerImage& slot = results[idx];
    const std::string& path = image_paths[idx];
    std::string name = std::filesystem::path(path).filename().string();
    YCbCrImage truth;
    try {
      truth = load_image(path);
    } catch (const std::exception& ex) {
      std::fprintf(stderr, "warning: skipping %s: %s\n", path.c_str(),
                   ex.what());
      slot.failed = true;
      return;
    }

    int ratio = cfg.sr_ratio;
    int w = truth.width() - truth.width() % ratio;
    int h = truth.height() - truth.height() % ratio;
    if (w < ratio || h < ratio) {
      std::fprintf(stderr, "warning: skipping %s: too small for ratio %d\n",
                   path.c_str(), ratio);
      slot.failed = true;
      return;
    }
    ImagePlane gt_y = truth.y.cropped(w, h);
    ImagePlane lr_y = downsample(gt_y, ratio);
    int border = cfg.shave_border ? cfg.sr.patch_size : 0;
    ImagePlane gt_scored = shave(gt_y, border);

    for (const std::string& method : cfg.methods) {
      auto start = std::chrono::steady_clock::now();
      ImagePlane up;
      if (method == "bp") {
        if (model == nullptr)
          throw ImageError("method 'bp' needs a trained model");
        YCbCrImage lr_img;
        lr_img.y = lr_y;
        lr_img.cb = ImagePlane(lr_y.width, lr_y.height, 128.0);
        lr_img.cr = ImagePlane(lr_y.width, lr_y.height, 128.0);
        up = super_resolve(lr_img, *model, cfg.sr).y;
      } else {
        up = baseline_upscale(lr_y, ratio, parse_upscale_method(method));
      }
      double secs = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - start)
                        .count();
      BenchmarkRow row;
      row.image = name;
      row.method = method;
      row.psnr = psnr(gt_scored, shave(up, border));
      row.seconds = secs;
      slot.rows.push_back(std::move(row));
    }
  }, 1);

  BenchmarkReport report;
  for (auto& slot : results) {
    if (slot.failed) ++report.failed_images;
    for (auto& row : slot.rows) report.rows.push_back(std::move(row));
  }
  if (report.rows.empty())
    throw ImageError("no benchmark images could be processed");
  return report;
}

std::vector<std::string> list_image_files(const std::string& dir) {
  std::vector<std::string> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".pgm" || ext == ".bmp")
      out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace cbpfa
