#include "cbpfa/patches.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

#include "cbpfa/resample.hpp"
#include "cbpfa/rng.hpp"
#include "cbpfa/threading.hpp"

namespace cbpfa {

namespace {

std::vector<std::pair<int, int>> patch_grid(int width, int height,
                                            int patch_size, int stride) {
  if (patch_size < 1 || patch_size > std::min(width, height))
    throw std::invalid_argument("patch size " + std::to_string(patch_size) +
                                " does not fit a " + std::to_string(width) +
                                "x" + std::to_string(height) + " plane");
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  // Regular grid plus a clamped final origin per axis, so the patch set
  // always covers the whole plane.
  auto axis = [&](int size) {
    std::vector<int> origins;
    for (int o = 0; o + patch_size <= size; o += stride) origins.push_back(o);
    if (origins.back() + patch_size < size) origins.push_back(size - patch_size);
    return origins;
  };
  std::vector<int> row_origins = axis(height);
  std::vector<int> col_origins = axis(width);
  std::vector<std::pair<int, int>> coords;
  coords.reserve(row_origins.size() * col_origins.size());
  for (int r : row_origins)
    for (int c : col_origins) coords.emplace_back(r, c);
  return coords;
}

void copy_patch(const ImagePlane& plane, int row, int col, int patch_size,
                double* dst) {
  for (int r = 0; r < patch_size; ++r)
    for (int c = 0; c < patch_size; ++c)
      dst[r * patch_size + c] = plane.at(row + r, col + c);
}

}  // namespace

PatchMatrix extract_patches(const ImagePlane& plane, int patch_size,
                            int stride) {
  PatchMatrix out;
  out.patch_size = patch_size;
  out.stride = stride;
  out.coords = patch_grid(plane.width, plane.height, patch_size, stride);
  out.data.resize(static_cast<Eigen::Index>(patch_size) * patch_size,
                  static_cast<Eigen::Index>(out.coords.size()));
  parallel_for(0, out.coords.size(), [&](std::size_t i) {
    auto [r, c] = out.coords[i];
    copy_patch(plane, r, c, patch_size,
               out.data.col(static_cast<Eigen::Index>(i)).data());
  });
  return out;
}

PatchMatrix build_coupled_patches(const ImagePlane& hr, int ratio,
                                  int patch_size, int stride) {
  ImagePlane lr =
      resize_bicubic(downsample(hr, ratio), hr.width, hr.height);

  PatchMatrix out;
  out.patch_size = patch_size;
  out.stride = stride;
  out.coords = patch_grid(hr.width, hr.height, patch_size, stride);
  Eigen::Index p = static_cast<Eigen::Index>(patch_size) * patch_size;
  out.data.resize(2 * p, static_cast<Eigen::Index>(out.coords.size()));
  parallel_for(0, out.coords.size(), [&](std::size_t i) {
    auto [r, c] = out.coords[i];
    auto col = out.data.col(static_cast<Eigen::Index>(i));
    copy_patch(lr, r, c, patch_size, col.data());
    copy_patch(hr, r, c, patch_size, col.data() + p);
    // Remove the LR DC level from both halves; it is re-derivable at
    // synthesis time from the observed LR patch.
    double mean = col.head(p).mean();
    col.array() -= mean;
  });
  return out;
}

ImagePlane reassemble(const PatchMatrix& patches, int width, int height) {
  ImagePlane sum(width, height, 0.0);
  std::vector<std::uint32_t> hits(sum.size(), 0);
  int p = patches.patch_size;
  if (patches.dim() != static_cast<Eigen::Index>(p) * p)
    throw std::invalid_argument(
        "reassemble expects single-scale patches (dim = patch_size^2)");
  for (Eigen::Index i = 0; i < patches.count(); ++i) {
    auto [row, col] = patches.coords[static_cast<std::size_t>(i)];
    if (row < 0 || col < 0 || row + p > height || col + p > width)
      throw std::invalid_argument("patch " + std::to_string(i) +
                                  " at (" + std::to_string(row) + "," +
                                  std::to_string(col) + ") out of bounds");
    const double* src = patches.data.col(i).data();
    for (int r = 0; r < p; ++r) {
      for (int c = 0; c < p; ++c) {
        std::size_t idx = static_cast<std::size_t>(row + r) * width + col + c;
        sum.data[idx] += src[r * p + c];
        ++hits[idx];
      }
    }
  }
  for (std::size_t i = 0; i < sum.size(); ++i) {
    if (hits[i] == 0)
      throw std::invalid_argument(
          "pixel (" + std::to_string(i / width) + "," +
          std::to_string(i % width) + ") covered by no patch");
    sum.data[i] /= hits[i];
  }
  sum.clamp_range();
  return sum;
}

PatchMatrix subsample_columns(const PatchMatrix& patches,
                              Eigen::Index max_count, std::uint64_t seed) {
  if (patches.count() <= max_count) return patches;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(patches.count()));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed, 0);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::size_t j = static_cast<std::size_t>(rng.next_u64() % (i + 1));
    std::swap(order[i], order[j]);
  }
  order.resize(static_cast<std::size_t>(max_count));
  std::sort(order.begin(), order.end());

  PatchMatrix out;
  out.patch_size = patches.patch_size;
  out.stride = patches.stride;
  out.data.resize(patches.dim(), max_count);
  out.coords.reserve(order.size());
  for (Eigen::Index i = 0; i < max_count; ++i) {
    out.data.col(i) = patches.data.col(order[static_cast<std::size_t>(i)]);
    out.coords.push_back(
        patches.coords[static_cast<std::size_t>(order[i])]);
  }
  return out;
}

PatchMatrix concat_patches(const std::vector<PatchMatrix>& parts) {
  if (parts.empty()) throw std::invalid_argument("no patch matrices given");
  Eigen::Index dim = parts.front().dim();
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    if (p.dim() != dim)
      throw std::invalid_argument("patch matrices disagree on dimension");
    total += p.count();
  }
  PatchMatrix out;
  out.patch_size = parts.front().patch_size;
  out.stride = parts.front().stride;
  out.data.resize(dim, total);
  out.coords.reserve(static_cast<std::size_t>(total));
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.data.middleCols(at, p.count()) = p.data;
    out.coords.insert(out.coords.end(), p.coords.begin(), p.coords.end());
    at += p.count();
  }
  return out;
}

}  // namespace cbpfa
