#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cbpfa/rng.hpp"

namespace cbpfa::testsupport {

std::vector<int> hungarian_assignment(const Eigen::MatrixXd& cost) {
  // Classic potentials formulation on a padded square matrix.
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  if (n > m) throw std::invalid_argument("need rows <= cols");
  const double INF = std::numeric_limits<double>::infinity();

  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, INF);
    std::vector<char> used(m + 1, false);
    do {
      used[j0] = true;
      int i0 = p[j0], j1 = -1;
      double delta = INF;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  std::vector<int> assignment(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] > 0) assignment[p[j] - 1] = j - 1;
  return assignment;
}

double mean_matched_abs_cosine(const Eigen::MatrixXd& truth,
                               const Eigen::MatrixXd& learned) {
  const Eigen::Index kt = truth.cols();
  const Eigen::Index kl = learned.cols();
  Eigen::MatrixXd cost(kt, kl);
  for (Eigen::Index a = 0; a < kt; ++a) {
    double na = truth.col(a).norm();
    for (Eigen::Index b = 0; b < kl; ++b) {
      double nb = learned.col(b).norm();
      double cos = (na > 0 && nb > 0)
                       ? std::abs(truth.col(a).dot(learned.col(b))) / (na * nb)
                       : 0.0;
      cost(a, b) = 1.0 - cos;
    }
  }
  std::vector<int> match = hungarian_assignment(cost);
  double total = 0.0;
  for (Eigen::Index a = 0; a < kt; ++a)
    total += 1.0 - cost(a, match[static_cast<std::size_t>(a)]);
  return total / static_cast<double>(kt);
}

ImagePlane synthetic_scene(int width, int height, std::uint64_t seed) {
  Rng rng(seed, 0);

  double base = 40.0 + 120.0 * rng.uniform();
  double gx = -0.8 + 1.6 * rng.uniform();
  double gy = -0.8 + 1.6 * rng.uniform();
  ImagePlane img(width, height);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) img.at(r, c) = base + gx * c + gy * r;

  int shapes = 6 + static_cast<int>(rng.next_u32() % 5);
  for (int s = 0; s < shapes; ++s) {
    double level = 20.0 + 215.0 * rng.uniform();
    int kind = static_cast<int>(rng.next_u32() % 3);
    if (kind == 0) {  // ellipse
      double cx = width * rng.uniform();
      double cy = height * rng.uniform();
      double rx = 3.0 + 0.25 * width * rng.uniform();
      double ry = 3.0 + 0.25 * height * rng.uniform();
      for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
          double dx = (c - cx) / rx, dy = (r - cy) / ry;
          if (dx * dx + dy * dy <= 1.0) img.at(r, c) = level;
        }
    } else if (kind == 1) {  // rectangle
      int x0 = static_cast<int>(width * rng.uniform());
      int y0 = static_cast<int>(height * rng.uniform());
      int w = 4 + static_cast<int>(rng.next_u32() % (width / 3 + 1));
      int h = 4 + static_cast<int>(rng.next_u32() % (height / 3 + 1));
      for (int r = y0; r < std::min(height, y0 + h); ++r)
        for (int c = x0; c < std::min(width, x0 + w); ++c)
          img.at(r, c) = level;
    } else {  // oriented bar
      double cx = width * rng.uniform();
      double cy = height * rng.uniform();
      double angle = 6.283185307179586 * rng.uniform();
      double nx = std::cos(angle), ny = std::sin(angle);
      double half = 1.0 + 2.5 * rng.uniform();
      for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
          double d = (c - cx) * nx + (r - cy) * ny;
          if (std::abs(d) <= half) img.at(r, c) = level;
        }
    }
  }

  // Light 3x3 blur so edges are not perfectly aliased, then clamp.
  ImagePlane out(width, height);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      double acc = 0.0, wsum = 0.0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          int rr = std::clamp(r + dr, 0, height - 1);
          int cc = std::clamp(c + dc, 0, width - 1);
          double w = (dr == 0 && dc == 0) ? 4.0 : ((dr == 0 || dc == 0) ? 2.0 : 1.0);
          acc += w * img.at(rr, cc);
          wsum += w;
        }
      }
      out.at(r, c) = acc / wsum;
    }
  }
  out.clamp_range();
  return out;
}

}  // namespace cbpfa::testsupport
