#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "objslam/symmetry.hpp"

namespace objslam {

namespace {

constexpr std::int64_t kNone = -1;

DistanceField empty_field(const EdgeMap& edges) {
  if (edges.edge_count() == 0) throw EmptyEdgeMapError();
  DistanceField f;
  f.x0 = edges.x0;
  f.y0 = edges.y0;
  f.width = edges.width;
  f.height = edges.height;
  const std::size_t n = static_cast<std::size_t>(edges.width) * edges.height;
  f.distance.assign(n, 0.0);
  f.nearest.assign(n, Eigen::Vector2i::Zero());
  return f;
}

// Rational a/b with b > 0, compared exactly by cross multiplication.
struct Fraction {
  std::int64_t num;
  std::int64_t den;
};

bool less_equal(const Fraction& a, const Fraction& b) { return a.num * b.den <= b.num * a.den; }

}  // namespace

DistanceField distance_transform_argmin(const EdgeMap& edges) {
  DistanceField field = empty_field(edges);
  const int w = edges.width;
  const int h = edges.height;

  // Column pass: vertical distance to, and row of, the nearest edge in each
  // column. Equidistant edges above and below resolve to the upper one.
  std::vector<std::int64_t> vdist(static_cast<std::size_t>(w) * h, kNone);
  std::vector<int> vrow(static_cast<std::size_t>(w) * h, -1);

#pragma omp parallel for schedule(static)
  for (int x = 0; x < w; ++x) {
    std::vector<int> above(h, -1);
    int last = -1;
    for (int y = 0; y < h; ++y) {
      if (edges.mask[static_cast<std::size_t>(y) * w + x]) last = y;
      above[y] = last;
    }
    int next = -1;
    for (int y = h - 1; y >= 0; --y) {
      if (edges.mask[static_cast<std::size_t>(y) * w + x]) next = y;
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const int a = above[y];
      if (a >= 0 && (next < 0 || y - a <= next - y)) {
        vdist[i] = y - a;
        vrow[i] = a;
      } else if (next >= 0) {
        vdist[i] = next - y;
        vrow[i] = next;
      }
    }
  }

  // Row pass: lower envelope of parabolas (x - j)^2 + g_j^2 gives the exact
  // squared distance; a scan over the tied columns then applies the
  // (row, column) tie rule.
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * w;
    std::vector<int> v(w);
    std::vector<Fraction> z(w + 1);
    int k = -1;
    auto f = [&](int j) { return vdist[row + j] * vdist[row + j]; };
    for (int q = 0; q < w; ++q) {
      if (vdist[row + q] == kNone) continue;
      if (k < 0) {
        k = 0;
        v[0] = q;
        continue;
      }
      Fraction s{};
      while (true) {
        const int p = v[k];
        s = {f(q) + std::int64_t(q) * q - f(p) - std::int64_t(p) * p, 2 * std::int64_t(q - p)};
        if (k > 0 && less_equal(s, z[k])) {
          --k;
          continue;
        }
        break;
      }
      ++k;
      v[k] = q;
      z[k] = s;
    }

    int seg = 0;
    for (int x = 0; x < w; ++x) {
      while (seg < k && less_equal(z[seg + 1], Fraction{x, 1})) ++seg;
      const int j0 = v[seg];
      const std::int64_t d2 = std::int64_t(x - j0) * (x - j0) + f(j0);
      const int radius = static_cast<int>(std::sqrt(static_cast<double>(d2))) + 1;
      int best_row = std::numeric_limits<int>::max();
      int best_col = std::numeric_limits<int>::max();
      for (int j = std::max(0, x - radius); j <= std::min(w - 1, x + radius); ++j) {
        if (vdist[row + j] == kNone) continue;
        if (std::int64_t(x - j) * (x - j) + f(j) != d2) continue;
        const int r = vrow[row + j];
        if (r < best_row || (r == best_row && j < best_col)) {
          best_row = r;
          best_col = j;
        }
      }
      field.distance[row + x] = std::sqrt(static_cast<double>(d2));
      field.nearest[row + x] = {edges.x0 + best_col, edges.y0 + best_row};
    }
  }
  return field;
}

DistanceField distance_transform_brute(const EdgeMap& edges) {
  DistanceField field = empty_field(edges);
  std::vector<Eigen::Vector2i> points;
  for (int y = 0; y < edges.height; ++y) {
    for (int x = 0; x < edges.width; ++x) {
      if (edges.mask[static_cast<std::size_t>(y) * edges.width + x]) points.emplace_back(x, y);
    }
  }
  for (int y = 0; y < edges.height; ++y) {
    for (int x = 0; x < edges.width; ++x) {
      std::int64_t best = std::numeric_limits<std::int64_t>::max();
      Eigen::Vector2i arg = points.front();
      for (const auto& e : points) {
        const std::int64_t dx = e.x() - x;
        const std::int64_t dy = e.y() - y;
        const std::int64_t d2 = dx * dx + dy * dy;
        if (d2 < best) {
          best = d2;
          arg = e;
        }
      }
      const std::size_t i = static_cast<std::size_t>(y) * edges.width + x;
      field.distance[i] = std::sqrt(static_cast<double>(best));
      field.nearest[i] = {edges.x0 + arg.x(), edges.y0 + arg.y()};
    }
  }
  return field;
}

}  // namespace objslam
