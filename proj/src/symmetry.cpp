#include "objslam/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace objslam {

double GrayImage::clamped(int x, int y) const {
  return at(std::clamp(x, 0, width - 1), std::clamp(y, 0, height - 1));
}

std::size_t EdgeMap::edge_count() const {
  return static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](auto m) { return m != 0; }));
}

PixelWindow clip_window(const BBox& bbox, int image_width, int image_height) {
  const int x0 = std::max(0, static_cast<int>(std::floor(bbox.x_min)));
  const int y0 = std::max(0, static_cast<int>(std::floor(bbox.y_min)));
  const int x1 = std::min(image_width - 1, static_cast<int>(std::ceil(bbox.x_max)));
  const int y1 = std::min(image_height - 1, static_cast<int>(std::ceil(bbox.y_max)));
  if (x1 < x0 || y1 < y0) throw PreconditionError("bbox window lies outside the image");
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

Vec2 DistanceField::nearest_edge(const Vec2& u) const {
  const int x = std::clamp(static_cast<int>(std::lround(u.x())), x0, x0 + width - 1);
  const int y = std::clamp(static_cast<int>(std::lround(u.y())), y0, y0 + height - 1);
  Eigen::Vector2i best = nearest_at(x, y);
  if (u.x() == x && u.y() == y) return best.cast<double>();
  double best_d = (best.cast<double>() - u).squaredNorm();
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const int xx = x + dx;
      const int yy = y + dy;
      if (xx < x0 || yy < y0 || xx >= x0 + width || yy >= y0 + height) continue;
      const Eigen::Vector2i c = nearest_at(xx, yy);
      const double d = (c.cast<double>() - u).squaredNorm();
      if (d < best_d || (d == best_d && (c.y() < best.y() || (c.y() == best.y() && c.x() < best.x())))) {
        best = c;
        best_d = d;
      }
    }
  }
  return best.cast<double>();
}

namespace {

Vec2 central_gradient(const GrayImage& image, int x, int y) {
  return {0.5 * (image.clamped(x + 1, y) - image.clamped(x - 1, y)),
          0.5 * (image.clamped(x, y + 1) - image.clamped(x, y - 1))};
}

GrayImage window_gray(const GrayImage& image, const PixelWindow& win) {
  GrayImage out(win.width, win.height);
  for (int y = 0; y < win.height; ++y) {
    for (int x = 0; x < win.width; ++x) out.at(x, y) = image.at(win.x0 + x, win.y0 + y);
  }
  return out;
}

double bilinear(const std::vector<double>& values, int width, int height, double x, double y) {
  x = std::clamp(x, 0.0, double(width - 1));
  y = std::clamp(y, 0.0, double(height - 1));
  const int ix = std::min(static_cast<int>(std::floor(x)), width - 1);
  const int iy = std::min(static_cast<int>(std::floor(y)), height - 1);
  const int jx = std::min(ix + 1, width - 1);
  const int jy = std::min(iy + 1, height - 1);
  const double fx = x - ix;
  const double fy = y - iy;
  auto at = [&](int xx, int yy) { return values[static_cast<std::size_t>(yy) * width + xx]; };
  return (1 - fy) * ((1 - fx) * at(ix, iy) + fx * at(jx, iy)) +
         fy * ((1 - fx) * at(ix, jy) + fx * at(jx, jy));
}

}  // namespace

EdgeMap build_edge_map(const GrayImage& image, const BBox& bbox, double threshold) {
  const PixelWindow win = clip_window(bbox, image.width, image.height);
  EdgeMap edges(win.x0, win.y0, win.width, win.height);
  std::vector<double> magnitude(edges.mask.size());
  double max_mag = 0.0;
  for (int y = 0; y < win.height; ++y) {
    for (int x = 0; x < win.width; ++x) {
      const double m = central_gradient(image, win.x0 + x, win.y0 + y).norm();
      magnitude[static_cast<std::size_t>(y) * win.width + x] = m;
      max_mag = std::max(max_mag, m);
    }
  }
  const double cut = threshold * max_mag;
  for (std::size_t i = 0; i < magnitude.size(); ++i) edges.mask[i] = magnitude[i] > cut ? 1 : 0;
  if (edges.edge_count() == 0) throw EmptyEdgeMapError();
  edges.gray = window_gray(image, win).pixels;
  return edges;
}

EdgeMap edge_map_from_raster(const GrayImage& raster, const BBox& bbox) {
  const PixelWindow win = clip_window(bbox, raster.width, raster.height);
  EdgeMap edges(win.x0, win.y0, win.width, win.height);
  for (int y = 0; y < win.height; ++y) {
    for (int x = 0; x < win.width; ++x) {
      edges.mask[static_cast<std::size_t>(y) * win.width + x] =
          raster.at(win.x0 + x, win.y0 + y) >= 128.0 ? 1 : 0;
    }
  }
  edges.gray = window_gray(raster, win).pixels;
  return edges;
}

double beta_2dt(const Vec2& u, const DistanceField& field) {
  return bilinear(field.distance, field.width, field.height, u.x() - field.x0, u.y() - field.y0);
}

double beta_gray(const Vec2& u, const EdgeMap& edges) {
  if (!edges.has_gray()) throw MissingGrayError();
  return bilinear(edges.gray, edges.width, edges.height, u.x() - edges.x0, u.y() - edges.y0);
}

std::optional<double> beta_3dt(const Vec2& u, const DistanceField& field,
                               const ProjectionMatrix& p, const Ellipsoid& e) {
  const auto v = raycast_ellipsoid(u, p, e);
  if (!v) return std::nullopt;
  const auto ve = raycast_ellipsoid(field.nearest_edge(u), p, e);
  if (!ve) return std::nullopt;
  return (*ve - *v).norm();
}

std::size_t SampleSet::count(SampleKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [&](const Sample& s) { return s.kind == kind; }));
}

SampleSet sample_points(const BBox& bbox, const EdgeMap& edges, int n_uniform,
                        double corner_quality, int max_corners) {
  SampleSet out;
  const int w = edges.width;
  const int h = edges.height;

  // Structure-tensor response on the gray channel, or on the binary mask.
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      img.at(x, y) = edges.has_gray() ? edges.gray[i] : (edges.mask[i] ? 255.0 : 0.0);
    }
  }
  std::vector<Vec2> grad(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) grad[static_cast<std::size_t>(y) * w + x] = central_gradient(img, x, y);
  }
  std::vector<double> response(grad.size(), 0.0);
  double max_response = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sxx = 0, syy = 0, sxy = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = std::clamp(x + dx, 0, w - 1);
          const int yy = std::clamp(y + dy, 0, h - 1);
          const Vec2& g = grad[static_cast<std::size_t>(yy) * w + xx];
          sxx += g.x() * g.x();
          syy += g.y() * g.y();
          sxy += g.x() * g.y();
        }
      }
      const double half_trace = 0.5 * (sxx + syy);
      const double r = half_trace - std::sqrt(0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy);
      response[static_cast<std::size_t>(y) * w + x] = r;
      max_response = std::max(max_response, r);
    }
  }

  struct Candidate {
    double value;
    std::size_t order;
    Vec2 pixel;
  };
  std::vector<Candidate> corners;
  if (max_response > 1e-12 && max_corners > 0) {
    const double cut = corner_quality * max_response;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const double r = response[i];
        if (r <= cut || r <= 1e-12) continue;
        bool is_max = true;
        for (int dy = -1; dy <= 1 && is_max; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const int xx = x + dx;
            const int yy = y + dy;
            if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
            const std::size_t j = static_cast<std::size_t>(yy) * w + xx;
            // Plateaus keep their first pixel in scan order.
            if (response[j] > r || (response[j] == r && j < i)) {
              is_max = false;
              break;
            }
          }
        }
        const Vec2 pixel(edges.x0 + x, edges.y0 + y);
        if (is_max && bbox.contains(pixel)) corners.push_back({r, i, pixel});
      }
    }
    std::stable_sort(corners.begin(), corners.end(),
                     [](const Candidate& a, const Candidate& b) { return a.value > b.value; });
    if (corners.size() > static_cast<std::size_t>(max_corners)) corners.resize(max_corners);
  }
  for (const auto& c : corners) out.samples.push_back({c.pixel, SampleKind::Corner});

  if (n_uniform > 0) {
    const int cols = static_cast<int>(std::ceil(std::sqrt(double(n_uniform))));
    const int rows = (n_uniform + cols - 1) / cols;
    int placed = 0;
    for (int r = 0; r < rows && placed < n_uniform; ++r) {
      for (int c = 0; c < cols && placed < n_uniform; ++c, ++placed) {
        const double x = bbox.x_min + (c + 0.5) / cols * bbox.width();
        const double y = bbox.y_min + (r + 0.5) / rows * bbox.height();
        out.samples.push_back({Vec2(x, y), SampleKind::Uniform});
      }
    }
  }
  return out;
}

namespace {

struct PairTerms {
  Vec3 v;
  Vec3 v_sym;
  Vec2 u_sym;
};

// |cos| of the angle between the surface normal at v and the viewing ray.
double incidence_cos(const Vec3& v, const ProjectionMatrix& p, const Ellipsoid& e) {
  const Vec3 local = e.rotation.transpose() * (v - e.center);
  const Vec3 normal = (e.rotation * local.cwiseQuotient(e.half_axes.cwiseAbs2())).normalized();
  return std::abs(normal.dot((p.center() - v).normalized()));
}

// Shared validity rule for every descriptor: the sample must hit the
// surface, its mirror must be camera-facing (when requested) and project
// inside the field window.
std::optional<PairTerms> pair_for(const Vec2& u, const DistanceField& field,
                                  const ProjectionMatrix& p, const Ellipsoid& e,
                                  const SymmetryOptions& opts) {
  const auto v = raycast_ellipsoid(u, p, e);
  if (!v) return std::nullopt;
  const Vec3 vs = reflect_point(*v, e);
  if (opts.skip_back_facing && !is_front_facing(vs, p, e)) return std::nullopt;
  if (!(p.depth(vs) > 0.0)) return std::nullopt;
  const Vec2 us = p.project(vs);
  if (!field.contains(us)) return std::nullopt;
  if (opts.max_incidence_deg < 90.0) {
    const double min_cos = std::cos(opts.max_incidence_deg * std::numbers::pi / 180.0);
    if (incidence_cos(*v, p, e) < min_cos || incidence_cos(vs, p, e) < min_cos) return std::nullopt;
  }
  return PairTerms{*v, vs, us};
}

std::optional<double> improved_dt_difference(const Vec2& u, const DistanceField& field,
                                             const ProjectionMatrix& p, const Ellipsoid& e,
                                             const SymmetryOptions& opts) {
  const auto pair = pair_for(u, field, p, e, opts);
  if (!pair) return std::nullopt;
  const auto ve = raycast_tangent_plane(field.nearest_edge(u), p, e, pair->v);
  if (!ve) return std::nullopt;
  const auto vse = raycast_tangent_plane(field.nearest_edge(pair->u_sym), p, e, pair->v_sym);
  if (!vse) return std::nullopt;
  return (*ve - pair->v).norm() - (*vse - pair->v_sym).norm();
}

}  // namespace

int symmetry_residuals(const Ellipsoid& e, const SampleSet& samples, const DistanceField& field,
                       const ProjectionMatrix& p, const SymmetryOptions& opts,
                       Eigen::Ref<Eigen::VectorXd> out) {
  out.setZero();
  int valid = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto d = improved_dt_difference(samples.samples[i].pixel, field, p, e, opts);
    if (!d) continue;
    out(static_cast<Eigen::Index>(i)) = *d;
    ++valid;
  }
  if (valid > 0 && valid < opts.min_valid_fraction * double(samples.size())) {
    out.setZero();
    valid = 0;
  }
  double scale = 1.0 / opts.sigma_sym;
  if (opts.normalize && valid > 0) scale /= std::sqrt(double(valid));
  out *= scale;
  return valid;
}

std::optional<double> symmetry_cost(const Ellipsoid& e, const SampleSet& samples,
                                    const DistanceField& field, const ProjectionMatrix& p,
                                    const SymmetryOptions& opts) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(samples.size()));
  if (symmetry_residuals(e, samples, field, p, opts, r) == 0) return std::nullopt;
  return r.squaredNorm();
}

std::optional<double> descriptor_cost(Descriptor descriptor, const Ellipsoid& e,
                                      const SampleSet& samples, const EdgeMap& edges,
                                      const DistanceField& field, const ProjectionMatrix& p,
                                      const SymmetryOptions& opts) {
  if (descriptor == Descriptor::ImprovedDT) return symmetry_cost(e, samples, field, p, opts);
  double sum = 0.0;
  int valid = 0;
  for (const auto& s : samples.samples) {
    const auto pair = pair_for(s.pixel, field, p, e, opts);
    if (!pair) continue;
    const double d = descriptor == Descriptor::Gray
                         ? beta_gray(s.pixel, edges) - beta_gray(pair->u_sym, edges)
                         : beta_2dt(s.pixel, field) - beta_2dt(pair->u_sym, field);
    sum += d * d;
    ++valid;
  }
  if (valid == 0 || valid < opts.min_valid_fraction * double(samples.size())) return std::nullopt;
  if (opts.normalize) sum /= valid;
  return sum / (opts.sigma_sym * opts.sigma_sym);
}

}  // namespace objslam
