#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "objslam/geometry.hpp"

namespace objslam {

/// Row-major grayscale raster.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, double fill = 0.0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  /// Pixel value with coordinates clamped to the raster.
  double clamped(int x, int y) const;
};

class EmptyEdgeMapError : public std::runtime_error {
 public:
  EmptyEdgeMapError() : std::runtime_error("empty edge map") {}
};

class MissingGrayError : public std::runtime_error {
 public:
  MissingGrayError() : std::runtime_error("baseline unavailable: edge map has no grayscale channel") {}
};

/// Edge pixels inside an integer window [x0, x0+width) x [y0, y0+height) of
/// an image. Coordinates passed to accessors are image coordinates.
struct EdgeMap {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> mask;
  std::vector<double> gray;  // empty when no grayscale channel

  EdgeMap() = default;
  EdgeMap(int x0_, int y0_, int w, int h)
      : x0(x0_), y0(y0_), width(w), height(h), mask(static_cast<std::size_t>(w) * h, 0) {}

  bool in_window(int x, int y) const {
    return x >= x0 && y >= y0 && x < x0 + width && y < y0 + height;
  }
  bool is_edge(int x, int y) const { return in_window(x, y) && mask[index(x, y)] != 0; }
  void set_edge(int x, int y, bool on = true) {
    if (in_window(x, y)) mask[index(x, y)] = on ? 1 : 0;
  }
  std::size_t edge_count() const;
  bool has_gray() const { return !gray.empty(); }
  BBox window() const {
    return {double(x0), double(y0), double(x0 + width - 1), double(y0 + height - 1)};
  }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y - y0) * width + (x - x0);
  }
};

/// Integer window covering `bbox` clipped to a width x height image.
/// Throws PreconditionError when the clipped window is empty.
struct PixelWindow {
  int x0, y0, width, height;
};
PixelWindow clip_window(const BBox& bbox, int image_width, int image_height);

/// Per-pixel Euclidean distance to the nearest edge pixel together with that
/// edge pixel's image coordinates.
struct DistanceField {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;
  std::vector<double> distance;
  std::vector<Eigen::Vector2i> nearest;

  bool contains(const Vec2& u) const {
    return u.x() >= x0 - 0.5 && u.y() >= y0 - 0.5 && u.x() < x0 + width - 0.5 &&
           u.y() < y0 + height - 0.5;
  }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y - y0) * width + (x - x0);
  }
  double distance_at(int x, int y) const { return distance[index(x, y)]; }
  Eigen::Vector2i nearest_at(int x, int y) const { return nearest[index(x, y)]; }
  /// Edge pixel closest to the sub-pixel point u, chosen among the stored
  /// nearest edges of the 3x3 pixels around it (u clamped into the window).
  /// Equals nearest_at for integer u.
  Vec2 nearest_edge(const Vec2& u) const;
};

/// Gradient-magnitude edges: pixels of the bbox window whose central-difference
/// gradient exceeds `threshold` times the window maximum. Throws
/// EmptyEdgeMapError when nothing is marked. The window keeps `image` as its
/// grayscale channel.
EdgeMap build_edge_map(const GrayImage& image, const BBox& bbox, double threshold);

/// Edge map read directly from a raster where values >= 128 mark edges. The
/// raster also becomes the grayscale channel.
EdgeMap edge_map_from_raster(const GrayImage& raster, const BBox& bbox);

/// Exact Euclidean distance transform with nearest-edge coordinates. Ties go to
/// the edge pixel with the smallest row, then the smallest column. Rows and
/// columns are processed in parallel. Requires at least one edge pixel.
DistanceField distance_transform_argmin(const EdgeMap& edges);

/// O(pixels x edges) scan with the same tie rule. Reference for tests.
DistanceField distance_transform_brute(const EdgeMap& edges);

/// Bilinear distance lookup; u is clamped into the window.
double beta_2dt(const Vec2& u, const DistanceField& field);

/// Bilinear grayscale lookup; throws MissingGrayError without a gray channel.
double beta_gray(const Vec2& u, const EdgeMap& edges);

/// |P^-1(u^E) - P^-1(u)| with exact raycasts; nullopt when either misses.
std::optional<double> beta_3dt(const Vec2& u, const DistanceField& field,
                               const ProjectionMatrix& p, const Ellipsoid& e);

enum class SampleKind { Corner, Uniform };

struct Sample {
  Vec2 pixel;
  SampleKind kind;
};

struct SampleSet {
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::size_t count(SampleKind kind) const;
};

/// Corner samples (local maxima of the structure-tensor minimum eigenvalue
/// above corner_quality x max, strongest first, at most max_corners) followed
/// by n_uniform points on a regular grid of cell centres inside the bbox.
SampleSet sample_points(const BBox& bbox, const EdgeMap& edges, int n_uniform,
                        double corner_quality, int max_corners = 16);

struct SymmetryOptions {
  double sigma_sym = 1.0;
  /// Divide the sum of squares by the number of valid samples.
  bool normalize = true;
  /// Drop samples whose mirrored surface point faces away from the camera.
  bool skip_back_facing = false;
  /// Drop samples whose viewing ray meets the surface at v or at its mirror
  /// more obliquely than this (degrees from the normal). The tangent-plane
  /// back-projection is ill-conditioned near the silhouette. 90 disables.
  double max_incidence_deg = 70.0;
  /// A cost resting on fewer valid samples than this fraction of the set is
  /// reported as having no valid samples.
  double min_valid_fraction = 0.2;
};

/// Inputs of one symmetry observation, shared between solves.
struct SymmetryObservation {
  SampleSet samples;
  std::shared_ptr<const EdgeMap> edges;
  std::shared_ptr<const DistanceField> field;
};

enum class Descriptor { Gray, DistanceTransform2D, ImprovedDT };

/// Per-sample signed descriptor differences beta(u_i) - beta(S(u_i)) scaled so
/// that their squared sum is the cost. Invalid samples are written as 0.
/// Returns the number of valid samples (0, with every entry zeroed, when
/// fewer than min_valid_fraction of them are valid).
int symmetry_residuals(const Ellipsoid& e, const SampleSet& samples, const DistanceField& field,
                       const ProjectionMatrix& p, const SymmetryOptions& opts,
                       Eigen::Ref<Eigen::VectorXd> out);

/// f_sym with the Improved-DT descriptor, exact sample raycasts and
/// tangent-plane raycasts for edge pixels. nullopt when no sample is valid.
std::optional<double> symmetry_cost(const Ellipsoid& e, const SampleSet& samples,
                                    const DistanceField& field, const ProjectionMatrix& p,
                                    const SymmetryOptions& opts = {});

/// Same sample pairing as symmetry_cost with a selectable descriptor.
std::optional<double> descriptor_cost(Descriptor descriptor, const Ellipsoid& e,
                                      const SampleSet& samples, const EdgeMap& edges,
                                      const DistanceField& field, const ProjectionMatrix& p,
                                      const SymmetryOptions& opts = {});

}  // namespace objslam
