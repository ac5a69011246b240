#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "artikin/segmentation.hpp"
#include "artikin/types.hpp"

namespace artikin {

using Eigen::Matrix2d;
using Eigen::Vector2d;
using ImageMask = Image<std::uint8_t>;
using ImageN = Image<Vector3d>;

struct RenderOptions {
  double near_plane = 1e-3;
  int tile_size = 16;
  double min_transmittance = 1e-4;
  double min_alpha = 1.0 / 255.0;
  double max_alpha = 0.99;
  /// Added to the diagonal of every screen-space covariance (pixels^2).
  double dilation = 0.3;
  /// Accumulated alpha a pixel needs before its depth counts as valid.
  double valid_alpha = 0.5;
};

/// Screen-space footprint of one splat. Pixel (x, y) is sampled at its center
/// (x + 0.5, y + 0.5).
struct Footprint {
  bool visible = false;
  Vector2d mean = Vector2d::Zero();
  Matrix2d cov = Matrix2d::Identity();
  Matrix2d inv_cov = Matrix2d::Identity();
  double radius = 0.0;   ///< 3-sigma bound in pixels
  double depth = 0.0;    ///< camera-space z of the center
  double opacity = 0.0;
  Vector3d normal_cam = Vector3d::UnitZ();  ///< faces the camera
  double plane_dist = 0.0;                  ///< camera center to splat plane

  double weight(const Vector2d& px) const;
  /// opacity * weight clipped to [0, max_alpha].
  double alpha(const Vector2d& px, double max_alpha = 0.99) const;
};

Footprint project_splat(const PlanarGaussian& g, const Camera& cam,
                        const RenderOptions& opts = {});

struct RenderMaps {
  ImageRGB color;
  ImageF alpha;
  ImageF distance;  ///< alpha-normalized plane distance
  ImageF depth;     ///< ray / splat-plane intersection depth (z)
  ImageMask depth_valid;
  ImageN normal;    ///< camera space, unit where alpha > 0
  std::vector<ImageF> seg;  ///< one alpha-normalized channel per part
};

/// Rasterizes already-posed Gaussians. `masks` may be null (no seg channels).
RenderMaps render_gaussians(const std::vector<PlanarGaussian>& gaussians,
                            const std::vector<PartMask>* masks, const Camera& cam,
                            const RenderOptions& opts = {});

/// Poses the scene at state t and rasterizes it.
RenderMaps render(const ArticulatedScene& scene, const Camera& cam, double t,
                  const RenderOptions& opts = {});

/// Ray direction K^-1 [x + 0.5, y + 0.5, 1] of a pixel (z = 1).
Vector3d pixel_ray(const Camera& cam, int x, int y);

struct NormalEstimate {
  ImageN normal;
  ImageMask valid;
};

/// Normals from the cross product of central differences of back-projected
/// depth, oriented toward the camera. Pixels missing any 4-neighbor are
/// invalid.
NormalEstimate normal_from_depth(const ImageF& depth, const ImageMask& valid,
                                 const Camera& cam);

/// Sobel gradient magnitude of the gray image divided by 4 (the response to
/// a unit step) and clamped to [0, 1]. Borders replicate.
ImageF image_gradient(const ImageRGB& image);

}  // namespace artikin
