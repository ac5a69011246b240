#pragma once

#include <optional>
#include <vector>

#include <json.hpp>

#include "artikin/renderer.hpp"
#include "artikin/segmentation.hpp"
#include "artikin/spatial.hpp"
#include "artikin/types.hpp"

namespace artikin {

struct LossWeights {
  double render = 1.0;
  double scale = 100.0;
  double center = 0.1;
  double geo = 0.05;
  double vote = 0.01;
  double dssim = 0.2;

  /// Throws InvariantError for a negative weight.
  void validate() const;
};

enum class LossMode { Geometry, Render };

struct LossReport {
  double render = 0.0;  ///< photometric term, or point alignment in geometry mode
  double scale = 0.0;
  double center = 0.0;
  double geo = 0.0;
  double vote = 0.0;
  double total = 0.0;

  nlohmann::json to_json() const;
};

/// Mean SSIM over pixels and channels, 11x11 Gaussian window (sigma 1.5),
/// zero padded, stride 1.
double ssim(const ImageRGB& a, const ImageRGB& b);

/// (1 - lambda) * L1 + lambda * (1 - SSIM) / 2. Throws ContractError on a
/// size mismatch.
double l_render(const ImageRGB& rendered, const ImageRGB& target, double lambda_dssim);

/// Mean over Gaussians of the smallest scale component.
double l_scale(const std::vector<PlanarGaussian>& gaussians);

/// Mean over parts with at least one argmax member of |O_j - mean member|^2.
double l_center(const ArticulatedScene& scene);

/// Symmetric Chamfer between the scene posed at t and a target Gaussian set.
double l_align_geometry(const ArticulatedScene& scene,
                        const std::vector<PlanarGaussian>& target, double t);

/// Renders of one camera at the canonical state. The canonical render is a
/// constant of the temporal terms, so it can be shared between evaluations
/// that only move joint or part-model parameters.
struct CanonicalRender {
  RenderMaps maps;
  NormalEstimate depth_normal;
};

CanonicalRender render_canonical(const ArticulatedScene& scene, const Camera& cam,
                                 const RenderOptions& opts = {});

struct NormalGradient {
  ImageN grad;
  ImageMask valid;
};

/// Difference quotient (N(t0) - N(t*)) / (t0 - t*) of the rendered normals.
/// t0 must differ from t*.
NormalGradient grad_normal(const ArticulatedScene& scene, const Camera& cam,
                           double t0, const CanonicalRender* canonical = nullptr,
                           const RenderOptions& opts = {});

/// Temporal normal-depth consistency at state t0 weighted by (1 - image
/// gradient of `image`). At t0 = t* only the static term remains. Returns 0
/// when no pixel is valid.
double l_geo(const ArticulatedScene& scene, const Camera& cam, double t0,
             const ImageRGB& image, const CanonicalRender* canonical = nullptr,
             const RenderOptions& opts = {});

/// Per-observation state used by total_loss: KD-trees over geometry targets
/// and canonical renders.
struct LossContext {
  std::vector<std::optional<KdTree>> target_trees;  ///< per observation
  std::vector<std::vector<CanonicalRender>> canonical;  ///< per observation, view
  std::optional<BoundarySet> boundary;
};

/// Builds target trees for geometry observations.
LossContext make_loss_context(const std::vector<StateObservation>& observations);

/// Weighted sum of all terms. Per-state terms are averaged over states, then
/// over views. In geometry mode the point alignment replaces the photometric
/// term. `only` restricts evaluation to a subset of observation indices.
LossReport total_loss(const ArticulatedScene& scene,
                      const std::vector<StateObservation>& observations,
                      const LossWeights& weights, LossMode mode,
                      const LossContext* context = nullptr,
                      const std::vector<int>* only = nullptr);

}  // namespace artikin
