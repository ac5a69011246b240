#include "artikin/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "artikin/errors.hpp"
#include "artikin/kinematics.hpp"
#include "artikin/log.hpp"

namespace artikin {

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

std::vector<double> gaussian_kernel() {
  std::vector<double> k(kSsimWindow);
  const int r = kSsimWindow / 2;
  for (int i = 0; i < kSsimWindow; ++i)
    k[i] = std::exp(-0.5 * (i - r) * (i - r) / (kSsimSigma * kSsimSigma));
  double s = std::accumulate(k.begin(), k.end(), 0.0);
  for (auto& v : k) v /= s;
  return k;
}

// Separable zero-padded "same" convolution.
ImageF blur(const ImageF& in, const std::vector<double>& k) {
  const int W = in.width, H = in.height, r = kSsimWindow / 2;
  ImageF tmp(W, H, 0.0), out(W, H, 0.0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i)
        if (x + i >= 0 && x + i < W) s += k[i + r] * in(x + i, y);
      tmp(x, y) = s;
    }
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i)
        if (y + i >= 0 && y + i < H) s += k[i + r] * tmp(x, y + i);
      out(x, y) = s;
    }
  return out;
}

void check_same_size(const ImageRGB& a, const ImageRGB& b) {
  if (a.width != b.width || a.height != b.height)
    throw ContractError("image sizes differ: " + std::to_string(a.width) + "x" +
                        std::to_string(a.height) + " vs " + std::to_string(b.width) +
                        "x" + std::to_string(b.height));
}

}  // namespace

void LossWeights::validate() const {
  const std::pair<const char*, double> all[] = {{"render", render}, {"scale", scale},
                                                {"center", center}, {"geo", geo},
                                                {"vote", vote},     {"dssim", dssim}};
  for (const auto& [name, v] : all)
    if (!(v >= 0.0)) throw InvariantError(std::string("weights.") + name, "must be >= 0");
}

nlohmann::json LossReport::to_json() const {
  return {{"render", render}, {"scale", scale}, {"center", center},
          {"geo", geo},       {"vote", vote},   {"total", total}};
}

double ssim(const ImageRGB& a, const ImageRGB& b) {
  check_same_size(a, b);
  const auto k = gaussian_kernel();
  const int W = a.width, H = a.height;
  double sum = 0.0;
  for (int c = 0; c < 3; ++c) {
    ImageF x(W, H), y(W, H), xx(W, H), yy(W, H), xy(W, H);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      x.data[i] = a.data[i][c];
      y.data[i] = b.data[i][c];
      xx.data[i] = x.data[i] * x.data[i];
      yy.data[i] = y.data[i] * y.data[i];
      xy.data[i] = x.data[i] * y.data[i];
    }
    ImageF mx = blur(x, k), my = blur(y, k), sxx = blur(xx, k), syy = blur(yy, k),
           sxy = blur(xy, k);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      double mu_x = mx.data[i], mu_y = my.data[i];
      double var_x = sxx.data[i] - mu_x * mu_x;
      double var_y = syy.data[i] - mu_y * mu_y;
      double cov = sxy.data[i] - mu_x * mu_y;
      sum += ((2 * mu_x * mu_y + kSsimC1) * (2 * cov + kSsimC2)) /
             ((mu_x * mu_x + mu_y * mu_y + kSsimC1) * (var_x + var_y + kSsimC2));
    }
  }
  return sum / (3.0 * static_cast<double>(a.data.size()));
}

double l_render(const ImageRGB& rendered, const ImageRGB& target, double lambda_dssim) {
  check_same_size(rendered, target);
  double l1 = 0.0;
  for (std::size_t i = 0; i < rendered.data.size(); ++i)
    l1 += (rendered.data[i] - target.data[i]).cwiseAbs().sum();
  l1 /= 3.0 * static_cast<double>(rendered.data.size());
  double dssim = lambda_dssim > 0.0 ? 0.5 * (1.0 - ssim(rendered, target)) : 0.0;
  return (1.0 - lambda_dssim) * l1 + lambda_dssim * dssim;
}

double l_scale(const std::vector<PlanarGaussian>& gaussians) {
  if (gaussians.empty()) return 0.0;
  double s = 0.0;
  for (const auto& g : gaussians) s += g.scale.minCoeff();
  return s / static_cast<double>(gaussians.size());
}

double l_center(const ArticulatedScene& scene) {
  std::vector<int> labels = argmax_labels(scene_masks(scene));
  std::vector<Vector3d> sum(scene.k, Vector3d::Zero());
  std::vector<int> count(scene.k, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    sum[labels[i]] += scene.gaussians[i].center;
    ++count[labels[i]];
  }
  double total = 0.0;
  int parts = 0;
  for (int j = 0; j < scene.k; ++j) {
    if (count[j] == 0) continue;
    total += (scene.part_model.centers[j] - sum[j] / count[j]).squaredNorm();
    ++parts;
  }
  return parts == 0 ? 0.0 : total / parts;
}

double l_align_geometry(const ArticulatedScene& scene,
                        const std::vector<PlanarGaussian>& target, double t) {
  if (scene.gaussians.empty() || target.empty())
    throw ContractError("l_align_geometry: empty Gaussian set");
  return chamfer_sq(centers_of(transform_scene(scene, t)), centers_of(target));
}

CanonicalRender render_canonical(const ArticulatedScene& scene, const Camera& cam,
                                 const RenderOptions& opts) {
  CanonicalRender c;
  c.maps = render(scene, cam, kCanonicalState, opts);
  c.depth_normal = normal_from_depth(c.maps.depth, c.maps.depth_valid, cam);
  return c;
}

NormalGradient grad_normal(const ArticulatedScene& scene, const Camera& cam,
                           double t0, const CanonicalRender* canonical,
                           const RenderOptions& opts) {
  if (t0 == kCanonicalState)
    throw ContractError("grad_normal: t0 must differ from the canonical state");
  CanonicalRender local;
  if (canonical == nullptr) {
    local = render_canonical(scene, cam, opts);
    canonical = &local;
  }
  RenderMaps cur = render(scene, cam, t0, opts);
  const double dt = t0 - kCanonicalState;
  NormalGradient out{ImageN(cam.width, cam.height, Vector3d::Zero()),
                     ImageMask(cam.width, cam.height, 0)};
  for (std::size_t i = 0; i < out.grad.data.size(); ++i) {
    if (cur.alpha.data[i] <= opts.valid_alpha ||
        canonical->maps.alpha.data[i] <= opts.valid_alpha)
      continue;
    out.grad.data[i] = (cur.normal.data[i] - canonical->maps.normal.data[i]) / dt;
    out.valid.data[i] = 1;
  }
  return out;
}

double l_geo(const ArticulatedScene& scene, const Camera& cam, double t0,
             const ImageRGB& image, const CanonicalRender* canonical,
             const RenderOptions& opts) {
  const bool temporal = t0 != kCanonicalState;
  CanonicalRender local;
  if (temporal && canonical == nullptr) {
    local = render_canonical(scene, cam, opts);
    canonical = &local;
  }
  RenderMaps cur = render(scene, cam, t0, opts);
  NormalEstimate est = normal_from_depth(cur.depth, cur.depth_valid, cam);
  ImageF weight = image_gradient(image);
  if (weight.width != cam.width || weight.height != cam.height)
    throw ContractError("l_geo: image does not match the camera");

  const double dt = t0 - kCanonicalState;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < cur.alpha.data.size(); ++i) {
    if (!est.valid.data[i] || cur.alpha.data[i] <= opts.valid_alpha) continue;
    double term = (est.normal.data[i] - cur.normal.data[i]).cwiseAbs().sum();
    if (temporal) {
      if (!canonical->depth_normal.valid.data[i] ||
          canonical->maps.alpha.data[i] <= opts.valid_alpha)
        continue;
      Vector3d grad_n = (cur.normal.data[i] - canonical->maps.normal.data[i]) / dt;
      Vector3d grad_nbar =
          (est.normal.data[i] - canonical->depth_normal.normal.data[i]) / dt;
      term += (grad_nbar - grad_n).cwiseAbs().sum();
    }
    sum += (1.0 - weight.data[i]) * term;
    ++count;
  }
  if (count == 0) {
    spdlog::warn("l_geo: no valid pixels at t={}", t0);
    return 0.0;
  }
  return sum / static_cast<double>(count);
}

LossContext make_loss_context(const std::vector<StateObservation>& observations) {
  LossContext ctx;
  for (const auto& o : observations) {
    if (o.gaussians && !o.gaussians->empty())
      ctx.target_trees.emplace_back(KdTree(centers_of(*o.gaussians)));
    else
      ctx.target_trees.emplace_back(std::nullopt);
  }
  return ctx;
}

LossReport total_loss(const ArticulatedScene& scene,
                      const std::vector<StateObservation>& observations,
                      const LossWeights& weights, LossMode mode,
                      const LossContext* context, const std::vector<int>* only) {
  weights.validate();
  std::vector<int> idx;
  if (only != nullptr) {
    idx = *only;
  } else {
    idx.resize(observations.size());
    std::iota(idx.begin(), idx.end(), 0);
  }
  // Fixed summation order: by state, then by original index.
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return observations[a].t < observations[b].t;
  });

  LossReport rep;
  const std::vector<PartMask> masks = scene_masks(scene);
  int states = 0, geo_states = 0;
  for (int oi : idx) {
    const StateObservation& obs = observations[oi];
    if (mode == LossMode::Geometry) {
      if (!obs.gaussians || obs.gaussians->empty()) continue;
      auto posed = centers_of(transform_gaussians(scene.gaussians, masks, scene.joints, obs.t));
      KdTree posed_tree(posed);
      double fwd = 0.0, bwd = 0.0;
      if (context != nullptr && context->target_trees.at(oi)) {
        fwd = mean_nn_sq_distance(posed, *context->target_trees[oi]);
      } else {
        fwd = mean_nn_sq_distance(posed, KdTree(centers_of(*obs.gaussians)));
      }
      bwd = mean_nn_sq_distance(centers_of(*obs.gaussians), posed_tree);
      rep.render += 0.5 * (fwd + bwd);
      ++states;
    } else {
      if (obs.views.empty()) continue;
      double r = 0.0;
      for (const auto& v : obs.views)
        r += l_render(render(scene, v.camera, obs.t).color, v.image, weights.dssim);
      rep.render += r / static_cast<double>(obs.views.size());
      ++states;
    }
    if (weights.geo > 0.0 && !obs.views.empty()) {
      double g = 0.0;
      for (std::size_t v = 0; v < obs.views.size(); ++v) {
        const CanonicalRender* can = nullptr;
        if (context != nullptr && context->canonical.size() > static_cast<std::size_t>(oi) &&
            context->canonical[oi].size() > v)
          can = &context->canonical[oi][v];
        g += l_geo(scene, obs.views[v].camera, obs.t, obs.views[v].image, can);
      }
      rep.geo += g / static_cast<double>(obs.views.size());
      ++geo_states;
    }
  }
  if (states > 0) rep.render /= states;
  if (geo_states > 0) rep.geo /= geo_states;
  rep.scale = l_scale(scene.gaussians);
  rep.center = l_center(scene);
  if (context != nullptr && context->boundary) rep.vote = vote_loss(*context->boundary, masks);
  rep.total = weights.render * rep.render + weights.scale * rep.scale +
              weights.center * rep.center + weights.geo * rep.geo +
              weights.vote * rep.vote;
  return rep;
}

}  // namespace artikin
