#include "artikin/renderer.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "artikin/kinematics.hpp"
#include "artikin/parallel.hpp"

namespace artikin {

double Footprint::weight(const Vector2d& px) const {
  Vector2d d = px - mean;
  return std::exp(-0.5 * d.dot(inv_cov * d));
}

double Footprint::alpha(const Vector2d& px, double max_alpha) const {
  return std::clamp(opacity * weight(px), 0.0, max_alpha);
}

Footprint project_splat(const PlanarGaussian& g, const Camera& cam,
                        const RenderOptions& opts) {
  Footprint fp;
  const Matrix3d w = cam.world_to_camera.linear();
  Vector3d p = cam.world_to_camera * g.center;
  if (p.z() <= opts.near_plane) return fp;

  Matrix3d rot = g.orientation.normalized().toRotationMatrix();
  Matrix3d cov3 = rot * g.scale.cwiseAbs2().asDiagonal() * rot.transpose();
  Matrix3d cov_cam = w * cov3 * w.transpose();
  Eigen::Matrix<double, 2, 3> jac;
  const double z = p.z(), z2 = z * z;
  jac << cam.fx() / z, 0.0, -cam.fx() * p.x() / z2, 0.0, cam.fy() / z,
      -cam.fy() * p.y() / z2;
  fp.cov = jac * cov_cam * jac.transpose();
  fp.cov.diagonal().array() += opts.dilation;
  double det = fp.cov.determinant();
  if (!(det > 0.0)) return fp;
  fp.inv_cov = fp.cov.inverse();
  fp.mean = {cam.fx() * p.x() / z + cam.cx(), cam.fy() * p.y() / z + cam.cy()};
  Eigen::SelfAdjointEigenSolver<Matrix2d> eig(fp.cov, Eigen::EigenvaluesOnly);
  fp.radius = 3.0 * std::sqrt(eig.eigenvalues().maxCoeff());
  fp.depth = z;
  fp.opacity = g.opacity();

  Vector3d n = w * rot.col(g.shortest_axis());
  if (n.dot(p) > 0.0) n = -n;
  fp.normal_cam = n;
  fp.plane_dist = -n.dot(p);
  fp.visible = true;
  return fp;
}

Vector3d pixel_ray(const Camera& cam, int x, int y) {
  return {(x + 0.5 - cam.cx()) / cam.fx(), (y + 0.5 - cam.cy()) / cam.fy(), 1.0};
}

RenderMaps render_gaussians(const std::vector<PlanarGaussian>& gaussians,
                            const std::vector<PartMask>* masks, const Camera& cam,
                            const RenderOptions& opts) {
  const int W = cam.width, H = cam.height;
  const int k = masks != nullptr && !masks->empty()
                    ? static_cast<int>(masks->front().size())
                    : 0;
  RenderMaps maps;
  maps.color = ImageRGB(W, H, Vector3d::Zero());
  maps.alpha = ImageF(W, H, 0.0);
  maps.distance = ImageF(W, H, 0.0);
  maps.depth = ImageF(W, H, 0.0);
  maps.depth_valid = ImageMask(W, H, 0);
  maps.normal = ImageN(W, H, Vector3d::Zero());
  maps.seg.assign(k, ImageF(W, H, 0.0));

  std::vector<Footprint> fps(gaussians.size());
  std::vector<int> order;
  for (std::size_t i = 0; i < gaussians.size(); ++i) {
    fps[i] = project_splat(gaussians[i], cam, opts);
    if (fps[i].visible && fps[i].opacity >= opts.min_alpha)
      order.push_back(static_cast<int>(i));
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return fps[a].depth < fps[b].depth;
  });

  const int ts = opts.tile_size;
  const int tiles_x = (W + ts - 1) / ts, tiles_y = (H + ts - 1) / ts;
  std::vector<std::vector<int>> bins(static_cast<std::size_t>(tiles_x) * tiles_y);
  for (int i : order) {
    const Footprint& f = fps[i];
    int x0 = std::max(0, static_cast<int>(std::floor((f.mean.x() - f.radius) / ts)));
    int x1 = std::min(tiles_x - 1, static_cast<int>(std::floor((f.mean.x() + f.radius) / ts)));
    int y0 = std::max(0, static_cast<int>(std::floor((f.mean.y() - f.radius) / ts)));
    int y1 = std::min(tiles_y - 1, static_cast<int>(std::floor((f.mean.y() + f.radius) / ts)));
    for (int ty = y0; ty <= y1; ++ty)
      for (int tx = x0; tx <= x1; ++tx) bins[ty * tiles_x + tx].push_back(i);
  }

  parallel_for(bins.size(), [&](std::size_t tile) {
    const int tx = static_cast<int>(tile) % tiles_x, ty = static_cast<int>(tile) / tiles_x;
    VectorXd seg_acc(k);
    for (int y = ty * ts; y < std::min(H, (ty + 1) * ts); ++y) {
      for (int x = tx * ts; x < std::min(W, (tx + 1) * ts); ++x) {
        const Vector2d px(x + 0.5, y + 0.5);
        double trans = 1.0, dist = 0.0;
        Vector3d color = Vector3d::Zero(), normal = Vector3d::Zero();
        seg_acc.setZero();
        for (int i : bins[tile]) {
          const Footprint& f = fps[i];
          double a = f.alpha(px, opts.max_alpha);
          if (a < opts.min_alpha) continue;
          double wgt = a * trans;
          color += wgt * gaussians[i].color;
          normal += wgt * f.normal_cam;
          dist += wgt * f.plane_dist;
          if (k > 0) seg_acc += wgt * (*masks)[i];
          trans *= 1.0 - a;
          if (trans < opts.min_transmittance) break;
        }
        const double acc = 1.0 - trans;
        maps.color(x, y) = color;
        maps.alpha(x, y) = acc;
        if (acc <= 0.0) continue;
        double nn = normal.norm();
        if (nn > 0.0) maps.normal(x, y) = normal / nn;
        maps.distance(x, y) = dist / acc;
        for (int c = 0; c < k; ++c) maps.seg[c](x, y) = seg_acc[c] / acc;
        if (acc > opts.valid_alpha && nn > 0.0) {
          double denom = -maps.normal(x, y).dot(pixel_ray(cam, x, y));
          if (denom > 1e-9) {
            double depth = maps.distance(x, y) / denom;
            if (depth > 0.0) {
              maps.depth(x, y) = depth;
              maps.depth_valid(x, y) = 1;
            }
          }
        }
      }
    }
  });
  return maps;
}

RenderMaps render(const ArticulatedScene& scene, const Camera& cam, double t,
                  const RenderOptions& opts) {
  std::vector<PartMask> masks = scene_masks(scene);
  std::vector<PlanarGaussian> posed =
      transform_gaussians(scene.gaussians, masks, scene.joints, t);
  return render_gaussians(posed, &masks, cam, opts);
}

NormalEstimate normal_from_depth(const ImageF& depth, const ImageMask& valid,
                                 const Camera& cam) {
  const int W = depth.width, H = depth.height;
  NormalEstimate est{ImageN(W, H, Vector3d::Zero()), ImageMask(W, H, 0)};
  auto point = [&](int x, int y) -> Vector3d { return depth(x, y) * pixel_ray(cam, x, y); };
  for (int y = 1; y + 1 < H; ++y) {
    for (int x = 1; x + 1 < W; ++x) {
      if (!valid(x, y) || !valid(x - 1, y) || !valid(x + 1, y) ||
          !valid(x, y - 1) || !valid(x, y + 1))
        continue;
      Vector3d dx = point(x + 1, y) - point(x - 1, y);
      Vector3d dy = point(x, y + 1) - point(x, y - 1);
      Vector3d n = dx.cross(dy);
      double len = n.norm();
      if (!(len > 0.0)) continue;
      n /= len;
      if (n.dot(point(x, y)) > 0.0) n = -n;
      est.normal(x, y) = n;
      est.valid(x, y) = 1;
    }
  }
  return est;
}

ImageF image_gradient(const ImageRGB& image) {
  const int W = image.width, H = image.height;
  ImageF gray(W, H), out(W, H, 0.0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) gray(x, y) = image(x, y).mean();
  auto g = [&](int x, int y) {
    return gray(std::clamp(x, 0, W - 1), std::clamp(y, 0, H - 1));
  };
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double gx = (g(x + 1, y - 1) + 2 * g(x + 1, y) + g(x + 1, y + 1)) -
                  (g(x - 1, y - 1) + 2 * g(x - 1, y) + g(x - 1, y + 1));
      double gy = (g(x - 1, y + 1) + 2 * g(x, y + 1) + g(x + 1, y + 1)) -
                  (g(x - 1, y - 1) + 2 * g(x, y - 1) + g(x + 1, y - 1));
      out(x, y) = std::min(1.0, std::sqrt(gx * gx + gy * gy) / 4.0);
    }
  }
  return out;
}

}  // namespace artikin
