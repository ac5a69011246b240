#include "artikin/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "artikin/errors.hpp"
#include "artikin/kinematics.hpp"
#include "artikin/scene_io.hpp"
#include "artikin/segmentation.hpp"
#include "artikin/so3.hpp"
#include "artikin/spatial.hpp"

namespace artikin {

ParamVector pack(const ArticulatedScene& scene) {
  ParamVector p;
  p.layout.k = scene.k;
  p.layout.gaussians = static_cast<int>(scene.gaussians.size());
  const ParamLayout& L = p.layout;
  p.values = VectorXd::Zero(L.size());
  VectorXd& v = p.values;
  for (int j = 1; j < scene.k; ++j) {
    const JointParams& jp = scene.joints[j];
    const int o = L.joint(j);
    v[o] = jp.theta;
    v.segment<3>(o + 1) = jp.axis;
    v.segment<3>(o + 4) = jp.pivot;
    v.segment<3>(o + 7) = jp.translation;
  }
  for (int j = 0; j < scene.k; ++j) {
    const int o = L.part(j);
    v.segment<3>(o) = scene.part_model.centers[j];
    v.segment<3>(o + 3) = so3::log(scene.part_model.orientations[j]);
    v.segment<3>(o + 6) = scene.part_model.scales[j];
  }
  for (int i = 0; i < L.gaussians; ++i) {
    const PlanarGaussian& g = scene.gaussians[i];
    const int o = L.gaussian(i);
    v.segment<3>(o) = g.center;
    v[o + 3] = g.orientation.w();
    v.segment<3>(o + 4) = g.orientation.vec();
    v.segment<3>(o + 7) = g.scale;
    v[o + 10] = g.opacity_logit;
    v.segment(o + 11, scene.k) = g.seg_logits;
  }
  return p;
}

ArticulatedScene unpack(const ParamVector& params, const ArticulatedScene& like) {
  const ParamLayout& L = params.layout;
  const VectorXd& v = params.values;
  if (L.k != like.k || v.size() != L.size())
    throw ContractError("parameter vector does not match the scene layout");
  ArticulatedScene s;
  s.k = like.k;
  s.temperature = like.temperature;
  s.joints.assign(s.k, JointParams::identity());
  if (!like.joints.empty()) s.joints[0] = like.joints[0];
  for (int j = 1; j < s.k; ++j) {
    JointParams& jp = s.joints[j];
    const int o = L.joint(j);
    jp.theta = v[o];
    Vector3d a = v.segment<3>(o + 1);
    jp.axis = a.norm() > 0.0 ? Vector3d(a.normalized()) : Vector3d::UnitZ();
    jp.pivot = v.segment<3>(o + 4);
    jp.translation = v.segment<3>(o + 7);
  }
  s.part_model = PartModel::identity(s.k);
  for (int j = 0; j < s.k; ++j) {
    const int o = L.part(j);
    s.part_model.centers[j] = v.segment<3>(o);
    s.part_model.orientations[j] = so3::exp(v.segment<3>(o + 3));
    s.part_model.scales[j] = v.segment<3>(o + 6);
  }
  s.gaussians.resize(L.gaussians);
  for (int i = 0; i < L.gaussians; ++i) {
    PlanarGaussian& g = s.gaussians[i];
    const int o = L.gaussian(i);
    g.center = v.segment<3>(o);
    g.orientation = Quaterniond(v[o + 3], v[o + 4], v[o + 5], v[o + 6]);
    if (g.orientation.norm() > 0.0) {
      g.orientation.normalize();
    } else {
      g.orientation = Quaterniond::Identity();
    }
    g.scale = v.segment<3>(o + 7);
    g.opacity_logit = v[o + 10];
    g.color = like.gaussians.size() == static_cast<std::size_t>(L.gaussians)
                  ? like.gaussians[i].color
                  : Vector3d::Constant(0.5);
    g.seg_logits = v.segment(o + 11, s.k);
  }
  return s;
}

namespace {

bool all_finite(const VectorXd& v) { return v.allFinite(); }

/// Analytic gradient of the alignment, scale, center and vote terms.
/// Returns the term values in `rep` (render = alignment in geometry mode).
VectorXd analytic_gradient(const ArticulatedScene& scene,
                           const std::vector<StateObservation>& observations,
                           const LossWeights& w, LossMode mode, const LossContext* context,
                           const std::vector<int>& idx, LossReport& rep) {
  const int k = scene.k;
  const int n = static_cast<int>(scene.gaussians.size());
  ParamLayout L{k, n};
  VectorXd grad = VectorXd::Zero(L.size());
  const PartModel& pm = scene.part_model;

  // Masks and their intermediates.
  std::vector<PartMask> masks(n);
  for (int i = 0; i < n; ++i)
    masks[i] = part_mask(mahalanobis(pm, scene.gaussians[i].center),
                         scene.gaussians[i].seg_logits, scene.temperature);
  std::vector<VectorXd> g_mask(n, VectorXd::Zero(k));
  std::vector<Vector3d> g_mu(n, Vector3d::Zero());

  // Point alignment, averaged over the geometry states.
  if (mode == LossMode::Geometry) {
    std::vector<int> states;
    for (int oi : idx)
      if (observations[oi].gaussians && !observations[oi].gaussians->empty()) states.push_back(oi);
    const double per_state = states.empty() ? 0.0 : w.render / static_cast<double>(states.size());
    std::vector<Vector3d> g_omega(k, Vector3d::Zero());
    for (int oi : states) {
      const StateObservation& obs = observations[oi];
      const double f = state_factor(obs.t);
      std::vector<Matrix3d> rot(k);
      std::vector<Vector3d> shift(k), omega(k);
      for (int j = 0; j < k; ++j) {
        const JointParams& jp = scene.joints[j];
        omega[j] = f * jp.theta * jp.axis;
        rot[j] = so3::exp(omega[j]);
        shift[j] = jp.pivot - rot[j] * jp.pivot + f * jp.translation;
      }
      std::vector<Vector3d> posed(n);
      std::vector<std::vector<Vector3d>> parts(n, std::vector<Vector3d>(k));
      for (int i = 0; i < n; ++i) {
        const Vector3d& mu = scene.gaussians[i].center;
        Vector3d x = mu;
        for (int j = 0; j < k; ++j) {
          parts[i][j] = rot[j] * mu + shift[j];
          x += masks[i][j] * (parts[i][j] - mu);
        }
        posed[i] = x;
      }
      const std::vector<Vector3d> target = centers_of(*obs.gaussians);
      std::optional<KdTree> own;
      const KdTree* ttree = nullptr;
      if (context != nullptr && context->target_trees.size() > static_cast<std::size_t>(oi) &&
          context->target_trees[oi]) {
        ttree = &*context->target_trees[oi];
      } else {
        own.emplace(target);
        ttree = &*own;
      }
      KdTree ptree(posed);
      const double inv_n = 1.0 / n, inv_m = 1.0 / static_cast<double>(target.size());
      std::vector<Vector3d> g_x(n, Vector3d::Zero());
      double fwd = 0.0, bwd = 0.0;
      for (int i = 0; i < n; ++i) {
        Neighbor nb = ttree->nearest(posed[i]);
        fwd += nb.sq_dist;
        g_x[i] += 2.0 * inv_n * (posed[i] - ttree->points()[nb.index]);
      }
      for (const auto& y : target) {
        Neighbor nb = ptree.nearest(y);
        bwd += nb.sq_dist;
        g_x[nb.index] += 2.0 * inv_m * (posed[nb.index] - y);
      }
      rep.render += 0.5 * (fwd * inv_n + bwd * inv_m);
      const double scale = 0.5 * per_state;
      for (int i = 0; i < n; ++i) {
        const Vector3d gx = scale * g_x[i];
        const Vector3d& mu = scene.gaussians[i].center;
        for (int j = 0; j < k; ++j) {
          const double m = masks[i][j];
          g_mask[i][j] += gx.dot(parts[i][j] - mu);
          g_mu[i] += m * (rot[j].transpose() * gx - gx);
          if (j == 0) continue;
          const Vector3d wv = m * gx;
          const int o = L.joint(j);
          const JointParams& jp = scene.joints[j];
          grad.segment<3>(o + 4) += (Matrix3d::Identity() - rot[j]).transpose() * wv;
          grad.segment<3>(o + 7) += f * wv;
          g_omega[j] += (rot[j] * (mu - jp.pivot)).cross(wv);
        }
        g_mu[i] += gx;
      }
      for (int j = 1; j < k; ++j) {
        const JointParams& jp = scene.joints[j];
        const Vector3d go = so3::left_jacobian(omega[j]).transpose() * g_omega[j];
        const int o = L.joint(j);
        const double phi = f * jp.theta;
        grad[o] += f * jp.axis.dot(go);
        // The stored axis is unit; project onto its tangent plane.
        grad.segment<3>(o + 1) += phi * (go - jp.axis * jp.axis.dot(go));
        g_omega[j].setZero();
      }
    }
    if (!states.empty()) rep.render /= static_cast<double>(states.size());
  }

  // Scale term: mean of the smallest scale component.
  for (int i = 0; i < n; ++i) {
    const PlanarGaussian& g = scene.gaussians[i];
    const int c = g.shortest_axis();
    rep.scale += g.scale[c];
    grad[L.gaussian(i) + 7 + c] += w.scale / n;
  }
  rep.scale /= n;

  // Center term with piecewise-constant argmax membership.
  {
    std::vector<int> labels = argmax_labels(masks);
    std::vector<Vector3d> sum(k, Vector3d::Zero());
    std::vector<int> count(k, 0);
    for (int i = 0; i < n; ++i) {
      sum[labels[i]] += scene.gaussians[i].center;
      ++count[labels[i]];
    }
    int used = 0;
    for (int j = 0; j < k; ++j) used += count[j] > 0 ? 1 : 0;
    for (int j = 0; j < k; ++j) {
      if (count[j] == 0) continue;
      const Vector3d diff = pm.centers[j] - sum[j] / count[j];
      rep.center += diff.squaredNorm();
      const Vector3d g = w.center * 2.0 * diff / used;
      grad.segment<3>(L.part(j)) += g;
      for (int i = 0; i < n; ++i)
        if (labels[i] == j) g_mu[i] -= g / count[j];
    }
    if (used > 0) rep.center /= used;
  }

  // Vote term through the masks.
  if (context != nullptr && context->boundary) {
    std::vector<VectorXd> gv;
    rep.vote = vote_loss(*context->boundary, masks, &gv);
    for (int i = 0; i < n; ++i)
      if (gv[i].size() == k) g_mask[i] += w.vote * gv[i];
  }

  // Back through the softmax masks into logits, Gaussian centers and the
  // part frames.
  std::vector<Vector3d> g_vomega(k, Vector3d::Zero());
  for (int i = 0; i < n; ++i) {
    const VectorXd& m = masks[i];
    const VectorXd ds = m.cwiseProduct(g_mask[i] - VectorXd::Constant(k, m.dot(g_mask[i])));
    const int o = L.gaussian(i);
    grad.segment(o + 11, k) += ds / scene.temperature;
    const Vector3d& mu = scene.gaussians[i].center;
    for (int j = 0; j < k; ++j) {
      const double g_gamma = -ds[j] / scene.temperature;
      if (g_gamma == 0.0) continue;
      const Matrix3d& V = pm.orientations[j];
      const Vector3d r = V * (mu - pm.centers[j]);
      const Vector3d l = pm.scales[j].cwiseProduct(r);
      const Vector3d u = 2.0 * l.cwiseProduct(pm.scales[j]);
      const Vector3d du = g_gamma * (V.transpose() * u);
      g_mu[i] += du;
      const int po = L.part(j);
      grad.segment<3>(po) -= du;
      grad.segment<3>(po + 6) += g_gamma * 2.0 * l.cwiseProduct(r);
      g_vomega[j] += g_gamma * r.cross(u);
    }
  }
  for (int j = 0; j < k; ++j) {
    const int po = L.part(j);
    const Vector3d wv = so3::log(pm.orientations[j]);
    grad.segment<3>(po + 3) += so3::left_jacobian(wv).transpose() * g_vomega[j];
  }
  for (int i = 0; i < n; ++i) grad.segment<3>(L.gaussian(i)) += g_mu[i];
  return grad;
}

/// Value of total_loss at a parameter vector.
double objective(const ParamVector& p, const ArticulatedScene& like,
                 const std::vector<StateObservation>& observations, const LossWeights& w,
                 LossMode mode, const LossContext* context, const std::vector<int>* only) {
  return total_loss(unpack(p, like), observations, w, mode, context, only).total;
}

void central_differences(const ParamVector& base, const ArticulatedScene& like,
                         const std::vector<StateObservation>& observations,
                         const LossWeights& w, LossMode mode, const LossContext* context,
                         const std::vector<int>* only, double step, int begin, int end,
                         VectorXd& grad) {
  ParamVector p = base;
  for (int c = begin; c < end; ++c) {
    const double x = base.values[c];
    const double h = step * std::max(1.0, std::abs(x));
    p.values[c] = x + h;
    const double fp = objective(p, like, observations, w, mode, context, only);
    p.values[c] = x - h;
    const double fm = objective(p, like, observations, w, mode, context, only);
    p.values[c] = x;
    grad[c] += (fp - fm) / (2.0 * h);
  }
}

}  // namespace

GradientResult gradients(const ArticulatedScene& scene,
                         const std::vector<StateObservation>& observations,
                         const LossWeights& weights, LossMode mode,
                         const LossContext* context, const std::vector<int>* only,
                         const GradientProvider& provider) {
  weights.validate();
  std::vector<int> idx;
  if (only != nullptr) {
    idx = *only;
  } else {
    idx.resize(observations.size());
    std::iota(idx.begin(), idx.end(), 0);
  }
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return observations[a].t < observations[b].t; });

  GradientResult res;
  const ParamVector base = pack(scene);
  const ParamLayout& L = base.layout;

  if (provider.mode == GradientMode::FiniteDifference) {
    res.report = total_loss(scene, observations, weights, mode, context, &idx);
    res.grad = VectorXd::Zero(L.size());
    central_differences(base, scene, observations, weights, mode, context, &idx,
                        provider.fd_step, 0, L.size(), res.grad);
  } else {
    LossReport rep;
    res.grad = analytic_gradient(scene, observations, weights, mode, context, idx, rep);
    bool has_views = false;
    for (int oi : idx) has_views = has_views || !observations[oi].views.empty();
    const bool image_terms = mode == LossMode::Render || (has_views && weights.geo > 0.0);
    if (image_terms) {
      LossWeights iw;
      iw.render = mode == LossMode::Render ? weights.render : 0.0;
      iw.geo = weights.geo;
      iw.dssim = weights.dssim;
      iw.scale = iw.center = iw.vote = 0.0;
      LossReport img = total_loss(scene, observations, iw, mode, context, &idx);
      if (mode == LossMode::Render) rep.render = img.render;
      rep.geo = img.geo;
      if (provider.mode == GradientMode::Hybrid)
        central_differences(base, scene, observations, iw, mode, context, &idx,
                            provider.fd_step, 0, L.model_size(), res.grad);
    }
    rep.total = weights.render * rep.render + weights.scale * rep.scale +
                weights.center * rep.center + weights.geo * rep.geo + weights.vote * rep.vote;
    res.report = rep;
  }
  if (!std::isfinite(res.report.total) || !all_finite(res.grad)) {
    nlohmann::json dump = nlohmann::json::array();
    for (const auto& j : scene.joints)
      dump.push_back({{"theta", j.theta},
                      {"axis", {j.axis.x(), j.axis.y(), j.axis.z()}},
                      {"pivot", {j.pivot.x(), j.pivot.y(), j.pivot.z()}},
                      {"translation", {j.translation.x(), j.translation.y(), j.translation.z()}}});
    throw NumericError("non-finite loss or gradient; joints: " + dump.dump());
  }
  return res;
}

Adam::Adam(VectorXd base_lr, int horizon, double floor, double beta1, double beta2, double eps)
    : lr_(std::move(base_lr)),
      m_(VectorXd::Zero(lr_.size())),
      v_(VectorXd::Zero(lr_.size())),
      horizon_(std::max(horizon, 1)),
      floor_(floor),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {}

double Adam::decay(int iteration) const {
  const double p = std::clamp(static_cast<double>(iteration) / horizon_, 0.0, 1.0);
  return floor_ + (1.0 - floor_) * 0.5 * (1.0 + std::cos(kPi * p));
}

void Adam::step(VectorXd& x, const VectorXd& grad, int iteration) {
  if (grad.size() != lr_.size() || x.size() != lr_.size())
    throw ContractError("Adam step with mismatched sizes");
  if (!grad.allFinite()) throw NumericError("Adam step with a non-finite gradient");
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, t_), c2 = 1.0 - std::pow(beta2_, t_);
  const double d = decay(iteration);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x[i] -= d * lr_[i] * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
}

VectorXd learning_rates(const ParamLayout& L, const LearningRates& lrs) {
  VectorXd lr(L.size());
  for (int j = 1; j < L.k; ++j) lr.segment(L.joint(j), ParamLayout::kJointBlock).setConstant(lrs.joints);
  for (int j = 0; j < L.k; ++j)
    lr.segment(L.part(j), ParamLayout::kPartBlock).setConstant(lrs.part_model);
  for (int i = 0; i < L.gaussians; ++i) {
    const int o = L.gaussian(i);
    lr.segment(o, 11).setConstant(lrs.gaussians);
    lr.segment(o + 11, L.k).setConstant(lrs.seg_logits);
  }
  return lr;
}

void step(ArticulatedScene& scene, Adam& adam, const VectorXd& grad, int iteration) {
  ParamVector p = pack(scene);
  adam.step(p.values, grad, iteration);
  scene = unpack(p, scene);
  renormalize(scene);
}

std::string to_string(LossMode mode) { return mode == LossMode::Geometry ? "geometry" : "render"; }

LossMode loss_mode_from_string(const std::string& s) {
  if (s == "geometry") return LossMode::Geometry;
  if (s == "render") return LossMode::Render;
  throw ParseError("unknown loss mode '" + s + "' (expected geometry or render)");
}

FitConfig FitConfig::from_json(const nlohmann::json& j, FitConfig c) {
  if (!j.is_object()) throw ParseError("fit config must be a JSON object");
  static const std::vector<std::string> known = {
      "k",      "mode",      "weights",  "lrs",  "iterations",       "seed",
      "fd_step", "vote_refresh", "knn_k", "beta", "temperature",     "tau",
      "lr_floor", "joint_warmup", "checkpoint_every", "checkpoint_dir", "loss_log"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ParseError("fit config: unknown key '" + it.key() + "'");
  try {
    c.k = j.value("k", c.k);
    if (j.contains("mode")) c.mode = loss_mode_from_string(j["mode"].get<std::string>());
    if (j.contains("weights")) {
      const auto& w = j["weights"];
      c.weights.render = w.value("render", c.weights.render);
      c.weights.scale = w.value("scale", c.weights.scale);
      c.weights.center = w.value("center", c.weights.center);
      c.weights.geo = w.value("geo", c.weights.geo);
      c.weights.vote = w.value("vote", c.weights.vote);
      c.weights.dssim = w.value("dssim", c.weights.dssim);
    }
    if (j.contains("lrs")) {
      const auto& l = j["lrs"];
      c.lrs.joints = l.value("joints", c.lrs.joints);
      c.lrs.part_model = l.value("part_model", c.lrs.part_model);
      c.lrs.seg_logits = l.value("seg_logits", c.lrs.seg_logits);
      c.lrs.gaussians = l.value("gaussians", c.lrs.gaussians);
    }
    c.iterations = j.value("iterations", c.iterations);
    c.seed = j.value("seed", c.seed);
    c.fd_step = j.value("fd_step", c.fd_step);
    c.vote_refresh = j.value("vote_refresh", c.vote_refresh);
    c.knn_k = j.value("knn_k", c.knn_k);
    c.beta = j.value("beta", c.beta);
    c.temperature = j.value("temperature", c.temperature);
    c.tau = j.value("tau", c.tau);
    c.lr_floor = j.value("lr_floor", c.lr_floor);
    c.joint_warmup = j.value("joint_warmup", c.joint_warmup);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    if (j.contains("checkpoint_dir")) c.checkpoint_dir = j["checkpoint_dir"].get<std::string>();
    if (j.contains("loss_log")) c.loss_log = j["loss_log"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("fit config: ") + e.what());
  }
  if (c.k < 1) throw ParseError("fit config: k must be at least 1");
  if (c.joint_warmup < 0) throw ParseError("fit config: joint_warmup must be non-negative");
  if (c.iterations < 0) throw ParseError("fit config: iterations must be non-negative");
  if (!(c.temperature > 0.0)) throw ParseError("fit config: temperature must be positive");
  if (!(c.tau > 0.0 && c.tau < 1.0)) throw ParseError("fit config: tau must lie in (0, 1)");
  c.weights.validate();
  return c;
}

FitConfig FitConfig::geometry_profile() {
  FitConfig c;
  c.temperature = 0.25;
  c.weights.vote = 0.0;
  return c;
}

FitConfig FitConfig::from_json(const nlohmann::json& j) { return from_json(j, FitConfig()); }

nlohmann::json FitConfig::to_json() const {
  return {{"k", k},
          {"mode", to_string(mode)},
          {"weights",
           {{"render", weights.render},
            {"scale", weights.scale},
            {"center", weights.center},
            {"geo", weights.geo},
            {"vote", weights.vote},
            {"dssim", weights.dssim}}},
          {"lrs",
           {{"joints", lrs.joints},
            {"part_model", lrs.part_model},
            {"seg_logits", lrs.seg_logits},
            {"gaussians", lrs.gaussians}}},
          {"iterations", iterations},
          {"seed", seed},
          {"fd_step", fd_step},
          {"vote_refresh", vote_refresh},
          {"knn_k", knn_k},
          {"beta", beta},
          {"temperature", temperature},
          {"tau", tau},
          {"lr_floor", lr_floor},
          {"joint_warmup", joint_warmup},
          {"checkpoint_every", checkpoint_every},
          {"checkpoint_dir", checkpoint_dir.string()},
          {"loss_log", loss_log.string()}};
}

namespace {

void refresh_canonical(const ArticulatedScene& scene,
                       const std::vector<StateObservation>& observations, LossContext& ctx) {
  ctx.canonical.assign(observations.size(), {});
  for (std::size_t o = 0; o < observations.size(); ++o)
    for (const auto& v : observations[o].views)
      ctx.canonical[o].push_back(render_canonical(scene, v.camera));
}

}  // namespace

FitResult fit_scene(const ArticulatedScene& initial,
                    const std::vector<StateObservation>& observations,
                    const FitConfig& config) {
  validate(initial);
  if (observations.empty()) throw ContractError("fit needs at least one observation");
  FitResult res;
  res.initial = initial;
  res.scene = initial;
  ArticulatedScene& scene = res.scene;

  LossContext ctx = make_loss_context(observations);
  bool has_views = false;
  for (const auto& o : observations) has_views = has_views || !o.views.empty();
  const bool want_geo = has_views && config.weights.geo > 0.0;

  std::ofstream log;
  if (!config.loss_log.empty()) {
    if (config.loss_log.has_parent_path())
      std::filesystem::create_directories(config.loss_log.parent_path());
    log.open(config.loss_log);
    if (!log) throw IoError("cannot write loss log " + config.loss_log.string());
  }

  const ParamLayout pack_layout = pack(scene).layout;
  Adam adam(learning_rates(pack_layout, config.lrs), config.iterations, config.lr_floor);
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(observations.size()) - 1);
  GradientProvider provider{GradientMode::Hybrid, config.fd_step};

  for (int it = 0; it < config.iterations; ++it) {
    if (config.vote_refresh > 0 && it % config.vote_refresh == 0) {
      if (config.weights.vote > 0.0 && scene.k > 1 &&
          static_cast<int>(scene.gaussians.size()) > config.knn_k) {
        BoundarySet b = detect_boundary(scene, config.knn_k, config.beta);
        if (!b.empty()) {
          vote_regions(b, centers_of(scene.gaussians), scene.k, config.seed + it);
          ctx.boundary = std::move(b);
        } else {
          ctx.boundary.reset();
        }
      }
      if (want_geo) refresh_canonical(scene, observations, ctx);
    }
    const int oi = pick(rng);
    std::vector<int> only{oi};
    GradientResult g =
        gradients(scene, observations, config.weights, config.mode, &ctx, &only, provider);
    if (it < config.joint_warmup) g.grad.head(pack_layout.part(0)).setZero();
    res.history.push_back(g.report);
    res.sampled.push_back(oi);
    if (log) {
      nlohmann::json line = g.report.to_json();
      line["iteration"] = it;
      line["observation"] = oi;
      log << line.dump() << "\n";
    }
    step(scene, adam, g.grad, it);
    if (config.checkpoint_every > 0 && (it + 1) % config.checkpoint_every == 0 &&
        !config.checkpoint_dir.empty()) {
      std::filesystem::create_directories(config.checkpoint_dir);
      save_scene(scene, config.checkpoint_dir / ("checkpoint_" + std::to_string(it + 1) + ".json"));
    }
    spdlog::debug("iteration {} total {:.6e}", it, g.report.total);
  }
  validate(scene);
  return res;
}

FitResult fit(const TwoStateInput& input, const FitConfig& config,
              const std::vector<StateObservation>& views) {
  InitOptions io;
  io.k = config.k;
  io.seed = config.seed;
  io.knn_k = config.knn_k;
  io.beta = config.beta;
  io.temperature = config.temperature;
  TwoStateInput in = input;
  in.tau = config.tau;
  InitResult init = initialize(in, io);

  std::vector<StateObservation> obs;
  if (config.mode == LossMode::Geometry) {
    StateObservation s0, s1;
    s0.t = 0.0;
    s0.gaussians = input.gaussians_t0;
    s1.t = 1.0;
    s1.gaussians = input.gaussians_t1;
    for (const auto& v : views) {
      if (v.t == 0.0) s0.views.insert(s0.views.end(), v.views.begin(), v.views.end());
      if (v.t == 1.0) s1.views.insert(s1.views.end(), v.views.begin(), v.views.end());
    }
    obs = {s0, s1};
  } else {
    for (const auto& v : views)
      if (!v.views.empty()) obs.push_back(v);
    if (obs.empty()) throw ContractError("render mode needs at least one observation with views");
  }
  FitResult res = fit_scene(init.scene, obs, config);
  res.init_report = init.report;
  res.init = std::move(init);
  return res;
}

}  // namespace artikin
