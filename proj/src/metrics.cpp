#include "artikin/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "artikin/cluster.hpp"
#include "artikin/errors.hpp"
#include "artikin/kinematics.hpp"
#include "artikin/segmentation.hpp"
#include "artikin/so3.hpp"
#include "artikin/spatial.hpp"

namespace artikin {

namespace {

constexpr double kDeg = 180.0 / kPi;

/// State-0 to state-1 motion of a joint.
RigidTransform relative_motion(const JointParams& j) {
  return joint_transform(j, 1.0) * joint_transform(j, 0.0).inverse();
}

}  // namespace

double axis_angle_error(const Vector3d& pred, const Vector3d& gt) {
  const Vector3d a = pred.normalized(), b = gt.normalized();
  return std::atan2(a.cross(b).norm(), std::abs(a.dot(b))) * kDeg;
}

double axis_pos_error(const Vector3d& pred_axis, const Vector3d& pred_point,
                      const Vector3d& gt_axis, const Vector3d& gt_point) {
  const Vector3d a = pred_axis.normalized(), b = gt_axis.normalized();
  const Vector3d d = gt_point - pred_point;
  const Vector3d n = a.cross(b);
  const double nn = n.norm();
  double dist;
  if (nn < 1e-9) {
    dist = d.cross(a).norm();
  } else {
    dist = std::abs(d.dot(n)) / nn;
  }
  return 100.0 * dist;
}

MotionError part_motion_error(const JointParams& pred, const GroundTruthJoint& gt) {
  MotionError e;
  const Matrix3d rp = so3::exp(pred.axis.normalized() * 2.0 * pred.theta);
  const Matrix3d rg = so3::exp(gt.axis.normalized() * gt.rotation_deg / kDeg);
  e.rot_deg = so3::angle_between(rp, rg) * kDeg;
  e.trans = (2.0 * pred.translation - gt.translation).norm();
  return e;
}

double chamfer_x1000(const std::vector<Vector3d>& a, const std::vector<Vector3d>& b) {
  if (a.empty() || b.empty()) throw ContractError("chamfer needs non-empty point sets");
  return 1000.0 * chamfer_sq(a, b);
}

double label_agreement(const std::vector<int>& pred, const std::vector<int>& truth, int k) {
  if (pred.size() != truth.size() || pred.empty())
    throw ContractError("label_agreement needs equally sized, non-empty label lists");
  Eigen::MatrixXd confusion = Eigen::MatrixXd::Zero(k, k);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || pred[i] >= k || truth[i] < 0 || truth[i] >= k)
      throw ContractError("label outside [0, k)");
    confusion(pred[i], truth[i]) += 1.0;
  }
  std::vector<int> perm = hungarian_match(-confusion);
  double hits = 0.0;
  for (int r = 0; r < k; ++r) hits += confusion(r, perm[r]);
  return hits / static_cast<double>(pred.size());
}

std::vector<int> match_parts(const std::vector<JointParams>& joints, const GroundTruth& gt,
                             const std::vector<Vector3d>& points) {
  const int n = static_cast<int>(gt.joints.size());
  const int m = static_cast<int>(joints.size()) - 1;
  std::vector<int> out(n + 1, 0);
  if (n == 0 || m <= 0) return out;
  const int size = std::max(n, m);
  Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(size, size);
  for (int g = 0; g < n; ++g) {
    const RigidTransform truth = gt.joints[g].motion();
    std::vector<Vector3d> pts;
    for (std::size_t i = 0; i < points.size() && i < gt.labels.size(); ++i)
      if (gt.labels[i] == g + 1) pts.push_back(points[i]);
    if (pts.empty()) pts.push_back(gt.joints[g].pivot);
    for (int p = 0; p < m; ++p) {
      const RigidTransform pred = relative_motion(joints[p + 1]);
      double sum = 0.0;
      for (const auto& x : pts) sum += (pred.apply(x) - truth.apply(x)).norm();
      cost(g, p) = sum / static_cast<double>(pts.size());
    }
  }
  std::vector<int> perm = hungarian_match(cost);
  for (int g = 0; g < n; ++g) out[g + 1] = perm[g] < m ? perm[g] + 1 : 0;
  return out;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json js = nlohmann::json::array();
  for (const auto& j : joints) {
    nlohmann::json e = {{"part", j.part},
                        {"gt_part", j.gt_part},
                        {"kind", to_string(j.kind)},
                        {"axis_ang", j.axis_ang},
                        {"axis_pos_cm", nullptr},
                        {"part_motion", {{"rot_deg", j.motion.rot_deg}, {"trans", j.motion.trans}}},
                        {"theta_total_deg", j.theta_total_deg}};
    if (j.axis_pos_cm) e["axis_pos_cm"] = *j.axis_pos_cm;
    if (j.kind == JointKind::Prismatic) {
      e["trans_dir_deg"] = j.trans_dir_deg;
      e["trans_mag_err"] = j.trans_mag_err;
    }
    js.push_back(e);
  }
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"joints", js}, {"cd_s", opt(cd_s)}, {"cd_m", opt(cd_m)}, {"cd_w", opt(cd_w)}};
}

MetricReport evaluate(const ArticulatedScene& scene, const GroundTruth& gt,
                      const std::vector<Vector3d>* truth_points) {
  MetricReport rep;
  std::vector<int> match(gt.joints.size() + 1, 0);
  if (truth_points != nullptr) {
    match = match_parts(scene.joints, gt, *truth_points);
  } else {
    for (std::size_t g = 1; g <= gt.joints.size(); ++g)
      match[g] = static_cast<int>(g) < scene.k ? static_cast<int>(g) : 0;
  }
  for (std::size_t g = 0; g < gt.joints.size(); ++g) {
    const GroundTruthJoint& truth = gt.joints[g];
    const JointParams& pred = scene.joints[match[g + 1]];
    JointReport r;
    r.part = match[g + 1];
    r.gt_part = static_cast<int>(g) + 1;
    r.kind = truth.kind;
    r.motion = part_motion_error(pred, truth);
    r.theta_total_deg = 2.0 * pred.theta * kDeg;
    if (truth.kind == JointKind::Prismatic) {
      const Vector3d slide = 2.0 * pred.translation;
      r.trans_dir_deg = slide.norm() > 0.0
                            ? std::acos(std::clamp(slide.normalized().dot(truth.translation.normalized()),
                                                   -1.0, 1.0)) * kDeg
                            : 180.0;
      r.trans_mag_err = std::abs(slide.norm() - truth.translation.norm());
      r.axis_ang = r.trans_dir_deg;
    } else {
      r.axis_ang = axis_angle_error(pred.axis, truth.axis);
      r.axis_pos_cm = axis_pos_error(pred.axis, pred.pivot, truth.axis, truth.pivot);
    }
    rep.joints.push_back(r);
  }

  if (truth_points != nullptr && truth_points->size() == gt.labels.size()) {
    std::vector<PlanarGaussian> posed = transform_scene(scene, 0.0);
    std::vector<int> labels = argmax_labels(scene_masks(scene));
    std::vector<Vector3d> whole = centers_of(posed);
    rep.cd_w = chamfer_x1000(whole, *truth_points);
    double sum_m = 0.0;
    int n_m = 0;
    for (std::size_t g = 0; g <= gt.joints.size(); ++g) {
      std::vector<Vector3d> pred_pts, true_pts;
      for (std::size_t i = 0; i < posed.size(); ++i)
        if (labels[i] == match[g]) pred_pts.push_back(posed[i].center);
      for (std::size_t i = 0; i < truth_points->size(); ++i)
        if (gt.labels[i] == static_cast<int>(g)) true_pts.push_back((*truth_points)[i]);
      if (pred_pts.empty() || true_pts.empty()) continue;
      double cd = chamfer_x1000(pred_pts, true_pts);
      if (g == 0) {
        rep.cd_s = cd;
      } else {
        sum_m += cd;
        ++n_m;
      }
    }
    if (n_m > 0) rep.cd_m = sum_m / n_m;
  }
  return rep;
}

}  // namespace artikin
