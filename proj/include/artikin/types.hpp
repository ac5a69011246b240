#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace artikin {

using Eigen::Matrix3d;
using Eigen::Quaterniond;
using Eigen::Vector3d;
using Eigen::VectorXd;

constexpr double kPi = 3.14159265358979323846;
/// Canonical state: every joint transform is the identity here.
constexpr double kCanonicalState = 0.5;
constexpr double kScaleFloor = 1e-7;
constexpr double kUnitTolerance = 1e-6;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// One planar splat. Opacity is kept as an unconstrained pre-activation so
/// the effective opacity sigmoid(opacity_logit) always lies in (0, 1).
struct PlanarGaussian {
  Vector3d center = Vector3d::Zero();
  Quaterniond orientation = Quaterniond::Identity();
  Vector3d scale = Vector3d::Constant(1e-2);
  double opacity_logit = 0.0;
  Vector3d color = Vector3d::Constant(0.5);
  VectorXd seg_logits;

  double opacity() const { return sigmoid(opacity_logit); }
  void set_opacity(double p) { opacity_logit = logit(p); }

  /// Index of the smallest scale component.
  int shortest_axis() const;
  /// World-space direction of the shortest axis (sign arbitrary).
  Vector3d normal() const;
};

/// Decoupled screw parameters of one joint. The motion at state t is
/// R(theta(t), axis) (x - pivot) + pivot + translation(t).
struct JointParams {
  double theta = 0.0;
  Vector3d axis = Vector3d::UnitZ();
  Vector3d pivot = Vector3d::Zero();
  Vector3d translation = Vector3d::Zero();

  static JointParams identity() { return {}; }
  bool is_identity() const { return theta == 0.0 && translation.isZero(0.0); }
};

/// Learnable part frames for distance-based segmentation.
struct PartModel {
  std::vector<Vector3d> centers;
  std::vector<Matrix3d> orientations;
  std::vector<Vector3d> scales;

  int size() const { return static_cast<int>(centers.size()); }
  static PartModel identity(int k);
};

/// Pinhole camera. `world_to_camera` maps world points into the camera frame
/// (x right, y down, z forward).
struct Camera {
  Matrix3d K = Matrix3d::Identity();
  Eigen::Isometry3d world_to_camera = Eigen::Isometry3d::Identity();
  int width = 0;
  int height = 0;

  double fx() const { return K(0, 0); }
  double fy() const { return K(1, 1); }
  double cx() const { return K(0, 2); }
  double cy() const { return K(1, 2); }
  Vector3d center() const { return world_to_camera.inverse().translation(); }

  /// Camera at `eye` looking at `target`; y axis is aligned with -`up`.
  static Camera look_at(const Vector3d& eye, const Vector3d& target,
                        const Vector3d& up, double fov_y_deg, int width,
                        int height);
};

struct ArticulatedScene {
  std::vector<PlanarGaussian> gaussians;
  /// joints[0] is the static part and stays the identity.
  std::vector<JointParams> joints;
  PartModel part_model;
  int k = 2;
  /// Softmax temperature of the part masks.
  double temperature = 1.0;
};

template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, const T& fill = T{})
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  T& operator()(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& operator()(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  bool empty() const { return data.empty(); }
};

using ImageRGB = Image<Vector3d>;
using ImageF = Image<double>;

struct View {
  Camera camera;
  ImageRGB image;
};

struct StateObservation {
  double t = 0.0;
  std::vector<View> views;
  std::optional<std::vector<PlanarGaussian>> gaussians;
};

// Invariant checks. Each throws InvariantError naming the offending field.
void validate(const PlanarGaussian& g, int k, const std::string& path);
void validate(const JointParams& j, const std::string& path);
void validate(const PartModel& pm, int k, const std::string& path);
void validate(const Camera& c, const std::string& path);
void validate(const ArticulatedScene& s);
void validate(const StateObservation& o, const std::string& path);

// Post-step projections back onto the constraint sets.
void renormalize(PlanarGaussian& g);
void renormalize(JointParams& j);
void renormalize(PartModel& pm);
void renormalize(ArticulatedScene& s);

/// Nearest rotation matrix (polar decomposition, det +1).
Matrix3d nearest_rotation(const Matrix3d& m);

}  // namespace artikin
