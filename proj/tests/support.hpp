#pragma once

// Hand-rolled generators and helpers shared by the unit tests.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <unistd.h>
#include <string>
#include <vector>

#include "artikin/types.hpp"

namespace testing {

using namespace artikin;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double normal() { return std::normal_distribution<double>()(rng_); }

  Vector3d vec(double lo = -1.0, double hi = 1.0) {
    return {uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)};
  }
  Vector3d unit() {
    Vector3d v;
    do v = Vector3d(normal(), normal(), normal());
    while (v.norm() < 1e-6);
    return v.normalized();
  }
  Quaterniond quat() {
    Eigen::Vector4d v(normal(), normal(), normal(), normal());
    v.normalize();
    return Quaterniond(v[0], v[1], v[2], v[3]);
  }
  Matrix3d rotation() { return quat().toRotationMatrix(); }

  PlanarGaussian gaussian(int k) {
    PlanarGaussian g;
    g.center = vec();
    g.orientation = quat();
    g.scale = Vector3d(uniform(0.01, 0.1), uniform(0.01, 0.1), uniform(1e-4, 1e-2));
    g.opacity_logit = uniform(-3.0, 3.0);
    g.color = vec(0.0, 1.0);
    g.seg_logits = VectorXd(k);
    for (int j = 0; j < k; ++j) g.seg_logits[j] = uniform(-2.0, 2.0);
    return g;
  }

  JointParams joint() {
    JointParams j;
    j.theta = uniform(-1.2, 1.2);
    j.axis = unit();
    j.pivot = vec();
    j.translation = vec(-0.3, 0.3);
    return j;
  }

  /// Valid scene with random Gaussians, joints and part frames.
  ArticulatedScene scene(int k, int n) {
    ArticulatedScene s;
    s.k = k;
    s.temperature = uniform(0.2, 1.5);
    s.joints.push_back(JointParams::identity());
    for (int j = 1; j < k; ++j) s.joints.push_back(joint());
    s.part_model = PartModel::identity(k);
    for (int j = 0; j < k; ++j) {
      s.part_model.centers[j] = vec();
      s.part_model.orientations[j] = rotation();
      s.part_model.scales[j] = vec(0.5, 3.0);
    }
    for (int i = 0; i < n; ++i) s.gaussians.push_back(gaussian(k));
    return s;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("artikin_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
