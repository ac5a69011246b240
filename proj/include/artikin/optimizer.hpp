#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "artikin/init.hpp"
#include "artikin/losses.hpp"
#include "artikin/types.hpp"

namespace artikin {

/// Offsets of every trainable block inside a flat parameter vector.
///
/// Joint block (parts 1..k-1): theta, axis(3), pivot(3), translation(3).
/// Part block (parts 0..k-1): O(3), V as axis-angle(3), Lambda(3).
/// Gaussian block: center(3), quaternion w,x,y,z, scale(3), opacity logit,
/// seg logits(k).
struct ParamLayout {
  static constexpr int kJointBlock = 10;
  static constexpr int kPartBlock = 9;

  int k = 2;
  int gaussians = 0;

  int gaussian_block() const { return 11 + k; }
  int joint(int j) const { return (j - 1) * kJointBlock; }
  int part(int j) const { return (k - 1) * kJointBlock + j * kPartBlock; }
  int gaussian(int i) const { return part(k) + i * gaussian_block(); }
  int size() const { return gaussian(gaussians); }
  /// Joint and part-model coordinates come first: [0, model_size()).
  int model_size() const { return part(k); }
};

struct ParamVector {
  ParamLayout layout;
  VectorXd values;
};

ParamVector pack(const ArticulatedScene& scene);

/// Scene from a parameter vector. Axes and quaternions are normalized and V
/// is rebuilt from its axis-angle, so the result is a valid scene for any
/// finite input. k and temperature come from `like`.
ArticulatedScene unpack(const ParamVector& params, const ArticulatedScene& like);

enum class GradientMode { Analytic, FiniteDifference, Hybrid };

struct GradientProvider {
  GradientMode mode = GradientMode::Hybrid;
  /// Central-difference step, relative: h = fd_step * max(1, |x|).
  double fd_step = 1e-4;
};

struct GradientResult {
  LossReport report;
  VectorXd grad;  ///< in ParamLayout order
};

/// Gradient of total_loss over the observations in `only` (all when null).
/// Analytic: chain rule through the blended screw motion and the softmax
/// masks for the point alignment, scale, center and vote terms.
/// FiniteDifference: central differences of total_loss on every coordinate.
/// Hybrid: analytic terms plus central differences of the image terms
/// (photometric and l_geo) on the joint and part-model coordinates only.
/// Canonical renders in `context` are reused and never differentiated.
/// Throws NumericError on a non-finite loss or gradient.
GradientResult gradients(const ArticulatedScene& scene,
                         const std::vector<StateObservation>& observations,
                         const LossWeights& weights, LossMode mode,
                         const LossContext* context = nullptr,
                         const std::vector<int>* only = nullptr,
                         const GradientProvider& provider = {});

struct LearningRates {
  double joints = 1e-3;
  double part_model = 1e-3;
  double seg_logits = 1e-2;
  double gaussians = 2e-4;
};

/// Adam (beta 0.9 / 0.999, eps 1e-8) with per-coordinate base rates and a
/// cosine decay from 1 to `floor` over `horizon` steps.
class Adam {
 public:
  Adam(VectorXd base_lr, int horizon, double floor = 0.01, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8);

  /// One update of x in place at step index `iteration` (0-based).
  void step(VectorXd& x, const VectorXd& grad, int iteration);

  double decay(int iteration) const;

 private:
  VectorXd lr_, m_, v_;
  int horizon_;
  double floor_, beta1_, beta2_, eps_;
  int t_ = 0;
};

/// Base rate of every coordinate of a layout.
VectorXd learning_rates(const ParamLayout& layout, const LearningRates& lrs);

/// Applies one Adam update to the scene and projects it back onto the
/// constraint sets (unit quaternions and axes, theta clamp, orthonormal V,
/// floored scales).
void step(ArticulatedScene& scene, Adam& adam, const VectorXd& grad, int iteration);

struct FitConfig {
  int k = 2;
  LossMode mode = LossMode::Geometry;
  LossWeights weights;
  LearningRates lrs;
  int iterations = 3000;
  std::uint64_t seed = 0;
  double fd_step = 1e-4;
  int vote_refresh = 200;
  int knn_k = 10;
  double beta = 0.2;
  double temperature = 1.0;
  double tau = 0.02;
  double lr_floor = 0.01;
  /// Joint parameters stay fixed for this many leading iterations so the
  /// part masks can sharpen before the joints respond to the blend.
  int joint_warmup = 500;
  int checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;
  std::filesystem::path loss_log;  ///< JSON lines, one per iteration

  /// Settings for fitting against point sets alone: sharper masks
  /// (temperature 0.25) and no vote term. Chamfer alignment cannot see a
  /// splat sliding within its own surface, so soft or vote-mixed masks on
  /// such splats go unpenalized while their lag biases the joints.
  static FitConfig geometry_profile();

  /// Overrides fields present in `j`; unknown keys raise ParseError.
  static FitConfig from_json(const nlohmann::json& j, FitConfig base);
  static FitConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

std::string to_string(LossMode mode);
LossMode loss_mode_from_string(const std::string& s);

struct FitResult {
  ArticulatedScene scene;
  ArticulatedScene initial;
  std::vector<LossReport> history;
  std::vector<int> sampled;  ///< observation index used at every iteration
  nlohmann::json init_report;
  std::optional<InitResult> init;
};

/// Optimization loop from a given scene. Every iteration samples one
/// observation uniformly, evaluates the gradient and takes an Adam step; the
/// vote boundary is re-detected every `vote_refresh` iterations.
FitResult fit_scene(const ArticulatedScene& initial,
                    const std::vector<StateObservation>& observations,
                    const FitConfig& config);

/// Two-state pipeline: initialize, then fit_scene. In geometry mode the two
/// Gaussian sets are the observations; `views` (may be empty) add images
/// per state for the render terms and are required in render mode.
FitResult fit(const TwoStateInput& input, const FitConfig& config,
              const std::vector<StateObservation>& views = {});

}  // namespace artikin
