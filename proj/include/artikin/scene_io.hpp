#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "artikin/types.hpp"

namespace artikin {

namespace fs = std::filesystem;

/// Gaussian sets as PLY: x,y,z, quat_w..z, scale_x..z, opacity (pre-sigmoid
/// logit), r,g,b, seg_logit_0..k-1. Written as float64; any scalar type is
/// accepted on read. A file without seg_logit columns loads with k = 0.
void save_gaussians(const fs::path& path, const std::vector<PlanarGaussian>& g);
std::vector<PlanarGaussian> load_gaussians(const fs::path& path);

/// A scene is a JSON metadata file plus a PLY next to it holding the
/// Gaussians (`gaussians` key, relative to the JSON). Loading renormalizes
/// quaternions and axes and then validates every invariant.
void save_scene(const ArticulatedScene& scene, const fs::path& json_path);
ArticulatedScene load_scene(const fs::path& json_path);

/// Cameras: JSON list of {K: 9 floats row-major, pose: 12 floats row-major
/// world-to-camera [R|t], width, height}.
std::vector<Camera> load_cameras(const fs::path& path);
void save_cameras(const fs::path& path, const std::vector<Camera>& cams);
nlohmann::json camera_to_json(const Camera& c);
Camera camera_from_json(const nlohmann::json& j, const std::string& path);

struct OrientedPoints {
  std::vector<Vector3d> points;
  std::vector<Vector3d> normals;
};

/// PLY with x,y,z,nx,ny,nz.
OrientedPoints load_point_cloud(const fs::path& path);
void save_point_cloud(const fs::path& path, const OrientedPoints& pc);

/// Per-vertex argmax part id export for visualization.
void save_labeled_points(const fs::path& path, const std::vector<Vector3d>& points,
                         const std::vector<int>& labels);

nlohmann::json read_json(const fs::path& path);
void write_json(const fs::path& path, const nlohmann::json& j);

}  // namespace artikin
