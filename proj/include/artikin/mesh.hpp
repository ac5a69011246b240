#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "artikin/renderer.hpp"
#include "artikin/types.hpp"

namespace artikin {

using Eigen::Vector3i;

struct TriangleMesh {
  std::vector<Vector3d> vertices;
  std::vector<Vector3i> triangles;
  std::vector<int> part;  ///< per vertex; empty when unknown

  bool empty() const { return triangles.empty(); }
  double area() const;
  /// Throws InvariantError for an out-of-range index or a mismatched part list.
  void validate() const;
};

/// Indices of the Gaussians whose argmax mask channel is j (ties to the
/// lowest part). Throws ContractError unless 0 <= j < k.
std::vector<int> select_part(const ArticulatedScene& scene, int j);

struct GridSpec {
  Vector3d origin = Vector3d::Zero();  ///< position of grid point (0, 0, 0)
  double voxel = 0.04;
  Vector3i dims = Vector3i::Zero();    ///< grid points per axis
  double truncation = 0.0;             ///< 0 selects 3 * voxel

  double trunc() const { return truncation > 0.0 ? truncation : 3.0 * voxel; }
  /// Grid covering [lo, hi] plus `margin` on every side.
  static GridSpec covering(const Vector3d& lo, const Vector3d& hi, double voxel,
                           double margin);
};

struct DepthView {
  Camera camera;
  ImageF depth;       ///< camera-space z per pixel
  ImageMask valid;    ///< may be empty: then depth > 0 marks valid pixels
};

/// Truncated signed distance samples on the grid points. Positive in front
/// of the observed surface, negative behind it.
class TsdfGrid {
 public:
  explicit TsdfGrid(const GridSpec& spec);

  const GridSpec& spec() const { return spec_; }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * spec_.dims.y() + j) * spec_.dims.x() + i;
  }
  Vector3d position(int i, int j, int k) const {
    return spec_.origin + spec_.voxel * Vector3d(i, j, k);
  }
  double sdf(int i, int j, int k) const { return sdf_[index(i, j, k)]; }
  double weight(int i, int j, int k) const { return weight_[index(i, j, k)]; }
  const std::vector<double>& sdf_values() const { return sdf_; }
  const std::vector<double>& weights() const { return weight_; }

  /// Running weighted average with unit weight per observation; pixels that
  /// are invalid or put the point more than the truncation behind the
  /// surface are skipped.
  void integrate(const DepthView& view);

  /// Samples `f` at every grid point, clamped to the truncation, weight 1.
  void assign(const std::function<double(const Vector3d&)>& f);

 private:
  GridSpec spec_;
  std::vector<double> sdf_;
  std::vector<double> weight_;
};

/// Fuses the views in a canonical order (sorted by camera, then depth data),
/// so the grid is bit-identical for any permutation of `views`.
TsdfGrid fuse(std::vector<DepthView> views, const GridSpec& spec);

/// Zero level set of the grid. Only cells whose eight corners carry weight
/// are polygonized; vertices on shared edges are shared, so closed surfaces
/// come out watertight. Triangles wind counter-clockwise seen from the
/// positive side; zero-area triangles are dropped.
TriangleMesh marching_cubes(const TsdfGrid& grid);

/// Viewpoints spread over a sphere of radius `distance_factor * extent`
/// around `center` (the 26 directions to the neighbors of a cube cell), all
/// looking at the center. `extent` is the scene's bounding radius.
std::vector<Camera> camera_rig(const Vector3d& center, double extent, int width = 160,
                               int height = 160, double distance_factor = 2.5,
                               double fov_y_deg = 50.0);

struct MeshOptions {
  double voxel = 0.04;
  double truncation = 0.0;  ///< 0 selects 3 * voxel
  int width = 160;
  int height = 160;
  RenderOptions render;
};

struct PartMesh {
  int part = 0;
  TriangleMesh mesh;
};

struct ExtractedMeshes {
  std::vector<PartMesh> parts;  ///< parts without Gaussians are omitted
  TriangleMesh whole;
  std::vector<Camera> cameras;
  GridSpec grid;
};

/// Poses the scene at t, then for each part renders depth from every camera,
/// fuses and polygonizes; `whole` uses all Gaussians. Empty `cameras` selects
/// camera_rig around the posed scene. t outside [0, 1] is clamped with a
/// warning.
ExtractedMeshes extract_part_meshes(const ArticulatedScene& scene, double t,
                                    const std::vector<Camera>& cameras = {},
                                    const MeshOptions& opts = {});

/// Area-weighted uniform samples on the surface.
std::vector<Vector3d> sample_surface(const TriangleMesh& mesh, int count, std::uint64_t seed);

/// Symmetric mean nearest-neighbor distance (not squared).
double mean_surface_distance(const std::vector<Vector3d>& a, const std::vector<Vector3d>& b);

/// Wavefront OBJ with `v` and 1-based `f` records.
void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh);
TriangleMesh read_obj(const std::filesystem::path& path);

/// `part_{j}_t{t}.obj` with t printed by format_state.
std::string part_mesh_name(int part, double t);
std::string whole_mesh_name(double t);
/// Shortest decimal form of t that round-trips at 1e-6 ("0", "0.5", "1").
std::string format_state(double t);

}  // namespace artikin
