#include "artikin/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "artikin/errors.hpp"
#include "artikin/kinematics.hpp"
#include "artikin/parallel.hpp"
#include "artikin/segmentation.hpp"
#include "artikin/spatial.hpp"
#include "mc_tables.hpp"

namespace artikin {

double TriangleMesh::area() const {
  double a = 0.0;
  for (const auto& t : triangles)
    a += 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
  return a;
}

void TriangleMesh::validate() const {
  const int n = static_cast<int>(vertices.size());
  for (std::size_t f = 0; f < triangles.size(); ++f)
    for (int c = 0; c < 3; ++c)
      if (triangles[f][c] < 0 || triangles[f][c] >= n)
        throw InvariantError(fmt::format("mesh.triangles[{}]", f),
                             fmt::format("index {} out of range [0, {})", triangles[f][c], n));
  if (!part.empty() && part.size() != vertices.size())
    throw InvariantError("mesh.part", "one entry per vertex expected");
}

std::vector<int> select_part(const ArticulatedScene& scene, int j) {
  if (j < 0 || j >= scene.k)
    throw ContractError(fmt::format("select_part: part {} outside [0, {})", j, scene.k));
  const std::vector<int> labels = argmax_labels(scene_masks(scene));
  std::vector<int> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == j) out.push_back(static_cast<int>(i));
  return out;
}

GridSpec GridSpec::covering(const Vector3d& lo, const Vector3d& hi, double voxel, double margin) {
  if (!(voxel > 0.0)) throw ContractError("grid voxel must be positive");
  GridSpec g;
  g.voxel = voxel;
  g.origin = lo - Vector3d::Constant(margin);
  const Vector3d span = hi - lo + Vector3d::Constant(2.0 * margin);
  for (int a = 0; a < 3; ++a)
    g.dims[a] = std::max(2, static_cast<int>(std::ceil(span[a] / voxel)) + 1);
  return g;
}

TsdfGrid::TsdfGrid(const GridSpec& spec) : spec_(spec) {
  if (!(spec.voxel > 0.0)) throw ContractError("grid voxel must be positive");
  if ((spec.dims.array() < 2).any()) throw ContractError("grid needs at least 2 points per axis");
  const std::size_t n = static_cast<std::size_t>(spec.dims.x()) * spec.dims.y() * spec.dims.z();
  sdf_.assign(n, spec_.trunc());
  weight_.assign(n, 0.0);
}

void TsdfGrid::integrate(const DepthView& view) {
  const Camera& cam = view.camera;
  if (view.depth.width != cam.width || view.depth.height != cam.height)
    throw ContractError("depth map size does not match its camera");
  const bool has_mask = !view.valid.empty();
  const double trunc = spec_.trunc();
  const Vector3i d = spec_.dims;
  // Each z slice writes its own voxels.
  parallel_for(static_cast<std::size_t>(d.z()), [&](std::size_t kz) {
    const int k = static_cast<int>(kz);
    for (int j = 0; j < d.y(); ++j)
      for (int i = 0; i < d.x(); ++i) {
        const Vector3d pc = cam.world_to_camera * position(i, j, k);
        if (pc.z() <= 1e-9) continue;
        const double u = cam.fx() * pc.x() / pc.z() + cam.cx();
        const double v = cam.fy() * pc.y() / pc.z() + cam.cy();
        const int px = static_cast<int>(std::floor(u)), py = static_cast<int>(std::floor(v));
        if (px < 0 || py < 0 || px >= cam.width || py >= cam.height) continue;
        const double depth = view.depth(px, py);
        if (has_mask ? view.valid(px, py) == 0 : !(depth > 0.0)) continue;
        const double s = depth - pc.z();
        if (s < -trunc) continue;
        const std::size_t idx = index(i, j, k);
        const double w = weight_[idx];
        sdf_[idx] = (sdf_[idx] * w + std::min(s, trunc)) / (w + 1.0);
        weight_[idx] = w + 1.0;
      }
  });
}

void TsdfGrid::assign(const std::function<double(const Vector3d&)>& f) {
  const double trunc = spec_.trunc();
  for (int k = 0; k < spec_.dims.z(); ++k)
    for (int j = 0; j < spec_.dims.y(); ++j)
      for (int i = 0; i < spec_.dims.x(); ++i) {
        const std::size_t idx = index(i, j, k);
        sdf_[idx] = std::clamp(f(position(i, j, k)), -trunc, trunc);
        weight_[idx] = 1.0;
      }
}

namespace {

std::vector<double> view_key(const DepthView& v) {
  std::vector<double> key;
  const Eigen::Matrix4d m = v.camera.world_to_camera.matrix();
  key.insert(key.end(), m.data(), m.data() + 16);
  key.insert(key.end(), v.camera.K.data(), v.camera.K.data() + 9);
  key.push_back(v.camera.width);
  key.push_back(v.camera.height);
  return key;
}

}  // namespace

TsdfGrid fuse(std::vector<DepthView> views, const GridSpec& spec) {
  std::vector<std::vector<double>> keys;
  keys.reserve(views.size());
  for (const auto& v : views) keys.push_back(view_key(v));
  std::vector<std::size_t> order(views.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (keys[a] != keys[b]) return keys[a] < keys[b];
    if (views[a].depth.data != views[b].depth.data) return views[a].depth.data < views[b].depth.data;
    return views[a].valid.data < views[b].valid.data;
  });
  TsdfGrid grid(spec);
  for (std::size_t i : order) grid.integrate(views[i]);
  return grid;
}

TriangleMesh marching_cubes(const TsdfGrid& grid) {
  const Vector3i d = grid.spec().dims;
  TriangleMesh mesh;
  // Vertex per grid edge, keyed by (lower grid point, axis).
  std::unordered_map<std::uint64_t, int> edge_vertex;
  auto vertex_on = [&](const Vector3i& a, const Vector3i& b) {
    Vector3i lo = a.cwiseMin(b);
    int axis = 0;
    while (a[axis] == b[axis]) ++axis;
    const std::uint64_t key = static_cast<std::uint64_t>(grid.index(lo.x(), lo.y(), lo.z())) * 3 + axis;
    auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;
    const double va = grid.sdf(a.x(), a.y(), a.z()), vb = grid.sdf(b.x(), b.y(), b.z());
    const double s = va == vb ? 0.5 : va / (va - vb);
    const Vector3d p = grid.position(a.x(), a.y(), a.z()) +
                       s * (grid.position(b.x(), b.y(), b.z()) - grid.position(a.x(), a.y(), a.z()));
    const int id = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(p);
    edge_vertex.emplace(key, id);
    return id;
  };

  for (int k = 0; k + 1 < d.z(); ++k)
    for (int j = 0; j + 1 < d.y(); ++j)
      for (int i = 0; i + 1 < d.x(); ++i) {
        int cube = 0;
        bool observed = true;
        Vector3i corner[8];
        for (int c = 0; c < 8 && observed; ++c) {
          corner[c] = Vector3i(i + mc::kCorner[c][0], j + mc::kCorner[c][1], k + mc::kCorner[c][2]);
          observed = grid.weight(corner[c].x(), corner[c].y(), corner[c].z()) > 0.0;
          if (grid.sdf(corner[c].x(), corner[c].y(), corner[c].z()) < 0.0) cube |= 1 << c;
        }
        if (!observed || mc::kEdgeTable[cube] == 0) continue;
        const int* tri = mc::kTriTable[cube];
        for (int t = 0; tri[t] >= 0; t += 3) {
          int v[3];
          for (int c = 0; c < 3; ++c) {
            const int e = tri[t + c];
            v[c] = vertex_on(corner[mc::kEdgeCorners[e][0]], corner[mc::kEdgeCorners[e][1]]);
          }
          if (v[0] == v[1] || v[1] == v[2] || v[0] == v[2]) continue;
          const Vector3d n = (mesh.vertices[v[1]] - mesh.vertices[v[0]])
                                 .cross(mesh.vertices[v[2]] - mesh.vertices[v[0]]);
          if (0.5 * n.norm() < 1e-12) continue;
          // The table winds toward the negative side.
          mesh.triangles.emplace_back(v[0], v[2], v[1]);
        }
      }
  return mesh;
}

std::vector<Camera> camera_rig(const Vector3d& center, double extent, int width, int height,
                               double distance_factor, double fov_y_deg) {
  if (!(extent > 0.0)) throw ContractError("camera rig needs a positive extent");
  std::vector<Camera> cams;
  for (int z = -1; z <= 1; ++z)
    for (int y = -1; y <= 1; ++y)
      for (int x = -1; x <= 1; ++x) {
        if (x == 0 && y == 0 && z == 0) continue;
        const Vector3d dir = Vector3d(x, y, z).normalized();
        const Vector3d up = std::abs(dir.z()) > 0.99 ? Vector3d::UnitY() : Vector3d::UnitZ();
        cams.push_back(Camera::look_at(center + distance_factor * extent * dir, center, up,
                                       fov_y_deg, width, height));
      }
  return cams;
}

namespace {

std::pair<Vector3d, Vector3d> bounds(const std::vector<PlanarGaussian>& gs) {
  Vector3d lo = Vector3d::Constant(std::numeric_limits<double>::infinity());
  Vector3d hi = -lo;
  for (const auto& g : gs) {
    lo = lo.cwiseMin(g.center);
    hi = hi.cwiseMax(g.center);
  }
  return {lo, hi};
}

TriangleMesh mesh_of(const std::vector<PlanarGaussian>& gs, const std::vector<Camera>& cams,
                     const GridSpec& spec, const MeshOptions& opts, int part) {
  std::vector<DepthView> views(cams.size());
  parallel_for(cams.size(), [&](std::size_t c) {
    RenderMaps maps = render_gaussians(gs, nullptr, cams[c], opts.render);
    views[c].camera = cams[c];
    views[c].depth = std::move(maps.depth);
    views[c].valid = std::move(maps.depth_valid);
  });
  TriangleMesh mesh = marching_cubes(fuse(std::move(views), spec));
  mesh.part.assign(mesh.vertices.size(), part);
  return mesh;
}

}  // namespace

ExtractedMeshes extract_part_meshes(const ArticulatedScene& scene, double t,
                                    const std::vector<Camera>& cameras,
                                    const MeshOptions& opts) {
  bool clamped = false;
  t = clamp_state(t, &clamped);
  if (clamped) spdlog::warn("mesh: state clamped to {}", t);
  if (scene.gaussians.empty()) throw ContractError("mesh extraction needs Gaussians");
  const std::vector<PlanarGaussian> posed = transform_scene(scene, t);
  const auto [lo, hi] = bounds(posed);

  ExtractedMeshes out;
  const double trunc = opts.truncation > 0.0 ? opts.truncation : 3.0 * opts.voxel;
  GridSpec spec = GridSpec::covering(lo, hi, opts.voxel, trunc + opts.voxel);
  spec.truncation = opts.truncation;
  out.grid = spec;
  const Vector3d center = 0.5 * (lo + hi);
  const double extent = std::max(0.5 * (hi - lo).norm(), opts.voxel);
  out.cameras = cameras.empty() ? camera_rig(center, extent, opts.width, opts.height) : cameras;

  const std::vector<int> labels = argmax_labels(scene_masks(scene));
  for (int j = 0; j < scene.k; ++j) {
    std::vector<PlanarGaussian> part;
    for (std::size_t i = 0; i < posed.size(); ++i)
      if (labels[i] == j) part.push_back(posed[i]);
    if (part.empty()) {
      spdlog::warn("mesh: part {} has no Gaussians, skipped", j);
      continue;
    }
    out.parts.push_back({j, mesh_of(part, out.cameras, spec, opts, j)});
  }
  out.whole = mesh_of(posed, out.cameras, spec, opts, -1);
  out.whole.part.clear();
  return out;
}

std::vector<Vector3d> sample_surface(const TriangleMesh& mesh, int count, std::uint64_t seed) {
  if (mesh.empty()) throw ContractError("cannot sample an empty mesh");
  std::vector<double> cdf(mesh.triangles.size());
  double acc = 0.0;
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    const auto& t = mesh.triangles[f];
    acc += (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]).norm();
    cdf[f] = acc;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<Vector3d> out;
  out.reserve(count);
  for (int s = 0; s < count; ++s) {
    const double r = uni(rng) * acc;
    std::size_t f = std::upper_bound(cdf.begin(), cdf.end(), r) - cdf.begin();
    f = std::min(f, cdf.size() - 1);
    double a = uni(rng), b = uni(rng);
    if (a + b > 1.0) {
      a = 1.0 - a;
      b = 1.0 - b;
    }
    const auto& t = mesh.triangles[f];
    out.push_back(mesh.vertices[t[0]] + a * (mesh.vertices[t[1]] - mesh.vertices[t[0]]) +
                  b * (mesh.vertices[t[2]] - mesh.vertices[t[0]]));
  }
  return out;
}

double mean_surface_distance(const std::vector<Vector3d>& a, const std::vector<Vector3d>& b) {
  if (a.empty() || b.empty()) throw ContractError("surface distance needs non-empty sets");
  auto one_way = [](const std::vector<Vector3d>& from, const std::vector<Vector3d>& to) {
    KdTree tree(to);
    double s = 0.0;
    for (const auto& p : from) s += std::sqrt(tree.nearest(p).sq_dist);
    return s / static_cast<double>(from.size());
  };
  return 0.5 * (one_way(a, b) + one_way(b, a));
}

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  mesh.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& v : mesh.vertices) out << fmt::format("v {:.9g} {:.9g} {:.9g}\n", v.x(), v.y(), v.z());
  for (const auto& t : mesh.triangles) out << fmt::format("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1);
  if (!out) throw IoError("write failed: " + path.string());
}

TriangleMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  TriangleMesh mesh;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      Vector3d v;
      if (!(ss >> v.x() >> v.y() >> v.z()))
        throw ParseError(fmt::format("{}:{}: bad vertex", path.string(), lineno));
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      Vector3i f;
      std::string tok;
      for (int c = 0; c < 3; ++c) {
        if (!(ss >> tok)) throw ParseError(fmt::format("{}:{}: bad face", path.string(), lineno));
        f[c] = std::stoi(tok.substr(0, tok.find('/'))) - 1;
      }
      mesh.triangles.push_back(f);
    }
  }
  mesh.validate();
  return mesh;
}

std::string format_state(double t) {
  std::string s = fmt::format("{:.6f}", t);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s == "-0" ? "0" : s;
}

std::string part_mesh_name(int part, double t) {
  return fmt::format("part_{}_t{}.obj", part, format_state(t));
}

std::string whole_mesh_name(double t) { return fmt::format("whole_t{}.obj", format_state(t)); }

}  // namespace artikin
