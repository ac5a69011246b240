#include "artikin/init.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "artikin/cluster.hpp"
#include "artikin/errors.hpp"
#include "artikin/registration.hpp"
#include "artikin/segmentation.hpp"
#include "artikin/so3.hpp"
#include "artikin/spatial.hpp"

namespace artikin {

namespace {

Quaterniond to_quat(const Matrix3d& r) { return Quaterniond(r).normalized(); }

/// g moved rigidly by tf.
PlanarGaussian moved(const PlanarGaussian& g, const RigidTransform& tf) {
  PlanarGaussian out = g;
  out.center = tf.apply(g.center);
  out.orientation = (to_quat(tf.rotation) * g.orientation).normalized();
  return out;
}

PlanarGaussian average(const PlanarGaussian& a, const PlanarGaussian& b) {
  PlanarGaussian out;
  out.center = 0.5 * (a.center + b.center);
  Quaterniond qb = b.orientation;
  if (a.orientation.coeffs().dot(qb.coeffs()) < 0.0) qb.coeffs() = -qb.coeffs();
  out.orientation.coeffs() = 0.5 * (a.orientation.coeffs() + qb.coeffs());
  out.orientation.normalize();
  out.scale = 0.5 * (a.scale + b.scale);
  out.opacity_logit = 0.5 * (a.opacity_logit + b.opacity_logit);
  out.color = 0.5 * (a.color + b.color);
  return out;
}

PlanarGaussian strip_logits(PlanarGaussian g) {
  g.seg_logits.resize(0);
  return g;
}

std::vector<int> members(const std::vector<int>& labels, int part) {
  std::vector<int> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == part) out.push_back(static_cast<int>(i));
  return out;
}

/// Evenly strided subset of [0, n) of size min(n, cap).
std::vector<int> strided(int n, int cap) {
  std::vector<int> out;
  if (n <= cap) {
    out.resize(n);
    std::iota(out.begin(), out.end(), 0);
    return out;
  }
  for (int i = 0; i < cap; ++i)
    out.push_back(static_cast<int>((static_cast<long long>(i) * n) / cap));
  return out;
}

std::vector<Vector3d> gather_centers(const std::vector<PlanarGaussian>& g,
                                     const std::vector<int>& idx,
                                     const RigidTransform& tf = {}) {
  std::vector<Vector3d> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(tf.apply(g[i].center));
  return out;
}

}  // namespace

void TwoStateInput::validate() const {
  if (gaussians_t0.empty()) throw InvariantError("gaussians_t0", "state 0 Gaussian set is empty");
  if (gaussians_t1.empty()) throw InvariantError("gaussians_t1", "state 1 Gaussian set is empty");
  if (!(tau > 0.0 && tau < 1.0)) throw InvariantError("tau", "tau must lie in (0, 1)");
}

std::vector<double> nearest_distances(const std::vector<PlanarGaussian>& a,
                                      const std::vector<PlanarGaussian>& b) {
  if (a.empty() || b.empty()) throw ContractError("nearest_distances needs non-empty sets");
  KdTree tree(centers_of(b));
  std::vector<double> dx(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) dx[i] = std::sqrt(tree.nearest(a[i].center).sq_dist);
  return dx;
}

std::vector<std::uint8_t> identify_dynamic(const std::vector<PlanarGaussian>& a,
                                           const std::vector<PlanarGaussian>& b,
                                           double tau) {
  if (a.empty() || b.empty()) throw ContractError("identify_dynamic needs non-empty sets");
  std::vector<double> dx = nearest_distances(a, b);
  const double x = *std::max_element(dx.begin(), dx.end());
  std::vector<std::uint8_t> flags(a.size(), 0);
  if (x == 0.0) return flags;
  for (std::size_t i = 0; i < a.size(); ++i) flags[i] = dx[i] > tau * x ? 1 : 0;
  return flags;
}

CanonicalSet build_canonical(const TwoStateInput& input, const MotionPartition& partition,
                             int max_core) {
  const auto& A = input.gaussians_t0;
  const auto& B = input.gaussians_t1;
  if (partition.label_t0.size() != A.size() || partition.label_t1.size() != B.size())
    throw ContractError("partition labels do not match the state sizes");
  const int parts = static_cast<int>(partition.motions.size());
  CanonicalSet out;
  auto emit = [&](const PlanarGaussian& g, int sa, int sb, int label) {
    out.gaussians.push_back(strip_logits(g));
    out.source_t0.push_back(sa);
    out.source_t1.push_back(sb);
    out.label.push_back(label);
  };

  for (int part = 0; part < parts; ++part) {
    const RigidTransform& motion = partition.motions[part];
    const RigidTransform half = half_motion(motion);
    const RigidTransform half_inv = half.inverse();
    std::vector<int> ia = members(partition.label_t0, part);
    std::vector<int> ib = members(partition.label_t1, part);
    if (ia.empty() && ib.empty()) continue;
    std::vector<int> partner_a(ia.size(), -1);  // position in ib
    std::vector<char> used_b(ib.size(), 0);

    if (!ia.empty() && !ib.empty()) {
      std::vector<Vector3d> pa = gather_centers(A, ia, motion);
      std::vector<Vector3d> pb = gather_centers(B, ib);
      if (part == 0) {
        // Mutual nearest neighbors.
        KdTree ta(pa), tb(pb);
        for (std::size_t i = 0; i < pa.size(); ++i) {
          int j = tb.nearest(pa[i]).index;
          if (ta.nearest(pb[j]).index == static_cast<int>(i)) {
            partner_a[i] = j;
            used_b[j] = 1;
          }
        }
      } else {
        std::vector<int> ca = strided(static_cast<int>(pa.size()), max_core);
        std::vector<int> cb = strided(static_cast<int>(pb.size()), max_core);
        const int n = static_cast<int>(std::max(ca.size(), cb.size()));
        Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t r = 0; r < ca.size(); ++r)
          for (std::size_t c = 0; c < cb.size(); ++c)
            cost(r, c) = (pa[ca[r]] - pb[cb[c]]).norm();
        std::vector<int> perm = hungarian_match(cost);
        std::vector<char> in_core(pa.size(), 0);
        for (std::size_t r = 0; r < ca.size(); ++r) {
          in_core[ca[r]] = 1;
          if (perm[r] < static_cast<int>(cb.size())) {
            partner_a[ca[r]] = cb[perm[r]];
            used_b[cb[perm[r]]] = 1;
          }
        }
        KdTree tb(pb);
        for (std::size_t i = 0; i < pa.size(); ++i) {
          if (in_core[i]) continue;
          partner_a[i] = tb.nearest(pa[i]).index;
          used_b[partner_a[i]] = 1;
        }
      }
    }

    for (std::size_t i = 0; i < ia.size(); ++i) {
      PlanarGaussian ga = moved(A[ia[i]], half);
      if (partner_a[i] >= 0) {
        const int jb = ib[partner_a[i]];
        emit(average(ga, moved(B[jb], half_inv)), ia[i], jb, part);
      } else {
        emit(ga, ia[i], -1, part);
      }
    }
    for (std::size_t j = 0; j < ib.size(); ++j)
      if (!used_b[j]) emit(moved(B[ib[j]], half_inv), -1, ib[j], part);
  }
  return out;
}

CanonicalSet build_canonical(const TwoStateInput& input,
                             const std::vector<std::uint8_t>& dynamic_t0,
                             const std::vector<std::uint8_t>& dynamic_t1, int max_core) {
  MotionPartition p;
  p.label_t0.assign(dynamic_t0.begin(), dynamic_t0.end());
  p.label_t1.assign(dynamic_t1.begin(), dynamic_t1.end());
  p.motions.assign(2, RigidTransform{});
  return build_canonical(input, p, max_core);
}

PartInit part_model_from_labels(const std::vector<Vector3d>& centers,
                                const std::vector<int>& labels, int k) {
  if (centers.empty()) throw ContractError("part_model_from_labels needs points");
  Vector3d all = Vector3d::Zero();
  for (const auto& c : centers) all += c;
  all /= static_cast<double>(centers.size());
  PartInit init;
  init.model = PartModel::identity(k);
  init.labels = labels;
  init.radii.assign(k, 0.0);
  for (int j = 0; j < k; ++j) {
    Vector3d mean = Vector3d::Zero();
    int n = 0;
    for (std::size_t i = 0; i < centers.size(); ++i)
      if (labels[i] == j) {
        mean += centers[i];
        ++n;
      }
    mean = n > 0 ? Vector3d(mean / n) : all;
    double r = 0.0;
    for (std::size_t i = 0; i < centers.size(); ++i)
      if (labels[i] == j || n == 0) r = std::max(r, (centers[i] - mean).norm());
    r = std::max(r, 1e-3);
    init.model.centers[j] = mean;
    init.model.orientations[j] = Matrix3d::Identity();
    init.model.scales[j] = Vector3d::Constant(1.0 / r);
    init.radii[j] = r;
  }
  return init;
}

PartInit cluster_parts(const std::vector<Vector3d>& centers,
                       const std::vector<std::uint8_t>& dynamic, int k,
                       std::uint64_t seed) {
  if (k < 2) throw ContractError("cluster_parts needs k >= 2");
  if (dynamic.size() != centers.size()) throw ContractError("dynamic flags do not match centers");
  std::vector<int> dyn;
  for (std::size_t i = 0; i < dynamic.size(); ++i)
    if (dynamic[i]) dyn.push_back(static_cast<int>(i));
  if (dyn.empty()) throw ContractError("k parts requested but no motion detected");
  if (static_cast<int>(dyn.size()) < k - 1)
    throw ContractError("fewer dynamic Gaussians than moving parts");
  std::vector<int> labels(centers.size(), 0);
  if (k == 2) {
    for (int i : dyn) labels[i] = 1;
  } else {
    std::vector<Vector3d> pts;
    for (int i : dyn) pts.push_back(centers[i]);
    KMeansResult km = kmeans(pts, k - 1, seed, 50, 8);
    for (std::size_t m = 0; m < dyn.size(); ++m) labels[dyn[m]] = km.labels[m] + 1;
  }
  return part_model_from_labels(centers, labels, k);
}

void assign_seg_logits(std::vector<PlanarGaussian>& gaussians,
                       const std::vector<int>& labels, int k, double c) {
  for (std::size_t i = 0; i < gaussians.size(); ++i) {
    gaussians[i].seg_logits = VectorXd::Zero(k);
    gaussians[i].seg_logits[labels[i]] = c;
  }
}

std::vector<Vector3d> init_pivots(const std::vector<Vector3d>& centers,
                                  const std::vector<int>& labels, int k, int knn_k,
                                  double beta) {
  std::vector<Vector3d> pivots(k, Vector3d::Zero());
  for (int j = 1; j < k; ++j) {
    std::vector<Vector3d> pts;
    std::vector<int> sub;
    Vector3d centroid = Vector3d::Zero();
    int n_part = 0;
    for (std::size_t i = 0; i < centers.size(); ++i) {
      if (labels[i] != 0 && labels[i] != j) continue;
      pts.push_back(centers[i]);
      sub.push_back(labels[i]);
      if (labels[i] == j) {
        centroid += centers[i];
        ++n_part;
      }
    }
    if (n_part > 0) centroid /= n_part;
    pivots[j] = centroid;
    if (n_part == 0 || n_part == static_cast<int>(pts.size()) ||
        static_cast<int>(pts.size()) <= knn_k)
      continue;
    std::vector<int> contact = boundary_indices(pts, sub, knn_k, beta);
    if (contact.empty()) continue;
    Vector3d mean = Vector3d::Zero();
    for (int i : contact) mean += pts[i];
    pivots[j] = mean / static_cast<double>(contact.size());
  }
  return pivots;
}

std::vector<PlanarGaussian> fit_state_gaussians(const OrientedPoints& cloud,
                                                const std::vector<Vector3d>& colors,
                                                const SplatOptions& opts) {
  const int n = static_cast<int>(cloud.points.size());
  if (n < 100) throw ContractError("fit_state_gaussians needs at least 100 points");
  if (cloud.normals.size() != cloud.points.size())
    throw ContractError("point cloud needs one normal per point");
  if (!colors.empty() && colors.size() != cloud.points.size())
    throw ContractError("point cloud colors do not match the points");
  std::vector<int> keep = strided(n, opts.max_points > 0 ? opts.max_points : n);
  std::vector<Vector3d> pts;
  for (int i : keep) pts.push_back(cloud.points[i]);
  KdTree tree(pts);
  std::vector<PlanarGaussian> out(keep.size());
  for (std::size_t m = 0; m < keep.size(); ++m) {
    const int i = keep[m];
    double h = 0.0;
    auto nn = tree.knn(pts[m], opts.neighbors, static_cast<int>(m));
    for (const auto& q : nn) h += std::sqrt(q.sq_dist);
    h = nn.empty() ? 1e-2 : h / static_cast<double>(nn.size());
    h = std::max(h, 1e-6);
    Vector3d nrm = cloud.normals[i].normalized();
    Matrix3d r;
    r.col(0) = nrm.unitOrthogonal();
    r.col(1) = nrm.cross(r.col(0));
    r.col(2) = nrm;
    PlanarGaussian& g = out[m];
    g.center = cloud.points[i];
    g.orientation = Quaterniond(r).normalized();
    g.scale = Vector3d(h, h, h / 10.0);
    g.set_opacity(opts.opacity);
    if (!colors.empty()) g.color = colors[i];
  }
  return out;
}

JointParams joint_from_motion(const RigidTransform& motion, const Vector3d& contact) {
  const RigidTransform half = half_motion(motion);
  JointParams j;
  Vector3d w = so3::log(half.rotation);
  j.theta = w.norm();
  j.axis = j.theta > 1e-12 ? Vector3d(w / j.theta) : Vector3d::UnitZ();
  j.pivot = contact;
  ScrewMotion s = decompose_screw(motion);
  if (s.angle > 1.0 * kPi / 180.0) {
    j.axis = s.axis;
    j.theta = 0.5 * s.angle;
    j.pivot = s.point + s.axis * s.axis.dot(contact - s.point);
  }
  j.theta = std::clamp(j.theta, -kPi / 2.0, kPi / 2.0);
  j.translation = half.apply(j.pivot) - j.pivot;
  return j;
}

namespace {

/// Each Gaussian of `from` goes to the part whose motion best explains it
/// against `to` (static on ties). Gaussians where the two best parts explain
/// it about equally well (distance ratio above 1/2) take the majority label of
/// their neighborhood instead.
std::vector<int> relabel(const std::vector<PlanarGaussian>& from,
                         const std::vector<PlanarGaussian>& to,
                         const std::vector<RigidTransform>& motions, int smooth_k) {
  std::vector<Vector3d> pts = centers_of(from);
  KdTree target(centers_of(to));
  const int parts = static_cast<int>(motions.size());
  std::vector<int> labels(pts.size(), 0);
  std::vector<char> ambiguous(pts.size(), 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double best = std::numeric_limits<double>::infinity(), second = best;
    for (int j = 0; j < parts; ++j) {
      double r = target.nearest(motions[j].apply(pts[i])).sq_dist;
      if (r < best) {
        second = best;
        best = r;
        labels[i] = j;
      } else if (r < second) {
        second = r;
      }
    }
    ambiguous[i] = best > 0.25 * second ? 1 : 0;
  }
  if (smooth_k <= 0 || static_cast<int>(pts.size()) <= smooth_k) return labels;
  KdTree self(pts);
  std::vector<int> smoothed(labels);
  std::vector<int> votes(parts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!ambiguous[i]) continue;
    std::fill(votes.begin(), votes.end(), 0);
    ++votes[labels[i]];
    for (const auto& n : self.knn(pts[i], smooth_k, static_cast<int>(i)))
      if (!ambiguous[n.index]) ++votes[labels[n.index]];
    int top = labels[i];
    for (int j = 0; j < parts; ++j)
      if (votes[j] > votes[top]) top = j;
    smoothed[i] = top;
  }
  return smoothed;
}

/// Median squared distance of a point to its nearest neighbor within the set.
double median_nn_spacing_sq(const std::vector<Vector3d>& pts) {
  if (pts.size() < 2) return 0.0;
  KdTree tree(pts);
  std::vector<double> d;
  for (std::size_t i = 0; i < pts.size(); ++i)
    d.push_back(tree.knn(pts[i], 1, static_cast<int>(i)).front().sq_dist);
  std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
  return d[d.size() / 2];
}

nlohmann::json vec_json(const Vector3d& v) { return {v.x(), v.y(), v.z()}; }

void apply_noise_floor(std::vector<std::uint8_t>& flags, std::vector<double> dx, double mult) {
  std::vector<double> sorted = dx;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double floor = mult * sorted[sorted.size() / 2];
  for (std::size_t i = 0; i < flags.size(); ++i)
    if (dx[i] <= floor) flags[i] = 0;
}

/// Rigid motions of the moving parts from matched (state 0, state 1)
/// pairs, found one at a time by RANSAC: each round keeps the motion with the
/// most pairs within `inlier` and removes those pairs. Minimal samples are
/// drawn from spatial neighborhoods so they tend to come from one part.
std::vector<RigidTransform> sequential_motions(const std::vector<Vector3d>& pa,
                                               const std::vector<Vector3d>& pb, int parts,
                                               double inlier, std::uint64_t seed,
                                               int iterations = 1000) {
  std::vector<RigidTransform> motions;
  std::vector<int> alive(pa.size());
  std::iota(alive.begin(), alive.end(), 0);
  std::mt19937_64 rng(seed);
  const double tol2 = inlier * inlier;
  for (int part = 0; part < parts; ++part) {
    if (alive.size() < 3) {
      motions.push_back(RigidTransform{});
      continue;
    }
    std::vector<Vector3d> alive_a;
    for (int i : alive) alive_a.push_back(pa[i]);
    KdTree tree(alive_a);
    const int hood = std::min<int>(16, static_cast<int>(alive.size()) - 1);
    auto count_inliers = [&](const RigidTransform& m, std::vector<int>* out) {
      int n = 0;
      for (int i : alive) {
        if ((m.apply(pa[i]) - pb[i]).squaredNorm() < tol2) {
          ++n;
          if (out) out->push_back(i);
        }
      }
      return n;
    };
    RigidTransform best;
    int best_n = -1;
    std::uniform_int_distribution<std::size_t> pick(0, alive.size() - 1);
    std::uniform_int_distribution<int> pick_hood(0, hood - 1);
    for (int it = 0; it < iterations; ++it) {
      const std::size_t first = pick(rng);
      auto nn = tree.knn(alive_a[first], hood, static_cast<int>(first));
      int s1 = nn[pick_hood(rng)].index, s2 = nn[pick_hood(rng)].index;
      if (s1 == s2) continue;
      std::vector<Vector3d> src = {pa[alive[first]], pa[alive[s1]], pa[alive[s2]]};
      std::vector<Vector3d> dst = {pb[alive[first]], pb[alive[s1]], pb[alive[s2]]};
      RigidTransform m = kabsch(src, dst);
      int n = count_inliers(m, nullptr);
      if (n > best_n) {
        best_n = n;
        best = m;
      }
    }
    std::vector<int> in;
    for (int round = 0; round < 3; ++round) {
      in.clear();
      count_inliers(best, &in);
      if (in.size() < 3) break;
      std::vector<Vector3d> src, dst;
      for (int i : in) {
        src.push_back(pa[i]);
        dst.push_back(pb[i]);
      }
      best = kabsch(src, dst);
    }
    in.clear();
    count_inliers(best, &in);
    std::vector<int> rest;
    std::set_difference(alive.begin(), alive.end(), in.begin(), in.end(),
                        std::back_inserter(rest));
    alive = rest;
    motions.push_back(best);
  }
  return motions;
}

}  // namespace

InitResult initialize(const TwoStateInput& input, const InitOptions& opts) {
  input.validate();
  const int k = opts.k;
  if (k < 1) throw ContractError("k must be at least 1");
  const auto& A = input.gaussians_t0;
  const auto& B = input.gaussians_t1;

  InitResult res;
  std::vector<std::uint8_t> dyn_a = identify_dynamic(A, B, input.tau);
  std::vector<std::uint8_t> dyn_b = identify_dynamic(B, A, input.tau);
  if (opts.noise_floor > 0.0) {
    apply_noise_floor(dyn_a, nearest_distances(A, B), opts.noise_floor);
    apply_noise_floor(dyn_b, nearest_distances(B, A), opts.noise_floor);
  }
  const int n_dyn_a = static_cast<int>(std::count(dyn_a.begin(), dyn_a.end(), 1));
  const int n_dyn_b = static_cast<int>(std::count(dyn_b.begin(), dyn_b.end(), 1));
  res.report["dynamic"] = {{"t0", n_dyn_a}, {"t1", n_dyn_b}};

  MotionPartition& part = res.partition;
  part.motions.assign(std::max(k, 1), RigidTransform{});
  const bool moving = k >= 2 && n_dyn_a + n_dyn_b >= k - 1;
  if (!moving) {
    if (k >= 2) spdlog::warn("no motion detected between the two states; joints stay identity");
    part.label_t0.assign(A.size(), 0);
    part.label_t1.assign(B.size(), 0);
    res.canonical = build_canonical(input, part, opts.max_core);
  } else {
    CanonicalSet plain = build_canonical(input, dyn_a, dyn_b, opts.max_core);
    std::vector<Vector3d> pc = centers_of(plain.gaussians);
    std::vector<std::uint8_t> flags(plain.label.begin(), plain.label.end());
    PartInit clusters = cluster_parts(pc, flags, k, opts.seed);

    part.label_t0.assign(A.size(), 0);
    part.label_t1.assign(B.size(), 0);
    const bool by_pairs = k > 2 && opts.refine_rounds > 0;
    if (by_pairs) {
      // Several moving parts: midpoints of cross-part pairs blur spatial
      // clusters, so the motions come straight from the pairs and the
      // relabeling below assigns the Gaussians.
      std::vector<Vector3d> pa, pb;
      for (std::size_t c = 0; c < plain.gaussians.size(); ++c) {
        if (plain.label[c] == 0 || plain.source_t0[c] < 0 || plain.source_t1[c] < 0) continue;
        pa.push_back(A[plain.source_t0[c]].center);
        pb.push_back(B[plain.source_t1[c]].center);
      }
      std::vector<Vector3d> moving_a;
      for (std::size_t i = 0; i < A.size(); ++i)
        if (dyn_a[i]) moving_a.push_back(A[i].center);
      const double spacing = std::sqrt(median_nn_spacing_sq(moving_a));
      std::vector<RigidTransform> found =
          sequential_motions(pa, pb, k - 1, std::max(spacing, 1e-6), opts.seed);
      for (int j = 1; j < k; ++j) part.motions[j] = found[j - 1];
    } else {
      for (std::size_t c = 0; c < plain.gaussians.size(); ++c) {
        if (plain.source_t0[c] >= 0) part.label_t0[plain.source_t0[c]] = clusters.labels[c];
        if (plain.source_t1[c] >= 0) part.label_t1[plain.source_t1[c]] = clusters.labels[c];
      }
    }
    // Rigid motion per cluster, seeded by the matched pairs.
    for (int j = 1; j < k && !by_pairs; ++j) {
      std::vector<int> ia = members(part.label_t0, j), ib = members(part.label_t1, j);
      if (ia.size() < 3 || ib.size() < 3) continue;
      std::map<int, int> pos_a, pos_b;
      for (std::size_t m = 0; m < ia.size(); ++m) pos_a[ia[m]] = static_cast<int>(m);
      for (std::size_t m = 0; m < ib.size(); ++m) pos_b[ib[m]] = static_cast<int>(m);
      std::vector<std::pair<int, int>> pairs;
      for (std::size_t c = 0; c < plain.gaussians.size(); ++c) {
        if (plain.source_t0[c] < 0 || plain.source_t1[c] < 0) continue;
        auto a = pos_a.find(plain.source_t0[c]);
        auto b = pos_b.find(plain.source_t1[c]);
        if (a != pos_a.end() && b != pos_b.end()) pairs.emplace_back(a->second, b->second);
      }
      part.motions[j] = register_rigid(gather_centers(A, ia), gather_centers(B, ib), &pairs);
    }
    // Motion-consistent relabeling, then ICP on the refined sets.
    for (int round = 0; round < opts.refine_rounds; ++round) {
      part.label_t0 = relabel(A, B, part.motions, 8);
      std::vector<RigidTransform> inverse;
      for (const auto& m : part.motions) inverse.push_back(m.inverse());
      part.label_t1 = relabel(B, A, inverse, 8);
      for (int j = 1; j < k; ++j) {
        std::vector<int> ia = members(part.label_t0, j), ib = members(part.label_t1, j);
        if (ia.size() < 3 || ib.size() < 3) continue;
        KdTree tb(gather_centers(B, ib));
        part.motions[j] = icp(gather_centers(A, ia), tb, part.motions[j]).transform;
      }
    }
    if (opts.refine_rounds == 0) {
      // Plain midpoints; the motions only seed the joints.
      res.canonical = plain;
      res.canonical.label = clusters.labels;
    } else {
      res.canonical = build_canonical(input, part, opts.max_core);
    }
  }

  std::vector<Vector3d> centers = centers_of(res.canonical.gaussians);
  const int kk = std::max(k, 1);
  PartInit model = part_model_from_labels(centers, res.canonical.label, kk);
  std::vector<Vector3d> pivots =
      moving ? init_pivots(centers, res.canonical.label, kk, opts.knn_k, opts.beta)
             : std::vector<Vector3d>(kk, model.model.centers[0]);

  ArticulatedScene& scene = res.scene;
  scene.k = kk;
  scene.temperature = opts.temperature;
  scene.gaussians = res.canonical.gaussians;
  assign_seg_logits(scene.gaussians, res.canonical.label, kk);
  scene.part_model = model.model;
  scene.joints.assign(kk, JointParams::identity());
  for (int j = 1; j < kk; ++j) {
    if (moving) {
      scene.joints[j] = joint_from_motion(part.motions[j], pivots[j]);
    } else {
      scene.joints[j].pivot = pivots[j];
    }
  }
  renormalize(scene);
  validate(scene);

  nlohmann::json parts = nlohmann::json::array();
  for (int j = 0; j < kk; ++j) {
    ScrewMotion s = decompose_screw(part.motions[j]);
    parts.push_back({{"part", j},
                     {"count", std::count(res.canonical.label.begin(), res.canonical.label.end(), j)},
                     {"radius", model.radii[j]},
                     {"center", vec_json(model.model.centers[j])},
                     {"pivot", vec_json(scene.joints[j].pivot)},
                     {"motion_angle_deg", s.angle * 180.0 / kPi},
                     {"motion_shift", vec_json(part.motions[j].translation)}});
  }
  res.report["canonical_count"] = scene.gaussians.size();
  res.report["moving"] = moving;
  res.report["parts"] = parts;
  spdlog::info("init: {} canonical Gaussians, dynamic {}/{}", scene.gaussians.size(),
               n_dyn_a, n_dyn_b);
  return res;
}

}  // namespace artikin
