#include "artikin/spatial.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "artikin/errors.hpp"

namespace artikin {

namespace {

constexpr int kLeafSize = 8;

bool closer(const Neighbor& a, const Neighbor& b) {
  return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.index < b.index);
}

}  // namespace

KdTree::KdTree(std::vector<Vector3d> points) : points_(std::move(points)) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0);
  if (!points_.empty()) build(0, static_cast<int>(points_.size()));
}

int KdTree::build(int begin, int end) {
  int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) return id;

  Vector3d lo = Vector3d::Constant(std::numeric_limits<double>::infinity());
  Vector3d hi = -lo;
  for (int i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int dim = 0;
  (hi - lo).maxCoeff(&dim);
  int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](int a, int b) {
                     return points_[a][dim] < points_[b][dim];
                   });
  double split = points_[order_[mid]][dim];
  int left = build(begin, mid);
  int right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  nodes_[id].dim = dim;
  nodes_[id].split = split;
  return id;
}

void KdTree::search(int node_id, const Vector3d& q, int k, int skip,
                    std::vector<Neighbor>& heap) const {
  const Node& node = nodes_[node_id];
  if (node.left < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      int idx = order_[i];
      if (idx == skip) continue;
      Neighbor n{idx, (points_[idx] - q).squaredNorm()};
      if (static_cast<int>(heap.size()) < k) {
        heap.push_back(n);
        std::push_heap(heap.begin(), heap.end(), closer);
      } else if (closer(n, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), closer);
        heap.back() = n;
        std::push_heap(heap.begin(), heap.end(), closer);
      }
    }
    return;
  }
  double diff = q[node.dim] - node.split;
  int first = diff < 0 ? node.left : node.right;
  int second = diff < 0 ? node.right : node.left;
  search(first, q, k, skip, heap);
  // Points equal to the split value can sit on either side, hence <=.
  if (static_cast<int>(heap.size()) < k || diff * diff <= heap.front().sq_dist)
    search(second, q, k, skip, heap);
}

Neighbor KdTree::nearest(const Vector3d& q) const {
  if (points_.empty()) throw ContractError("nearest() on an empty tree");
  std::vector<Neighbor> heap;
  heap.reserve(1);
  search(0, q, 1, -1, heap);
  return heap.front();
}

std::vector<Neighbor> KdTree::knn(const Vector3d& q, int k, int skip) const {
  std::vector<Neighbor> heap;
  if (points_.empty() || k <= 0) return heap;
  heap.reserve(k);
  search(0, q, k, skip, heap);
  std::sort_heap(heap.begin(), heap.end(), closer);
  return heap;
}

double mean_nn_sq_distance(const std::vector<Vector3d>& from, const KdTree& to) {
  if (from.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& p : from) sum += to.nearest(p).sq_dist;
  return sum / static_cast<double>(from.size());
}

double chamfer_sq(const std::vector<Vector3d>& a, const std::vector<Vector3d>& b) {
  if (a.empty() || b.empty()) throw ContractError("chamfer of an empty set");
  KdTree ta(a), tb(b);
  return 0.5 * (mean_nn_sq_distance(a, tb) + mean_nn_sq_distance(b, ta));
}

std::vector<Vector3d> centers_of(const std::vector<PlanarGaussian>& gaussians) {
  std::vector<Vector3d> out;
  out.reserve(gaussians.size());
  for (const auto& g : gaussians) out.push_back(g.center);
  return out;
}

}  // namespace artikin
