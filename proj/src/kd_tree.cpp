#include "sgc/kd_tree.hpp"

#include <algorithm>
#include <queue>

namespace sgc {

namespace {

// Candidate ordering for k-nearest: larger distance is worse, ties broken so
// the higher index is worse. The heap keeps the worst candidate on top.
struct Candidate {
  double dist2;
  Index index;
  bool operator<(const Candidate& o) const {
    if (dist2 != o.dist2) return dist2 < o.dist2;
    return index < o.index;
  }
};

}  // namespace

KdTree::KdTree(std::span<const Vec3> points, int leaf_size)
    : points_(points.begin(), points.end()), leaf_size_(std::max(1, leaf_size)) {
  order_.resize(points_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<Index>(i);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / static_cast<std::size_t>(leaf_size_) + 2);
    root_ = build(0, static_cast<Index>(points_.size()));
  }
}

Index KdTree::build(Index begin, Index end) {
  const Index node_id = static_cast<Index>(nodes_.size());
  nodes_.emplace_back();
  if (end - begin <= leaf_size_) {
    nodes_[node_id].begin = begin;
    nodes_[node_id].end = end;
    return node_id;
  }
  Vec3 lo = points_[static_cast<std::size_t>(order_[static_cast<std::size_t>(begin)])];
  Vec3 hi = lo;
  for (Index i = begin + 1; i < end; ++i) {
    const Vec3& p = points_[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])];
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const Index mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](Index a, Index b) {
                     return points_[static_cast<std::size_t>(a)][axis] <
                            points_[static_cast<std::size_t>(b)][axis];
                   });
  nodes_[node_id].axis = axis;
  nodes_[node_id].split = points_[static_cast<std::size_t>(order_[static_cast<std::size_t>(mid)])][axis];
  const Index left = build(begin, mid);
  const Index right = build(mid, end);
  nodes_[node_id].left = left;
  nodes_[node_id].right = right;
  return node_id;
}

std::vector<Index> KdTree::radius_query(const Vec3& center, double radius) const {
  require(radius > 0.0, "radius_query: radius must be positive");
  std::vector<Index> out;
  if (root_ < 0) return out;
  const double r2 = radius * radius;
  // Box pruning uses per-axis split-plane distances; membership itself is the
  // exact |p - center|^2 <= radius^2 test, so results equal a linear scan.
  struct Frame {
    Index node;
    double dist2;  // lower bound on squared distance to the subtree region
    Vec3 offset;
  };
  std::vector<Frame> frames{{root_, 0.0, Vec3::Zero()}};
  while (!frames.empty()) {
    const Frame frame = frames.back();
    frames.pop_back();
    if (frame.dist2 > r2) continue;
    const Node& node = nodes_[static_cast<std::size_t>(frame.node)];
    if (node.axis < 0) {
      for (Index i = node.begin; i < node.end; ++i) {
        const Index idx = order_[static_cast<std::size_t>(i)];
        if ((points_[static_cast<std::size_t>(idx)] - center).squaredNorm() <= r2)
          out.push_back(idx);
      }
      continue;
    }
    const double delta = center[node.axis] - node.split;
    Index near = node.left, far = node.right;
    if (delta > 0.0) std::swap(near, far);
    // Near side keeps the current bound; far side adds this plane's gap.
    Vec3 far_offset = frame.offset;
    far_offset[node.axis] = delta;
    const double far_dist2 = far_offset.squaredNorm();
    if (far_dist2 <= r2) frames.push_back({far, far_dist2, far_offset});
    frames.push_back({near, frame.dist2, frame.offset});
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Index> KdTree::nearest_query(const Vec3& query, Index k) const {
  require(k >= 1 && k <= size(), "nearest_query: k out of range");
  std::priority_queue<Candidate> heap;  // worst candidate on top
  double worst2 = kInfinity;
  auto consider = [&](Index idx) {
    const double d2 = (points_[static_cast<std::size_t>(idx)] - query).squaredNorm();
    if (static_cast<Index>(heap.size()) < k) {
      heap.push({d2, idx});
    } else if (Candidate{d2, idx} < heap.top()) {
      heap.pop();
      heap.push({d2, idx});
    }
    worst2 = heap.top().dist2;
  };

  struct Frame {
    Index node;
    double dist2;
    Vec3 offset;
  };
  std::vector<Frame> frames{{root_, 0.0, Vec3::Zero()}};
  while (!frames.empty()) {
    const Frame frame = frames.back();
    frames.pop_back();
    if (static_cast<Index>(heap.size()) == k && frame.dist2 > worst2) continue;
    const Node& node = nodes_[static_cast<std::size_t>(frame.node)];
    if (node.axis < 0) {
      for (Index i = node.begin; i < node.end; ++i) consider(order_[static_cast<std::size_t>(i)]);
      continue;
    }
    const double delta = query[node.axis] - node.split;
    Index near = node.left, far = node.right;
    if (delta > 0.0) std::swap(near, far);
    Vec3 far_offset = frame.offset;
    far_offset[node.axis] = delta;
    // Visit near side first; push far side after so it is examined only if
    // still competitive when popped.
    frames.push_back({far, far_offset.squaredNorm(), far_offset});
    frames.push_back({near, frame.dist2, frame.offset});
  }

  std::vector<Index> out(static_cast<std::size_t>(heap.size()));
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = heap.top().index;
    heap.pop();
  }
  return out;
}

Index KdTree::nearest_one(const Vec3& query) const { return nearest_query(query, 1)[0]; }

double KdTree::nearest_distance_squared(const Vec3& query) const {
  const Index i = nearest_one(query);
  return (points_[static_cast<std::size_t>(i)] - query).squaredNorm();
}

}  // namespace sgc
