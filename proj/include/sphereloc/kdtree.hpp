#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <span>
#include <vector>

#include "sphereloc/errors.hpp"

namespace sphereloc {

struct Neighbor {
  std::uint32_t id = 0;
  double distance_sq = 0.0;

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.distance_sq < b.distance_sq || (a.distance_sq == b.distance_sq && a.id < b.id);
  }
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct KdQueryStats {
  std::size_t visited_nodes = 0;
  std::size_t distance_evaluations = 0;
};

/// Squared L2 distance accumulated in double, dimension by dimension.
template <typename Scalar>
double squared_distance(std::span<const Scalar> a, std::span<const Scalar> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return sum;
}

/// Exact k-nearest-neighbour index over fixed-dimension points.
///
/// Balanced tree: each inner node splits at the median of its widest
/// dimension. Queries backtrack fully, so results always equal a brute-force
/// scan ordered by (distance, id).
template <typename Scalar>
class KdTree {
 public:
  KdTree() = default;

  /// points holds count * dim values, row-major.
  KdTree(std::vector<Scalar> points, std::size_t dim, std::size_t leaf_size = 8)
      : points_(std::move(points)), dim_(dim), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
    if (dim_ == 0 || points_.size() % dim_ != 0) {
      throw ShapeError("kd-tree point buffer is not a multiple of the dimension");
    }
    const std::size_t n = points_.size() / dim_;
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0u);
    if (n > 0) {
      nodes_.reserve(2 * n / leaf_size_ + 1);
      build(0, static_cast<std::uint32_t>(n));
    }
  }

  std::size_t size() const { return order_.size(); }
  std::size_t dim() const { return dim_; }

  std::span<const Scalar> point(std::uint32_t id) const {
    return {points_.data() + static_cast<std::size_t>(id) * dim_, dim_};
  }

  /// Up to k neighbours with squared distance <= max_distance_sq, ascending
  /// by (distance, id).
  std::vector<Neighbor> knn(std::span<const Scalar> query, std::size_t k,
                            double max_distance_sq = std::numeric_limits<double>::infinity(),
                            KdQueryStats* stats = nullptr) const {
    if (query.size() != dim_) throw ShapeError("kd-tree query has wrong dimension");
    std::vector<Neighbor> heap;
    if (k == 0 || nodes_.empty()) return heap;
    heap.reserve(k + 1);
    Search search{query, k, max_distance_sq, heap, stats};
    visit(0, search);
    std::sort_heap(heap.begin(), heap.end());
    return heap;
  }

 private:
  struct Node {
    std::uint32_t begin = 0, end = 0;
    std::int32_t split_dim = -1;  // -1 marks a leaf
    double split_value = 0.0;
    std::uint32_t left = 0, right = 0;
  };

  struct Search {
    std::span<const Scalar> query;
    std::size_t k;
    double max_distance_sq;
    std::vector<Neighbor>& heap;  // max-heap on (distance, id)
    KdQueryStats* stats;

    double bound() const { return heap.size() < k ? max_distance_sq : heap.front().distance_sq; }

    void offer(const Neighbor& n) {
      if (n.distance_sq > max_distance_sq) return;
      if (heap.size() < k) {
        heap.push_back(n);
        std::push_heap(heap.begin(), heap.end());
      } else if (n < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = n;
        std::push_heap(heap.begin(), heap.end());
      }
    }
  };

  double coord(std::uint32_t id, std::size_t d) const {
    return static_cast<double>(points_[static_cast<std::size_t>(id) * dim_ + d]);
  }

  std::uint32_t build(std::uint32_t begin, std::uint32_t end) {
    const auto index = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(Node{begin, end});

    if (end - begin <= leaf_size_) return index;

    std::size_t best_dim = 0;
    double best_spread = -1.0;
    for (std::size_t d = 0; d < dim_; ++d) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (std::uint32_t i = begin; i < end; ++i) {
        const double v = coord(order_[i], d);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > best_spread) {
        best_spread = hi - lo;
        best_dim = d;
      }
    }
    if (best_spread <= 0.0) return index;  // all points identical

    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       const double va = coord(a, best_dim), vb = coord(b, best_dim);
                       return va < vb || (va == vb && a < b);
                     });
    const double split = coord(order_[mid], best_dim);
    const std::uint32_t left = build(begin, mid);
    const std::uint32_t right = build(mid, end);
    Node& node = nodes_[index];
    node.split_dim = static_cast<std::int32_t>(best_dim);
    node.split_value = split;
    node.left = left;
    node.right = right;
    return index;
  }

  void visit(std::uint32_t index, Search& s) const {
    const Node& node = nodes_[index];
    if (s.stats) ++s.stats->visited_nodes;
    if (node.split_dim < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t id = order_[i];
        if (s.stats) ++s.stats->distance_evaluations;
        s.offer(Neighbor{id, squared_distance<Scalar>(s.query, point(id))});
      }
      return;
    }
    const double diff =
        static_cast<double>(s.query[static_cast<std::size_t>(node.split_dim)]) - node.split_value;
    const std::uint32_t near = diff < 0.0 ? node.left : node.right;
    const std::uint32_t far = diff < 0.0 ? node.right : node.left;
    visit(near, s);
    // Points on the far side are at least |diff| away along the split axis.
    if (diff * diff <= s.bound()) visit(far, s);
  }

  std::vector<Scalar> points_;
  std::size_t dim_ = 0;
  std::size_t leaf_size_ = 8;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace sphereloc
