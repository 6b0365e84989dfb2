#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <vector>

#include "refmesh/geometry.hpp"

namespace refmesh {

// Static kd-tree over 3D points. Build once, query nearest / knn / radius.
class KdTree3 {
public:
    KdTree3() = default;

    explicit KdTree3(std::vector<Vec3> points) : points_(std::move(points)) {
        order_.resize(points_.size());
        std::iota(order_.begin(), order_.end(), 0);
        nodes_.reserve(points_.size());
        if (!order_.empty()) root_ = build(0, static_cast<int>(order_.size()));
    }

    bool empty() const { return points_.empty(); }
    size_t size() const { return points_.size(); }
    const std::vector<Vec3>& points() const { return points_; }

    // Index of the closest point and its squared distance.
    int nearest(const Vec3& q, double* dist2_out = nullptr) const {
        int best = -1;
        double best_d2 = std::numeric_limits<double>::max();
        nearest_rec(root_, q, best, best_d2);
        if (dist2_out) *dist2_out = best_d2;
        return best;
    }

    // k nearest point indices, sorted by ascending distance.
    std::vector<int> knn(const Vec3& q, int k) const {
        Heap heap;
        knn_rec(root_, q, k, heap);
        std::vector<int> out(heap.size());
        size_t i = heap.size();
        while (!heap.empty()) {
            out[--i] = heap.top().second;
            heap.pop();
        }
        return out;
    }

    // All point indices with |p - q| <= r (unsorted).
    std::vector<int> radius(const Vec3& q, double r) const {
        std::vector<int> out;
        radius_rec(root_, q, r * r, out);
        return out;
    }

private:
    struct Node {
        Vec3 point;
        int index = -1;
        int axis = 0;
        int left = -1;
        int right = -1;
    };
    using Heap = std::priority_queue<std::pair<double, int>>;  // max-heap on dist2

    int build(int lo, int hi) {
        if (lo >= hi) return -1;
        Aabb box;
        for (int i = lo; i < hi; ++i) box.expand(points_[order_[i]]);
        int axis = 0;
        const Vec3 ext = box.extent();
        if (ext.y() > ext.x()) axis = 1;
        if (ext.z() > ext[axis]) axis = 2;
        const int mid = (lo + hi) / 2;
        std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                         [&](int a, int b) {
                             if (points_[a][axis] != points_[b][axis])
                                 return points_[a][axis] < points_[b][axis];
                             return a < b;  // deterministic tie-break
                         });
        Node node;
        node.index = order_[mid];
        node.point = points_[node.index];
        node.axis = axis;
        const int self = static_cast<int>(nodes_.size());
        nodes_.push_back(node);
        const int left = build(lo, mid);
        const int right = build(mid + 1, hi);
        nodes_[self].left = left;
        nodes_[self].right = right;
        return self;
    }

    void nearest_rec(int ni, const Vec3& q, int& best, double& best_d2) const {
        if (ni < 0) return;
        const Node& node = nodes_[ni];
        const double d2 = (node.point - q).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && node.index < best)) {
            best_d2 = d2;
            best = node.index;
        }
        const double delta = q[node.axis] - node.point[node.axis];
        const int near = delta <= 0 ? node.left : node.right;
        const int far = delta <= 0 ? node.right : node.left;
        nearest_rec(near, q, best, best_d2);
        if (delta * delta <= best_d2) nearest_rec(far, q, best, best_d2);
    }

    void knn_rec(int ni, const Vec3& q, int k, Heap& heap) const {
        if (ni < 0) return;
        const Node& node = nodes_[ni];
        const double d2 = (node.point - q).squaredNorm();
        if (static_cast<int>(heap.size()) < k) {
            heap.emplace(d2, node.index);
        } else if (d2 < heap.top().first) {
            heap.pop();
            heap.emplace(d2, node.index);
        }
        const double delta = q[node.axis] - node.point[node.axis];
        const int near = delta <= 0 ? node.left : node.right;
        const int far = delta <= 0 ? node.right : node.left;
        knn_rec(near, q, k, heap);
        if (static_cast<int>(heap.size()) < k || delta * delta <= heap.top().first)
            knn_rec(far, q, k, heap);
    }

    void radius_rec(int ni, const Vec3& q, double r2, std::vector<int>& out) const {
        if (ni < 0) return;
        const Node& node = nodes_[ni];
        if ((node.point - q).squaredNorm() <= r2) out.push_back(node.index);
        const double delta = q[node.axis] - node.point[node.axis];
        const int near = delta <= 0 ? node.left : node.right;
        const int far = delta <= 0 ? node.right : node.left;
        radius_rec(near, q, r2, out);
        if (delta * delta <= r2) radius_rec(far, q, r2, out);
    }

    std::vector<Vec3> points_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace refmesh
