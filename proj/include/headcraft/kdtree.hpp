// kdtree.hpp — exact nearest-neighbor index over 3D points.
//
// Median-split kd-tree. Queries are exact and tie-stable: among equally near
// points the lowest original index wins, which keeps results identical to a
// brute-force scan — the precision the correspondence and oracle tests rely
// on. The tree is immutable after construction; concurrent queries are fine.
#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "headcraft/vec3.hpp"

namespace headcraft {

class PointIndex {
public:
    PointIndex() = default;

    explicit PointIndex(std::vector<Vec3> points) : points_(std::move(points)) {
        if (points_.empty()) throw std::runtime_error("PointIndex: empty point set");
        order_.resize(points_.size());
        for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
        nodes_.reserve(2 * points_.size());
        root_ = build(0, points_.size());
    }

    std::size_t size() const { return points_.size(); }
    const std::vector<Vec3>& points() const { return points_; }

    struct Hit {
        int index = -1;
        double dist2 = std::numeric_limits<double>::infinity();
    };

    Hit nearest(const Vec3& q) const {
        Hit best;
        search(root_, q, best);
        return best;
    }

private:
    struct Node {
        int axis = -1;        // -1 marks a leaf
        double split = 0.0;
        int left = -1, right = -1;
        int begin = 0, end = 0;  // leaf range in order_
    };

    static constexpr std::size_t kLeafSize = 12;

    int build(std::size_t begin, std::size_t end) {
        Node node;
        if (end - begin <= kLeafSize) {
            node.axis = -1;
            node.begin = static_cast<int>(begin);
            node.end = static_cast<int>(end);
            nodes_.push_back(node);
            return static_cast<int>(nodes_.size() - 1);
        }
        // Split on the widest axis at the median.
        Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                std::numeric_limits<double>::infinity()};
        Vec3 hi = -lo;
        for (std::size_t i = begin; i < end; ++i) {
            const Vec3& p = points_[static_cast<std::size_t>(order_[i])];
            for (int a = 0; a < 3; ++a) {
                lo[static_cast<std::size_t>(a)] = std::min(lo[static_cast<std::size_t>(a)], p[static_cast<std::size_t>(a)]);
                hi[static_cast<std::size_t>(a)] = std::max(hi[static_cast<std::size_t>(a)], p[static_cast<std::size_t>(a)]);
            }
        }
        int axis = 0;
        double width = hi.x - lo.x;
        if (hi.y - lo.y > width) { axis = 1; width = hi.y - lo.y; }
        if (hi.z - lo.z > width) { axis = 2; width = hi.z - lo.z; }

        std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                         order_.begin() + static_cast<std::ptrdiff_t>(mid),
                         order_.begin() + static_cast<std::ptrdiff_t>(end),
                         [&](int a, int b) {
                             double pa = points_[static_cast<std::size_t>(a)][static_cast<std::size_t>(axis)];
                             double pb = points_[static_cast<std::size_t>(b)][static_cast<std::size_t>(axis)];
                             return pa < pb || (pa == pb && a < b);
                         });
        node.axis = axis;
        node.split = points_[static_cast<std::size_t>(order_[mid])][static_cast<std::size_t>(axis)];
        int self = static_cast<int>(nodes_.size());
        nodes_.push_back(node);
        int left = build(begin, mid);
        int right = build(mid, end);
        nodes_[static_cast<std::size_t>(self)].left = left;
        nodes_[static_cast<std::size_t>(self)].right = right;
        return self;
    }

    void search(int node_id, const Vec3& q, Hit& best) const {
        const Node& node = nodes_[static_cast<std::size_t>(node_id)];
        if (node.axis < 0) {
            for (int i = node.begin; i < node.end; ++i) {
                int idx = order_[static_cast<std::size_t>(i)];
                double d2 = dist2(points_[static_cast<std::size_t>(idx)], q);
                if (d2 < best.dist2 || (d2 == best.dist2 && idx < best.index))
                    best = {idx, d2};
            }
            return;
        }
        double delta = q[static_cast<std::size_t>(node.axis)] - node.split;
        int near = delta < 0.0 ? node.left : node.right;
        int far = delta < 0.0 ? node.right : node.left;
        search(near, q, best);
        // <= keeps ties reachable on the far side.
        if (delta * delta <= best.dist2) search(far, q, best);
    }

    std::vector<Vec3> points_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace headcraft
