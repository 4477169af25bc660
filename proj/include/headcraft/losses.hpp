// losses.hpp — registration objective: pruned Chamfer matching plus edge and
// Laplacian regularization, with analytic gradients.
//
// total = w_chamfer * L_chamfer(V', scan) + w_edge * L_edge(V') + w_lapl * L_lapl(V')
//
// L_edge  = mean over unique undirected edges of squared edge length.
// L_lapl  = sqrt( sum_v || mean(1-ring of v) - v ||^2 )  (outer square root;
//           averaging per vertex instead tends to reward isolated spikes).
//
// Chamfer gradients hold the current correspondences fixed (they are
// re-found at every evaluation); both directions contribute, so each scan
// point also pulls on its matched template vertex.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "headcraft/chamfer.hpp"
#include "headcraft/mesh.hpp"

namespace headcraft {

struct LossWeights {
    double chamfer = 0.0;
    double edge = 0.0;
    double laplacian = 0.0;
    double prune_threshold = 1.0;
    bool squared_chamfer = true;

    void validate() const {
        if (chamfer < 0.0 || edge < 0.0 || laplacian < 0.0)
            throw std::runtime_error("loss weights must be >= 0");
        if (!(prune_threshold > 0.0))
            throw std::runtime_error("prune threshold must be > 0");
    }
};

struct LossBreakdown {
    double total = 0.0;
    double chamfer = 0.0;    // unweighted term values
    double edge = 0.0;
    double laplacian = 0.0;
    bool chamfer_forward_empty = false;
    bool chamfer_backward_empty = false;
};

// Precomputed topology shared by every evaluation on one mesh.
struct LossTopology {
    std::vector<std::array<int, 2>> edges;
    std::vector<std::vector<int>> neighbors;

    explicit LossTopology(const TemplateMesh& mesh)
        : edges(unique_edges(mesh.faces)), neighbors(vertex_adjacency(mesh)) {}
};

inline double loss_edge(const std::vector<Vec3>& positions,
                        const std::vector<std::array<int, 2>>& edges) {
    if (edges.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& e : edges)
        sum += dist2(positions[static_cast<std::size_t>(e[0])],
                     positions[static_cast<std::size_t>(e[1])]);
    return sum / static_cast<double>(edges.size());
}

inline double loss_edge(const std::vector<Vec3>& positions,
                        const std::vector<std::array<int, 3>>& faces) {
    return loss_edge(positions, unique_edges(faces));
}

namespace detail {

// Laplacian rows l_v = mean(neighbors) - v; vertices without neighbors give 0.
inline std::vector<Vec3> laplacian_rows(const std::vector<Vec3>& positions,
                                        const std::vector<std::vector<int>>& neighbors) {
    std::vector<Vec3> rows(positions.size());
    for (std::size_t v = 0; v < positions.size(); ++v) {
        const auto& nbrs = neighbors[v];
        if (nbrs.empty()) continue;
        Vec3 sum{0.0, 0.0, 0.0};
        for (int u : nbrs) sum += positions[static_cast<std::size_t>(u)];
        rows[v] = sum / static_cast<double>(nbrs.size()) - positions[v];
    }
    return rows;
}

}  // namespace detail

inline double loss_laplacian(const std::vector<Vec3>& positions,
                             const std::vector<std::vector<int>>& neighbors) {
    auto rows = detail::laplacian_rows(positions, neighbors);
    double sum = 0.0;
    for (const Vec3& r : rows) sum += norm2(r);
    return std::sqrt(sum);
}

inline double loss_laplacian(const std::vector<Vec3>& positions,
                             const std::vector<std::array<int, 3>>& faces) {
    return loss_laplacian(positions, vertex_adjacency(positions.size(), faces));
}

struct LossEvaluation {
    LossBreakdown breakdown;
    std::vector<Vec3> grad;  // d total / d position, per vertex
};

// Evaluates the weighted loss and its gradient w.r.t. the current vertex
// positions. `scan_index` must index `scan_points`. Pass grad=false to skip
// gradient work (finite-difference probes do this a lot).
inline LossEvaluation evaluate_loss(const std::vector<Vec3>& positions,
                                    const LossTopology& topology,
                                    const std::vector<Vec3>& scan_points,
                                    const PointIndex& scan_index, const LossWeights& weights,
                                    bool with_grad = true, int workers = 1) {
    weights.validate();
    LossEvaluation out;
    if (with_grad) out.grad.assign(positions.size(), Vec3{});

    if (weights.chamfer > 0.0) {
        PointIndex self_index(positions);
        ChamferResult ch = chamfer_pruned(positions, self_index, scan_points, scan_index,
                                          weights.prune_threshold, weights.squared_chamfer,
                                          workers);
        out.breakdown.chamfer = ch.value;
        out.breakdown.chamfer_forward_empty = ch.forward_empty;
        out.breakdown.chamfer_backward_empty = ch.backward_empty;
        if (with_grad) {
            // Forward: each surviving template vertex is pulled toward its
            // matched scan point.
            if (ch.forward_survivors > 0) {
                double inv = weights.chamfer / static_cast<double>(ch.forward_survivors);
                for (std::size_t i = 0; i < positions.size(); ++i) {
                    const Correspondence& c = ch.p1_to_p2[i];
                    if (!c.survived) continue;
                    Vec3 diff = positions[i] - scan_points[static_cast<std::size_t>(c.target)];
                    if (weights.squared_chamfer) {
                        out.grad[i] += diff * (2.0 * inv);
                    } else if (c.distance > 0.0) {
                        out.grad[i] += diff * (inv / c.distance);
                    }
                }
            }
            // Backward: each surviving scan point pulls on its nearest
            // template vertex.
            if (ch.backward_survivors > 0) {
                double inv = weights.chamfer / static_cast<double>(ch.backward_survivors);
                for (std::size_t j = 0; j < scan_points.size(); ++j) {
                    const Correspondence& c = ch.p2_to_p1[j];
                    if (!c.survived) continue;
                    std::size_t i = static_cast<std::size_t>(c.target);
                    Vec3 diff = positions[i] - scan_points[j];
                    if (weights.squared_chamfer) {
                        out.grad[i] += diff * (2.0 * inv);
                    } else if (c.distance > 0.0) {
                        out.grad[i] += diff * (inv / c.distance);
                    }
                }
            }
        }
    }

    if (weights.edge > 0.0 && !topology.edges.empty()) {
        double sum = 0.0;
        double inv = 1.0 / static_cast<double>(topology.edges.size());
        for (const auto& e : topology.edges) {
            Vec3 d = positions[static_cast<std::size_t>(e[0])] -
                     positions[static_cast<std::size_t>(e[1])];
            sum += norm2(d);
            if (with_grad) {
                Vec3 g = d * (2.0 * inv * weights.edge);
                out.grad[static_cast<std::size_t>(e[0])] += g;
                out.grad[static_cast<std::size_t>(e[1])] -= g;
            }
        }
        out.breakdown.edge = sum * inv;
    }

    if (weights.laplacian > 0.0) {
        auto rows = detail::laplacian_rows(positions, topology.neighbors);
        double sum = 0.0;
        for (const Vec3& r : rows) sum += norm2(r);
        double value = std::sqrt(sum);
        out.breakdown.laplacian = value;
        if (with_grad && value > 0.0) {
            // d sqrt(S) / d_w = ( -l_w + sum_{v in N(w)} l_v / deg(v) ) / sqrt(S)
            double inv = weights.laplacian / value;
            for (std::size_t w = 0; w < positions.size(); ++w) {
                Vec3 g = -rows[w];
                for (int v : topology.neighbors[w]) {
                    std::size_t deg = topology.neighbors[static_cast<std::size_t>(v)].size();
                    if (deg > 0) g += rows[static_cast<std::size_t>(v)] / static_cast<double>(deg);
                }
                out.grad[w] += g * inv;
            }
        }
    }

    out.breakdown.total = weights.chamfer * out.breakdown.chamfer +
                          weights.edge * out.breakdown.edge +
                          weights.laplacian * out.breakdown.laplacian;
    return out;
}

// Convenience wrapper: loss of mesh displaced by D against a target cloud.
inline LossBreakdown loss_total(const TemplateMesh& mesh, const std::vector<Vec3>& displacements,
                                const std::vector<Vec3>& scan_points, const LossWeights& weights) {
    if (displacements.size() != mesh.vertices.size())
        throw std::runtime_error("loss_total: displacement count mismatch");
    std::vector<Vec3> positions(mesh.vertices.size());
    for (std::size_t i = 0; i < positions.size(); ++i)
        positions[i] = mesh.vertices[i] + displacements[i];
    LossTopology topo(mesh);
    PointIndex scan_index(scan_points);
    return evaluate_loss(positions, topo, scan_points, scan_index, weights, /*with_grad=*/false)
        .breakdown;
}

// True when every correspondence is at least `margin` away from a
// nearest-neighbor switch or a pruning flip in both directions. The Chamfer
// loss is only piecewise differentiable; finite-difference verification has
// to probe clear of the kinks.
inline bool chamfer_probe_differentiable(const std::vector<Vec3>& positions,
                                         const std::vector<Vec3>& scan_points,
                                         double prune_threshold, double margin) {
    auto direction_safe = [&](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
        for (const Vec3& p : from) {
            double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
            for (const Vec3& q : to) {
                double dd = dist(p, q);
                if (dd < d1) {
                    d2 = d1;
                    d1 = dd;
                } else if (dd < d2) {
                    d2 = dd;
                }
            }
            if (d2 - d1 < margin || std::abs(d1 - prune_threshold) < margin) return false;
        }
        return true;
    };
    return direction_safe(positions, scan_points) && direction_safe(scan_points, positions);
}

// Gradient of the weighted loss w.r.t. vector displacements D. Rows of
// vertices outside `free_mask` are exactly zero.
inline LossEvaluation loss_gradients(const TemplateMesh& mesh, const LossTopology& topology,
                                     const std::vector<Vec3>& displacements,
                                     const std::vector<Vec3>& scan_points,
                                     const PointIndex& scan_index, const LossWeights& weights,
                                     const std::vector<std::uint8_t>& free_mask) {
    std::vector<Vec3> positions(mesh.vertices.size());
    for (std::size_t i = 0; i < positions.size(); ++i)
        positions[i] = mesh.vertices[i] + displacements[i];
    LossEvaluation ev =
        evaluate_loss(positions, topology, scan_points, scan_index, weights, /*with_grad=*/true);
    for (std::size_t i = 0; i < ev.grad.size(); ++i)
        if (!free_mask[i]) ev.grad[i] = Vec3{};
    return ev;
}

// Gradient w.r.t. per-vertex normal amplitudes alpha, with positions
// V + D_base + N (.) alpha. Chain rule: d/d alpha_i = grad_position_i . n_i.
inline std::pair<LossBreakdown, std::vector<double>> loss_gradients_alpha(
    const TemplateMesh& mesh, const LossTopology& topology, const std::vector<Vec3>& base_displacements,
    const std::vector<Vec3>& normals, const std::vector<double>& alpha,
    const std::vector<Vec3>& scan_points, const PointIndex& scan_index, const LossWeights& weights,
    const std::vector<std::uint8_t>& free_mask) {
    std::vector<Vec3> positions(mesh.vertices.size());
    for (std::size_t i = 0; i < positions.size(); ++i)
        positions[i] = mesh.vertices[i] + base_displacements[i] + normals[i] * alpha[i];
    LossEvaluation ev =
        evaluate_loss(positions, topology, scan_points, scan_index, weights, /*with_grad=*/true);
    std::vector<double> grad_alpha(alpha.size(), 0.0);
    for (std::size_t i = 0; i < alpha.size(); ++i)
        if (free_mask[i]) grad_alpha[i] = dot(ev.grad[i], normals[i]);
    return {ev.breakdown, std::move(grad_alpha)};
}

}  // namespace headcraft
