// smoothing.hpp — uniform Laplacian smoothing with per-region iteration
// counts.
//
// One pass moves every participating vertex to the mean of its 1-ring
// (Jacobi update, all vertices simultaneously from the previous state).
// Regions run for their own number of passes: with counts c(r), the driver
// performs max(c) passes and a region takes part only in its first c(r) of
// them. A region with count 0 never moves.
#pragma once

#include <algorithm>
#include <array>
#include <vector>

#include "headcraft/mesh.hpp"

namespace headcraft {

struct SmoothingSchedule {
    std::array<int, kRegionCount> iterations{};  // indexed by Region

    int& operator[](Region r) { return iterations[static_cast<std::size_t>(r)]; }
    int operator[](Region r) const { return iterations[static_cast<std::size_t>(r)]; }

    int max_iterations() const {
        int m = 0;
        for (int c : iterations) m = std::max(m, c);
        return m;
    }
};

// Schedule used when applying displacement maps to subdivided templates:
// 3 passes on lips, 5 on face skin, 10 on scalp and neck, everything else
// untouched.
inline SmoothingSchedule default_smoothing_schedule() {
    SmoothingSchedule s;
    s[Region::lips] = 3;
    s[Region::face_skin] = 5;
    s[Region::scalp] = 10;
    s[Region::neck] = 10;
    return s;
}

inline TemplateMesh laplacian_smooth(const TemplateMesh& mesh, const SmoothingSchedule& schedule) {
    for (int c : schedule.iterations)
        if (c < 0) throw std::runtime_error("smoothing iteration counts must be >= 0");
    TemplateMesh out = mesh;
    const int passes = schedule.max_iterations();
    if (passes == 0 || mesh.vertices.empty()) return out;

    const auto adj = vertex_adjacency(mesh);
    std::vector<Vec3> next(out.vertices.size());
    for (int pass = 0; pass < passes; ++pass) {
        for (std::size_t v = 0; v < out.vertices.size(); ++v) {
            const auto& nbrs = adj[v];
            bool active = pass < schedule[out.regions[v]] && !nbrs.empty();
            if (!active) {
                next[v] = out.vertices[v];
                continue;
            }
            Vec3 sum{0.0, 0.0, 0.0};
            for (int u : nbrs) sum += out.vertices[static_cast<std::size_t>(u)];
            next[v] = sum / static_cast<double>(nbrs.size());
        }
        out.vertices.swap(next);
    }
    return out;
}

// Sum over vertices of ||mean(1-ring) - v||^2; used to check that smoothing
// actually smooths.
inline double laplacian_energy(const TemplateMesh& mesh) {
    const auto adj = vertex_adjacency(mesh);
    double energy = 0.0;
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        if (adj[v].empty()) continue;
        Vec3 sum{0.0, 0.0, 0.0};
        for (int u : adj[v]) sum += mesh.vertices[static_cast<std::size_t>(u)];
        energy += dist2(sum / static_cast<double>(adj[v].size()), mesh.vertices[v]);
    }
    return energy;
}

}  // namespace headcraft
