// mesh.hpp — triangle mesh containers and basic topology queries.
//
// Conventions:
// - Triangle-only meshes, 0-based indices in memory (OBJ I/O converts).
// - UVs are stored per face corner, not per vertex: the template layout has a
//   seam, so a single vertex can map to two distant UV locations.
// - Every vertex carries exactly one semantic region label; region-driven
//   logic (freezing, smoothing schedules) looks vertices up by label.
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "headcraft/log.hpp"
#include "headcraft/vec3.hpp"

namespace headcraft {

enum class Region : std::uint8_t {
    scalp = 0,
    face_skin,
    lips,
    ears,
    eyeballs,
    inner_mouth,
    neck,
};

constexpr int kRegionCount = 7;

inline const char* region_name(Region r) {
    switch (r) {
        case Region::scalp: return "scalp";
        case Region::face_skin: return "face_skin";
        case Region::lips: return "lips";
        case Region::ears: return "ears";
        case Region::eyeballs: return "eyeballs";
        case Region::inner_mouth: return "inner_mouth";
        case Region::neck: return "neck";
    }
    return "?";
}

inline bool region_from_name(const std::string& name, Region& out) {
    for (int i = 0; i < kRegionCount; ++i) {
        Region r = static_cast<Region>(i);
        if (name == region_name(r)) {
            out = r;
            return true;
        }
    }
    return false;
}

struct TemplateMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
    // corner_uvs[f][k] is the UV of faces[f][k]; all components in [0,1].
    std::vector<std::array<Vec2, 3>> corner_uvs;
    std::vector<Region> regions;  // one label per vertex

    std::size_t vertex_count() const { return vertices.size(); }
    std::size_t face_count() const { return faces.size(); }

    bool has_uvs() const { return corner_uvs.size() == faces.size() && !faces.empty(); }
};

struct ScanCloud {
    std::vector<Vec3> points;
    std::vector<std::array<int, 3>> faces;  // present when loaded from a scan mesh

    std::size_t size() const { return points.size(); }
};

// Throws std::runtime_error naming the first violated invariant.
inline void validate_mesh(const TemplateMesh& mesh, bool require_uvs) {
    const int n = static_cast<int>(mesh.vertices.size());
    if (n == 0) throw std::runtime_error("mesh has no vertices");
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& tri = mesh.faces[f];
        for (int k = 0; k < 3; ++k) {
            if (tri[k] < 0 || tri[k] >= n)
                throw std::runtime_error("face " + std::to_string(f) + " references vertex " +
                                         std::to_string(tri[k]) + " out of range");
        }
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
            throw std::runtime_error("face " + std::to_string(f) + " is degenerate");
    }
    if (require_uvs) {
        if (mesh.corner_uvs.size() != mesh.faces.size())
            throw std::runtime_error("corner UV count does not match face count");
        for (std::size_t f = 0; f < mesh.corner_uvs.size(); ++f) {
            for (int k = 0; k < 3; ++k) {
                const Vec2& uv = mesh.corner_uvs[f][k];
                if (!(uv.x >= 0.0 && uv.x <= 1.0 && uv.y >= 0.0 && uv.y <= 1.0))
                    throw std::runtime_error("corner UV out of [0,1]^2 at face " +
                                             std::to_string(f));
            }
        }
    }
    if (mesh.regions.size() != mesh.vertices.size())
        throw std::runtime_error("region label count does not match vertex count");
}

// Undirected 1-ring adjacency derived from faces. Neighbor lists are sorted
// and deduplicated, so iteration order is deterministic.
inline std::vector<std::vector<int>> vertex_adjacency(std::size_t vertex_count,
                                                      const std::vector<std::array<int, 3>>& faces) {
    std::vector<std::vector<int>> adj(vertex_count);
    for (const auto& tri : faces) {
        for (int k = 0; k < 3; ++k) {
            int a = tri[k], b = tri[(k + 1) % 3];
            adj[a].push_back(b);
            adj[b].push_back(a);
        }
    }
    for (auto& nbrs : adj) {
        std::sort(nbrs.begin(), nbrs.end());
        nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    }
    return adj;
}

inline std::vector<std::vector<int>> vertex_adjacency(const TemplateMesh& mesh) {
    return vertex_adjacency(mesh.vertices.size(), mesh.faces);
}

// Unique undirected edges (a < b), sorted, derived from faces.
inline std::vector<std::array<int, 2>> unique_edges(const std::vector<std::array<int, 3>>& faces) {
    std::vector<std::array<int, 2>> edges;
    edges.reserve(faces.size() * 3);
    for (const auto& tri : faces) {
        for (int k = 0; k < 3; ++k) {
            int a = tri[k], b = tri[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            edges.push_back({a, b});
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

// Area-weighted vertex normals of the mesh displaced by `displaced` (pass
// nullptr for the rest shape). Unnormalized face cross products already carry
// the area weight. Vertices with no incident area get an arbitrary unit
// vector and a warning.
inline std::vector<Vec3> vertex_normals(const TemplateMesh& mesh,
                                        const std::vector<Vec3>* displaced = nullptr) {
    if (displaced && displaced->size() != mesh.vertices.size())
        throw std::runtime_error("displacement count does not match vertex count");
    std::vector<Vec3> accum(mesh.vertices.size());
    auto pos = [&](int i) {
        return displaced ? mesh.vertices[i] + (*displaced)[i] : mesh.vertices[i];
    };
    for (const auto& tri : mesh.faces) {
        Vec3 p0 = pos(tri[0]), p1 = pos(tri[1]), p2 = pos(tri[2]);
        Vec3 fn = cross(p1 - p0, p2 - p0);
        accum[tri[0]] += fn;
        accum[tri[1]] += fn;
        accum[tri[2]] += fn;
    }
    std::size_t fallback_count = 0;
    for (auto& n : accum) {
        double len = norm(n);
        if (len > 0.0) {
            n = n / len;
        } else {
            n = Vec3{1.0, 0.0, 0.0};
            ++fallback_count;
        }
    }
    if (fallback_count > 0)
        log_warn("mesh", std::to_string(fallback_count) +
                             " vertices had zero incident area; using fallback normals");
    return accum;
}

// Per-vertex mask selecting the given region labels.
inline std::vector<std::uint8_t> region_mask(const TemplateMesh& mesh,
                                             const std::vector<Region>& labels) {
    std::vector<std::uint8_t> mask(mesh.vertices.size(), 0);
    for (std::size_t i = 0; i < mesh.regions.size(); ++i) {
        for (Region r : labels) {
            if (mesh.regions[i] == r) {
                mask[i] = 1;
                break;
            }
        }
    }
    return mask;
}

}  // namespace headcraft
