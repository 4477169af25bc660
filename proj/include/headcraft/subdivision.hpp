// subdivision.hpp — consistent midpoint subdivision with barycentric
// provenance.
//
// Each face splits 1 -> 4 at edge midpoints. Instead of storing positions,
// the map stores, for every subdivided vertex and corner, which face of the
// ORIGINAL mesh it lives in and its barycentric coordinates there. Applying
// the map to any mesh with the same base topology then reproduces the same
// subdivided topology, which keeps vertex counts and ordering identical
// across deforming instances of one template.
//
// Position-shared midpoints are deduplicated per undirected edge; corners are
// tracked individually so UV seams stay split. Region labels are inherited
// from the parent corner with the largest barycentric weight (ties go to the
// lowest parent vertex index).
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "headcraft/mesh.hpp"

namespace headcraft {

struct BaryRef {
    int parent_face = -1;
    std::array<double, 3> weights{0.0, 0.0, 0.0};
};

struct SubdivisionMap {
    // Reference base topology; apply() rejects meshes that disagree.
    std::size_t base_vertex_count = 0;
    std::vector<std::array<int, 3>> base_faces;

    // Subdivided topology.
    std::vector<std::array<int, 3>> faces;

    // One canonical provenance per subdivided vertex (drives positions,
    // region labels) and one per corner (drives UVs across seams).
    std::vector<BaryRef> vertex_refs;
    std::vector<std::array<BaryRef, 3>> corner_refs;

    int iterations = 0;

    std::size_t vertex_count() const { return vertex_refs.size(); }
    std::size_t face_count() const { return faces.size(); }
};

namespace detail {

// Combines two barycentric references on the same parent face.
inline BaryRef bary_midpoint(const BaryRef& a, const BaryRef& b) {
    BaryRef m;
    m.parent_face = a.parent_face;
    for (int k = 0; k < 3; ++k) m.weights[k] = 0.5 * (a.weights[k] + b.weights[k]);
    return m;
}

}  // namespace detail

inline SubdivisionMap build_subdivision_map(const TemplateMesh& mesh, int iterations) {
    if (iterations < 0) throw std::runtime_error("subdivision iterations must be >= 0");
    validate_mesh(mesh, /*require_uvs=*/false);

    SubdivisionMap map;
    map.base_vertex_count = mesh.vertices.size();
    map.base_faces = mesh.faces;
    map.iterations = iterations;

    // Working state: current topology with per-vertex and per-corner refs
    // against the ORIGINAL faces. Level 0 = identity.
    std::vector<std::array<int, 3>> faces = mesh.faces;
    std::vector<BaryRef> vrefs(mesh.vertices.size());
    std::vector<std::array<BaryRef, 3>> crefs(mesh.faces.size());
    std::vector<bool> vref_set(mesh.vertices.size(), false);
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        for (int k = 0; k < 3; ++k) {
            BaryRef r;
            r.parent_face = static_cast<int>(f);
            r.weights = {0.0, 0.0, 0.0};
            r.weights[static_cast<std::size_t>(k)] = 1.0;
            crefs[f][static_cast<std::size_t>(k)] = r;
            int v = mesh.faces[f][static_cast<std::size_t>(k)];
            if (!vref_set[static_cast<std::size_t>(v)]) {
                vrefs[static_cast<std::size_t>(v)] = r;
                vref_set[static_cast<std::size_t>(v)] = true;
            }
        }
    }
    for (bool set : vref_set)
        if (!set) throw std::runtime_error("isolated vertex not referenced by any face");

    std::size_t vcount = mesh.vertices.size();
    for (int it = 0; it < iterations; ++it) {
        std::map<std::pair<int, int>, int> edge_mid;  // undirected edge -> new vertex
        std::vector<std::array<int, 3>> next_faces;
        std::vector<std::array<BaryRef, 3>> next_crefs;
        next_faces.reserve(faces.size() * 4);
        next_crefs.reserve(faces.size() * 4);
        vrefs.reserve(vcount + faces.size() * 2);

        for (std::size_t f = 0; f < faces.size(); ++f) {
            const auto& tri = faces[f];
            const auto& cr = crefs[f];
            int mid[3];        // midpoint vertex per edge (k, k+1)
            BaryRef midr[3];   // this face's ref for that midpoint
            for (int k = 0; k < 3; ++k) {
                int a = tri[k], b = tri[(k + 1) % 3];
                midr[k] = detail::bary_midpoint(cr[static_cast<std::size_t>(k)],
                                                cr[static_cast<std::size_t>((k + 1) % 3)]);
                auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
                auto found = edge_mid.find(key);
                if (found == edge_mid.end()) {
                    mid[k] = static_cast<int>(vcount++);
                    edge_mid.emplace(key, mid[k]);
                    vrefs.push_back(midr[k]);  // canonical = first face touching the edge
                } else {
                    mid[k] = found->second;
                }
            }
            // Split pattern: 3 corner faces + 1 center face.
            const std::array<std::array<int, 3>, 4> sub = {{
                {tri[0], mid[0], mid[2]},
                {mid[0], tri[1], mid[1]},
                {mid[2], mid[1], tri[2]},
                {mid[0], mid[1], mid[2]},
            }};
            const std::array<std::array<BaryRef, 3>, 4> subr = {{
                {cr[0], midr[0], midr[2]},
                {midr[0], cr[1], midr[1]},
                {midr[2], midr[1], cr[2]},
                {midr[0], midr[1], midr[2]},
            }};
            for (int s = 0; s < 4; ++s) {
                next_faces.push_back(sub[static_cast<std::size_t>(s)]);
                next_crefs.push_back(subr[static_cast<std::size_t>(s)]);
            }
        }
        faces = std::move(next_faces);
        crefs = std::move(next_crefs);
    }

    map.faces = std::move(faces);
    map.vertex_refs = std::move(vrefs);
    map.corner_refs = std::move(crefs);
    return map;
}

// Evaluates one barycentric reference against a base mesh. Terms accumulate
// in weight-index order so repeated applications are bitwise identical.
inline Vec3 eval_bary(const BaryRef& r, const TemplateMesh& base) {
    const auto& tri = base.faces[static_cast<std::size_t>(r.parent_face)];
    Vec3 p{0.0, 0.0, 0.0};
    for (int k = 0; k < 3; ++k)
        p += r.weights[static_cast<std::size_t>(k)] * base.vertices[static_cast<std::size_t>(tri[static_cast<std::size_t>(k)])];
    return p;
}

inline Vec2 eval_bary_uv(const BaryRef& r, const TemplateMesh& base) {
    const auto& uvs = base.corner_uvs[static_cast<std::size_t>(r.parent_face)];
    Vec2 uv{0.0, 0.0};
    for (int k = 0; k < 3; ++k) {
        uv.x += r.weights[static_cast<std::size_t>(k)] * uvs[static_cast<std::size_t>(k)].x;
        uv.y += r.weights[static_cast<std::size_t>(k)] * uvs[static_cast<std::size_t>(k)].y;
    }
    return uv;
}

inline TemplateMesh apply_subdivision_map(const SubdivisionMap& map, const TemplateMesh& base) {
    if (base.vertices.size() != map.base_vertex_count || base.faces != map.base_faces)
        throw std::runtime_error("subdivision map was built for a different base topology");
    const bool with_uvs = base.has_uvs();

    TemplateMesh out;
    out.vertices.resize(map.vertex_count());
    for (std::size_t v = 0; v < map.vertex_refs.size(); ++v)
        out.vertices[v] = eval_bary(map.vertex_refs[v], base);
    out.faces = map.faces;
    if (with_uvs) {
        out.corner_uvs.resize(map.faces.size());
        for (std::size_t f = 0; f < map.faces.size(); ++f)
            for (int k = 0; k < 3; ++k)
                out.corner_uvs[f][static_cast<std::size_t>(k)] =
                    eval_bary_uv(map.corner_refs[f][static_cast<std::size_t>(k)], base);
    }
    out.regions.resize(map.vertex_count());
    for (std::size_t v = 0; v < map.vertex_refs.size(); ++v) {
        const BaryRef& r = map.vertex_refs[v];
        const auto& tri = map.base_faces[static_cast<std::size_t>(r.parent_face)];
        // Largest weight wins; ties go to the lowest parent vertex index.
        int best_vertex = -1;
        double best_weight = -1.0;
        for (int k = 0; k < 3; ++k) {
            double w = r.weights[static_cast<std::size_t>(k)];
            int pv = tri[static_cast<std::size_t>(k)];
            if (w > best_weight || (w == best_weight && pv < best_vertex)) {
                best_weight = w;
                best_vertex = pv;
            }
        }
        out.regions[v] = base.regions[static_cast<std::size_t>(best_vertex)];
    }
    return out;
}

// Direct subdivision is defined as build + apply, so it is bitwise identical
// to applying a prebuilt map to its own reference mesh.
inline TemplateMesh subdivide(const TemplateMesh& mesh, int iterations) {
    return apply_subdivision_map(build_subdivision_map(mesh, iterations), mesh);
}

}  // namespace headcraft
