// tbn.hpp — per-vertex tangent/bitangent/normal frames and displacement
// transfer onto deforming template sequences.
//
// A displacement map stores object-space offsets for the neutral pose.
// Encoding them in the neutral TBN frame and decoding with each animation
// frame's TBN rotates the offsets with the deforming surface:
//
//     d_tbn = (t.d, b.d, n.d)   (neutral frame)
//     d_k   = [t_k b_k n_k] d_tbn
//
// Tangents come from UV derivatives, area-weighted per vertex and
// Gram-Schmidt orthonormalized against the vertex normal. Handedness is
// fixed by det[t b n] > 0 (b flips otherwise).
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "headcraft/log.hpp"
#include "headcraft/mesh.hpp"
#include "headcraft/smoothing.hpp"
#include "headcraft/subdivision.hpp"
#include "headcraft/uv_map.hpp"

namespace headcraft {

struct TbnFrame {
    std::vector<Vec3> tangent;
    std::vector<Vec3> bitangent;
    std::vector<Vec3> normal;

    std::size_t size() const { return normal.size(); }
};

inline TbnFrame compute_tbn(const TemplateMesh& mesh) {
    if (!mesh.has_uvs()) throw std::runtime_error("compute_tbn: mesh has no corner UVs");
    const std::size_t n = mesh.vertices.size();
    TbnFrame frame;
    frame.normal = vertex_normals(mesh);
    frame.tangent.assign(n, Vec3{});
    frame.bitangent.assign(n, Vec3{});

    std::vector<Vec3> t_acc(n);
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& tri = mesh.faces[f];
        const auto& uvs = mesh.corner_uvs[f];
        Vec3 e1 = mesh.vertices[static_cast<std::size_t>(tri[1])] -
                  mesh.vertices[static_cast<std::size_t>(tri[0])];
        Vec3 e2 = mesh.vertices[static_cast<std::size_t>(tri[2])] -
                  mesh.vertices[static_cast<std::size_t>(tri[0])];
        double du1 = uvs[1].x - uvs[0].x, dv1 = uvs[1].y - uvs[0].y;
        double du2 = uvs[2].x - uvs[0].x, dv2 = uvs[2].y - uvs[0].y;
        double det = du1 * dv2 - du2 * dv1;
        if (std::abs(det) < 1e-18) continue;  // degenerate in UV space
        Vec3 t = (e1 * dv2 - e2 * dv1) / det;
        double area_weight = 0.5 * norm(cross(e1, e2));
        for (int k = 0; k < 3; ++k)
            t_acc[static_cast<std::size_t>(tri[static_cast<std::size_t>(k)])] += t * area_weight;
    }

    std::size_t fallbacks = 0;
    for (std::size_t v = 0; v < n; ++v) {
        const Vec3& nrm = frame.normal[v];
        Vec3 t = t_acc[v] - nrm * dot(t_acc[v], nrm);
        double tl = norm(t);
        if (tl > 1e-12) {
            t = t / tl;
        } else {
            // No usable UV gradient around this vertex: any perpendicular
            // will do.
            Vec3 helper = std::abs(nrm.x) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
            t = normalized(cross(helper, nrm));
            ++fallbacks;
        }
        // Gram-Schmidt of the accumulated bitangent against (n, t) leaves
        // +/- n x t; the handedness rule det[t b n] > 0 picks the + sign, so
        // construct it directly.
        frame.tangent[v] = t;
        frame.bitangent[v] = cross(nrm, t);
    }
    if (fallbacks > 0)
        log_warn("tbn", std::to_string(fallbacks) +
                            " vertices had no non-degenerate incident UV face; used fallback triads");
    return frame;
}

inline std::vector<Vec3> encode_tbn(const std::vector<Vec3>& displacements,
                                    const TbnFrame& neutral) {
    if (displacements.size() != neutral.size())
        throw std::runtime_error("encode_tbn: size mismatch");
    std::vector<Vec3> out(displacements.size());
    for (std::size_t i = 0; i < displacements.size(); ++i) {
        const Vec3& d = displacements[i];
        out[i] = {dot(neutral.tangent[i], d), dot(neutral.bitangent[i], d),
                  dot(neutral.normal[i], d)};
    }
    return out;
}

inline std::vector<Vec3> decode_tbn(const std::vector<Vec3>& tbn_displacements,
                                    const TbnFrame& frame) {
    if (tbn_displacements.size() != frame.size())
        throw std::runtime_error("decode_tbn: size mismatch");
    std::vector<Vec3> out(tbn_displacements.size());
    for (std::size_t i = 0; i < tbn_displacements.size(); ++i) {
        const Vec3& d = tbn_displacements[i];
        out[i] = frame.tangent[i] * d.x + frame.bitangent[i] * d.y + frame.normal[i] * d.z;
    }
    return out;
}

struct AnimationOptions {
    SmoothingSchedule smoothing = default_smoothing_schedule();
};

// Applies a displacement map to a deforming base-template sequence:
// subdivide each frame consistently, smooth regions, sample the map once (UVs
// are shared), encode in the neutral frame's TBN, decode per frame, displace.
inline std::vector<TemplateMesh> animate_sequence(const TemplateMesh& neutral_base,
                                                  const std::vector<TemplateMesh>& frame_bases,
                                                  const UvMap& map, const SubdivisionMap& subdiv,
                                                  const AnimationOptions& opts = {}) {
    TemplateMesh neutral = laplacian_smooth(apply_subdivision_map(subdiv, neutral_base),
                                            opts.smoothing);
    TbnFrame neutral_tbn = compute_tbn(neutral);
    std::vector<Vec3> d_object = sample_to_vertices(map, neutral);
    std::vector<Vec3> d_tbn = encode_tbn(d_object, neutral_tbn);

    std::vector<TemplateMesh> out;
    out.reserve(frame_bases.size());
    for (const TemplateMesh& base : frame_bases) {
        TemplateMesh frame = laplacian_smooth(apply_subdivision_map(subdiv, base), opts.smoothing);
        TbnFrame tbn = compute_tbn(frame);
        std::vector<Vec3> d = decode_tbn(d_tbn, tbn);
        for (std::size_t i = 0; i < frame.vertices.size(); ++i) frame.vertices[i] += d[i];
        out.push_back(std::move(frame));
    }
    return out;
}

}  // namespace headcraft
