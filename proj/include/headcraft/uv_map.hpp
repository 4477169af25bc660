// uv_map.hpp — UV displacement images: baking from per-vertex displacements
// and sampling back.
//
// Texel (x, y) sits at UV (x/(W-1), y/(H-1)); sampling is bilinear on that
// lattice. Baking rasterizes each triangle in UV space with a texel-center
// test and a top-left fill rule, so adjacent triangles never double-write a
// shared edge and genuine chart overlaps are countable. Corner texels that
// the center test misses are splatted with the (extrapolated) barycentric
// value so every seam vertex owns a defined texel.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "headcraft/log.hpp"
#include "headcraft/mesh.hpp"
#include "headcraft/vec3.hpp"

namespace headcraft {

struct UvMap {
    int width = 0;
    int height = 0;
    std::vector<Vec3> data;            // row-major, height*width
    std::vector<std::uint8_t> valid;   // texel covered by a triangle
    std::vector<std::uint8_t> face_mask;  // optional circular face-region mask

    UvMap() = default;
    UvMap(int w, int h)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h),
          valid(static_cast<std::size_t>(w) * h, 0) {}

    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(x);
    }
    Vec3& at(int x, int y) { return data[index(x, y)]; }
    const Vec3& at(int x, int y) const { return data[index(x, y)]; }
    bool is_valid(int x, int y) const { return valid[index(x, y)] != 0; }
};

namespace detail {

inline double edge_fn(double ax, double ay, double bx, double by, double cx, double cy) {
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
}

// Asymmetric tie rule for texel centers exactly on an edge: a zero-area edge
// contribution is owned by exactly one of the two triangles sharing it.
inline bool topleft_edge(double ax, double ay, double bx, double by) {
    double dx = bx - ax, dy = by - ay;
    return dy < 0.0 || (dy == 0.0 && dx < 0.0);
}

}  // namespace detail

struct BakeResult {
    UvMap map;
    std::size_t overlap_count = 0;  // texels written by more than one triangle
};

inline BakeResult bake(const TemplateMesh& mesh, const std::vector<Vec3>& displacements,
                       int resolution) {
    if (!mesh.has_uvs()) throw std::runtime_error("bake: mesh has no corner UVs");
    if (displacements.size() != mesh.vertices.size())
        throw std::runtime_error("bake: displacement count mismatch");
    if (resolution < 2) throw std::runtime_error("bake: resolution must be >= 2");

    BakeResult result;
    result.map = UvMap(resolution, resolution);
    UvMap& map = result.map;
    std::vector<std::int32_t> writer(map.data.size(), -1);

    const double sx = static_cast<double>(resolution - 1);
    const double sy = static_cast<double>(resolution - 1);

    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& tri = mesh.faces[f];
        const auto& uvs = mesh.corner_uvs[f];
        double px[3], py[3];
        Vec3 dv[3];
        for (int k = 0; k < 3; ++k) {
            px[k] = uvs[static_cast<std::size_t>(k)].x * sx;
            py[k] = uvs[static_cast<std::size_t>(k)].y * sy;
            dv[k] = displacements[static_cast<std::size_t>(tri[static_cast<std::size_t>(k)])];
        }
        double area2 = detail::edge_fn(px[0], py[0], px[1], py[1], px[2], py[2]);
        if (area2 == 0.0) continue;  // degenerate in UV space
        // Normalize to counter-clockwise, remembering the corner order.
        int c0 = 0, c1 = 1, c2 = 2;
        if (area2 < 0.0) {
            std::swap(c1, c2);
            area2 = -area2;
        }
        const double ax = px[c0], ay = py[c0], bx = px[c1], by = py[c1], cx = px[c2], cy = py[c2];

        int x_min = std::max(0, static_cast<int>(std::ceil(std::min({ax, bx, cx}))));
        int x_max = std::min(resolution - 1, static_cast<int>(std::floor(std::max({ax, bx, cx}))));
        int y_min = std::max(0, static_cast<int>(std::ceil(std::min({ay, by, cy}))));
        int y_max = std::min(resolution - 1, static_cast<int>(std::floor(std::max({ay, by, cy}))));

        for (int y = y_min; y <= y_max; ++y) {
            for (int x = x_min; x <= x_max; ++x) {
                double qx = static_cast<double>(x), qy = static_cast<double>(y);
                double w0 = detail::edge_fn(bx, by, cx, cy, qx, qy);
                double w1 = detail::edge_fn(cx, cy, ax, ay, qx, qy);
                double w2 = detail::edge_fn(ax, ay, bx, by, qx, qy);
                bool in0 = w0 > 0.0 || (w0 == 0.0 && detail::topleft_edge(bx, by, cx, cy));
                bool in1 = w1 > 0.0 || (w1 == 0.0 && detail::topleft_edge(cx, cy, ax, ay));
                bool in2 = w2 > 0.0 || (w2 == 0.0 && detail::topleft_edge(ax, ay, bx, by));
                if (!(in0 && in1 && in2)) continue;
                Vec3 value = (dv[c0] * w0 + dv[c1] * w1 + dv[c2] * w2) / area2;
                std::size_t idx = map.index(x, y);
                if (writer[idx] >= 0 && writer[idx] != static_cast<std::int32_t>(f))
                    ++result.overlap_count;
                writer[idx] = static_cast<std::int32_t>(f);
                map.data[idx] = value;
                map.valid[idx] = 1;
            }
        }
    }

    // Corner splat: make sure the texel nearest to every corner carries a
    // value. Barycentric extrapolation keeps linear fields exact.
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& tri = mesh.faces[f];
        const auto& uvs = mesh.corner_uvs[f];
        double px[3], py[3];
        Vec3 dv[3];
        for (int k = 0; k < 3; ++k) {
            px[k] = uvs[static_cast<std::size_t>(k)].x * sx;
            py[k] = uvs[static_cast<std::size_t>(k)].y * sy;
            dv[k] = displacements[static_cast<std::size_t>(tri[static_cast<std::size_t>(k)])];
        }
        double area2 = detail::edge_fn(px[0], py[0], px[1], py[1], px[2], py[2]);
        for (int k = 0; k < 3; ++k) {
            int x = static_cast<int>(std::lround(px[k]));
            int y = static_cast<int>(std::lround(py[k]));
            if (x < 0 || x >= resolution || y < 0 || y >= resolution) continue;
            std::size_t idx = map.index(x, y);
            if (map.valid[idx]) continue;
            Vec3 value;
            if (area2 != 0.0) {
                double qx = static_cast<double>(x), qy = static_cast<double>(y);
                double w0 = detail::edge_fn(px[1], py[1], px[2], py[2], qx, qy) / area2;
                double w1 = detail::edge_fn(px[2], py[2], px[0], py[0], qx, qy) / area2;
                double w2 = detail::edge_fn(px[0], py[0], px[1], py[1], qx, qy) / area2;
                value = dv[0] * w0 + dv[1] * w1 + dv[2] * w2;
            } else {
                value = dv[k];
            }
            map.data[idx] = value;
            map.valid[idx] = 1;
        }
    }

    if (result.overlap_count > 0)
        log_warn("uv", std::to_string(result.overlap_count) +
                           " texels were covered by more than one triangle");
    return result;
}

struct SampleStats {
    std::size_t clamped = 0;  // queries outside [0,1]^2
};

inline Vec3 sample_bilinear(const UvMap& map, double u, double v, SampleStats* stats = nullptr) {
    if (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0) {
        if (stats) ++stats->clamped;
        u = std::clamp(u, 0.0, 1.0);
        v = std::clamp(v, 0.0, 1.0);
    }
    double fx = u * static_cast<double>(map.width - 1);
    double fy = v * static_cast<double>(map.height - 1);
    int x0 = std::min(static_cast<int>(fx), map.width - 2);
    int y0 = std::min(static_cast<int>(fy), map.height - 2);
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    double tx = fx - static_cast<double>(x0);
    double ty = fy - static_cast<double>(y0);
    const Vec3& v00 = map.at(x0, y0);
    const Vec3& v10 = map.at(x0 + 1, y0);
    const Vec3& v01 = map.at(x0, y0 + 1);
    const Vec3& v11 = map.at(x0 + 1, y0 + 1);
    return v00 * ((1.0 - tx) * (1.0 - ty)) + v10 * (tx * (1.0 - ty)) + v01 * ((1.0 - tx) * ty) +
           v11 * (tx * ty);
}

inline std::vector<Vec3> sample(const UvMap& map, const std::vector<Vec2>& uvs) {
    SampleStats stats;
    std::vector<Vec3> out(uvs.size());
    for (std::size_t i = 0; i < uvs.size(); ++i)
        out[i] = sample_bilinear(map, uvs[i].x, uvs[i].y, &stats);
    if (stats.clamped > 0)
        log_warn("uv", std::to_string(stats.clamped) + " sample UVs were outside [0,1]^2");
    return out;
}

// One UV per vertex: the first corner occurrence in face order. Seam vertices
// therefore sample a fixed side; after seam equalization both sides agree.
inline std::vector<Vec2> vertex_uvs(const TemplateMesh& mesh) {
    if (!mesh.has_uvs()) throw std::runtime_error("vertex_uvs: mesh has no corner UVs");
    std::vector<Vec2> uvs(mesh.vertices.size());
    std::vector<std::uint8_t> seen(mesh.vertices.size(), 0);
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        for (int k = 0; k < 3; ++k) {
            int v = mesh.faces[f][static_cast<std::size_t>(k)];
            if (!seen[static_cast<std::size_t>(v)]) {
                seen[static_cast<std::size_t>(v)] = 1;
                uvs[static_cast<std::size_t>(v)] = mesh.corner_uvs[f][static_cast<std::size_t>(k)];
            }
        }
    }
    return uvs;
}

// Per-vertex displacements sampled at the vertices' own UVs.
inline std::vector<Vec3> sample_to_vertices(const UvMap& map, const TemplateMesh& mesh) {
    return sample(map, vertex_uvs(mesh));
}

// Circular face-region mask in UV space (center and radius in UV units).
inline std::vector<std::uint8_t> make_face_mask(int width, int height, double center_u,
                                                double center_v, double radius) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(width) * height, 0);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double u = static_cast<double>(x) / static_cast<double>(width - 1);
            double v = static_cast<double>(y) / static_cast<double>(height - 1);
            double du = u - center_u, dv = v - center_v;
            if (du * du + dv * dv <= radius * radius)
                mask[static_cast<std::size_t>(y) * width + x] = 1;
        }
    }
    return mask;
}

// Bakes a per-vertex observation mask into texel space: a texel is observed
// when the interpolated indicator reaches 0.5.
inline std::vector<std::uint8_t> bake_observation_mask(const TemplateMesh& mesh,
                                                       const std::vector<std::uint8_t>& vertex_mask,
                                                       int resolution) {
    std::vector<Vec3> indicator(mesh.vertices.size());
    for (std::size_t i = 0; i < indicator.size(); ++i) {
        double v = vertex_mask[i] ? 1.0 : 0.0;
        indicator[i] = {v, v, v};
    }
    BakeResult baked = bake(mesh, indicator, resolution);
    std::vector<std::uint8_t> out(baked.map.data.size(), 0);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = baked.map.valid[i] && baked.map.data[i].x >= 0.5 ? 1 : 0;
    return out;
}

}  // namespace headcraft
