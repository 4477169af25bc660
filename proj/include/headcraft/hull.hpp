// hull.hpp — 3D convex hull and the expanded-hull vertex mask used by partial
// registration.
//
// The hull is built incrementally (visible-face deletion + horizon stitch).
// Robustness is epsilon-based, scaled by the input extent; inputs here are
// scan-sized clouds, not adversarial geometry.
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "headcraft/mesh.hpp"
#include "headcraft/vec3.hpp"

namespace headcraft {

struct HullPlane {
    Vec3 normal;  // unit, outward
    double offset = 0.0;
};

struct HullRegion {
    std::vector<Vec3> vertices;               // hull vertex positions
    std::vector<std::array<int, 3>> faces;    // outward-oriented triangles
    std::vector<HullPlane> planes;            // one unit-normal plane per face
    Vec3 centroid;                            // mean of hull vertices
    double expansion = 1.0;                   // scale factor about the centroid
    double tolerance = 1e-9;                  // boundary slack, scene units

    // True if q lies inside the hull scaled by `expansion` about `centroid`.
    // Boundary points count as inside.
    bool contains(const Vec3& q) const {
        Vec3 p = centroid + (q - centroid) / expansion;
        for (const HullPlane& pl : planes)
            if (dot(p, pl.normal) - pl.offset > tolerance) return false;
        return true;
    }
};

namespace detail {

struct HullFace {
    std::array<int, 3> v;
    Vec3 normal;  // unnormalized outward
    double offset = 0.0;
    bool alive = true;
};

inline double signed_dist(const HullFace& f, const Vec3& p) { return dot(f.normal, p) - f.offset; }

}  // namespace detail

// Convex hull of `points`. Throws when all points are within tolerance of a
// common plane (degenerate hull).
inline HullRegion convex_hull(const std::vector<Vec3>& points, double expansion = 1.0) {
    if (points.size() < 4) throw std::runtime_error("convex hull: need at least 4 points");
    if (!(expansion >= 1.0)) throw std::runtime_error("convex hull: expansion must be >= 1");

    Vec3 lo = points[0], hi = points[0];
    for (const Vec3& p : points) {
        for (int a = 0; a < 3; ++a) {
            lo[static_cast<std::size_t>(a)] = std::min(lo[static_cast<std::size_t>(a)], p[static_cast<std::size_t>(a)]);
            hi[static_cast<std::size_t>(a)] = std::max(hi[static_cast<std::size_t>(a)], p[static_cast<std::size_t>(a)]);
        }
    }
    double extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z, 1e-30});
    double eps = 1e-10 * extent;

    // Initial tetrahedron: extreme pair, farthest-from-line, farthest-from-plane.
    std::size_t i0 = 0, i1 = 0;
    double best = -1.0;
    for (std::size_t a = 0; a < 3; ++a) {
        std::size_t lo_i = 0, hi_i = 0;
        for (std::size_t i = 1; i < points.size(); ++i) {
            if (points[i][a] < points[lo_i][a]) lo_i = i;
            if (points[i][a] > points[hi_i][a]) hi_i = i;
        }
        double d = dist2(points[lo_i], points[hi_i]);
        if (d > best) { best = d; i0 = lo_i; i1 = hi_i; }
    }
    if (best <= eps * eps) throw std::runtime_error("convex hull: degenerate (points coincide)");
    Vec3 dir = points[i1] - points[i0];
    std::size_t i2 = 0;
    best = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        double d = norm2(cross(points[i] - points[i0], dir));
        if (d > best) { best = d; i2 = i; }
    }
    if (best <= eps * eps * norm2(dir))
        throw std::runtime_error("convex hull: degenerate (points are collinear)");
    Vec3 plane_n = cross(points[i1] - points[i0], points[i2] - points[i0]);
    std::size_t i3 = 0;
    best = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        double d = std::abs(dot(points[i] - points[i0], plane_n));
        if (d > best) { best = d; i3 = i; }
    }
    if (best <= eps * norm(plane_n))
        throw std::runtime_error("convex hull: degenerate (points are coplanar)");

    std::vector<detail::HullFace> faces;
    auto make_face = [&](int a, int b, int c, const Vec3& inside) {
        detail::HullFace f;
        f.v = {a, b, c};
        f.normal = cross(points[static_cast<std::size_t>(b)] - points[static_cast<std::size_t>(a)],
                         points[static_cast<std::size_t>(c)] - points[static_cast<std::size_t>(a)]);
        f.offset = dot(f.normal, points[static_cast<std::size_t>(a)]);
        if (detail::signed_dist(f, inside) > 0.0) {
            std::swap(f.v[1], f.v[2]);
            f.normal = -f.normal;
            f.offset = -f.offset;
        }
        faces.push_back(f);
    };
    Vec3 inner = (points[i0] + points[i1] + points[i2] + points[i3]) * 0.25;
    make_face(static_cast<int>(i0), static_cast<int>(i1), static_cast<int>(i2), inner);
    make_face(static_cast<int>(i0), static_cast<int>(i1), static_cast<int>(i3), inner);
    make_face(static_cast<int>(i0), static_cast<int>(i2), static_cast<int>(i3), inner);
    make_face(static_cast<int>(i1), static_cast<int>(i2), static_cast<int>(i3), inner);

    for (std::size_t i = 0; i < points.size(); ++i) {
        if (i == i0 || i == i1 || i == i2 || i == i3) continue;
        // Faces visible from points[i].
        std::vector<std::size_t> visible;
        for (std::size_t f = 0; f < faces.size(); ++f)
            if (faces[f].alive && detail::signed_dist(faces[f], points[i]) > eps)
                visible.push_back(f);
        if (visible.empty()) continue;
        // Horizon = edges shared by exactly one visible face.
        std::map<std::pair<int, int>, std::pair<int, int>> edge_use;  // sorted edge -> (count, oriented a)
        for (std::size_t f : visible) {
            const auto& tri = faces[f].v;
            for (int k = 0; k < 3; ++k) {
                int a = tri[static_cast<std::size_t>(k)], b = tri[static_cast<std::size_t>((k + 1) % 3)];
                auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
                auto it = edge_use.find(key);
                if (it == edge_use.end())
                    edge_use.emplace(key, std::make_pair(1, a));
                else
                    it->second.first += 1;
            }
        }
        for (std::size_t f : visible) faces[f].alive = false;
        for (const auto& [key, use] : edge_use) {
            if (use.first != 1) continue;
            // Keep the orientation the dead face used, so the new face winds
            // outward.
            int a = use.second;
            int b = a == key.first ? key.second : key.first;
            detail::HullFace nf;
            nf.v = {a, b, static_cast<int>(i)};
            nf.normal = cross(points[static_cast<std::size_t>(b)] - points[static_cast<std::size_t>(a)],
                              points[i] - points[static_cast<std::size_t>(a)]);
            nf.offset = dot(nf.normal, points[static_cast<std::size_t>(a)]);
            if (norm2(nf.normal) <= eps * eps) continue;  // sliver
            if (detail::signed_dist(nf, inner) > 0.0) {
                std::swap(nf.v[1], nf.v[2]);
                nf.normal = -nf.normal;
                nf.offset = -nf.offset;
            }
            faces.push_back(nf);
        }
    }

    // Compact to referenced vertices.
    std::vector<int> remap(points.size(), -1);
    HullRegion hull;
    hull.expansion = expansion;
    for (const auto& f : faces) {
        if (!f.alive) continue;
        std::array<int, 3> tri{};
        for (int k = 0; k < 3; ++k) {
            int src = f.v[static_cast<std::size_t>(k)];
            if (remap[static_cast<std::size_t>(src)] < 0) {
                remap[static_cast<std::size_t>(src)] = static_cast<int>(hull.vertices.size());
                hull.vertices.push_back(points[static_cast<std::size_t>(src)]);
            }
            tri[static_cast<std::size_t>(k)] = remap[static_cast<std::size_t>(src)];
        }
        hull.faces.push_back(tri);
    }
    if (hull.faces.size() < 4) throw std::runtime_error("convex hull: degenerate result");
    hull.planes.reserve(hull.faces.size());
    for (const auto& tri : hull.faces) {
        const Vec3& a = hull.vertices[static_cast<std::size_t>(tri[0])];
        Vec3 n = normalized(cross(hull.vertices[static_cast<std::size_t>(tri[1])] - a,
                                  hull.vertices[static_cast<std::size_t>(tri[2])] - a));
        hull.planes.push_back({n, dot(n, a)});
    }
    Vec3 c{0.0, 0.0, 0.0};
    for (const Vec3& v : hull.vertices) c += v;
    hull.centroid = c / static_cast<double>(hull.vertices.size());
    hull.tolerance = 1e-9 * extent;
    return hull;
}

// Quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::runtime_error("quantile of empty set");
    std::sort(values.begin(), values.end());
    if (q <= 0.0) return values.front();
    if (q >= 1.0) return values.back();
    double pos = q * static_cast<double>(values.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
}

// Per-vertex mask of template vertices inside the expanded hull of the cloud.
// Cloud points below the floor quantile along the vertical axis are dropped
// first (scan floors carry shoulders and clothing).
inline std::vector<std::uint8_t> build_hull_mask(const std::vector<Vec3>& cloud,
                                                 const TemplateMesh& mesh, double expansion,
                                                 double floor_quantile, int vertical_axis = 1) {
    if (vertical_axis < 0 || vertical_axis > 2)
        throw std::runtime_error("build_hull_mask: vertical axis must be 0, 1, or 2");
    std::vector<double> heights(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i)
        heights[i] = cloud[i][static_cast<std::size_t>(vertical_axis)];
    double floor_level = quantile(heights, floor_quantile);
    std::vector<Vec3> kept;
    kept.reserve(cloud.size());
    for (const Vec3& p : cloud)
        if (p[static_cast<std::size_t>(vertical_axis)] >= floor_level) kept.push_back(p);
    HullRegion hull = convex_hull(kept, expansion);
    std::vector<std::uint8_t> mask(mesh.vertices.size(), 0);
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
        mask[v] = hull.contains(mesh.vertices[v]) ? 1 : 0;
    return mask;
}

}  // namespace headcraft
