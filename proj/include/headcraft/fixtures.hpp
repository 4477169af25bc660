// fixtures.hpp — synthetic head-stand-in fixtures for tests and demos.
//
// The template is an icosphere with a two-chart UV layout: a "face" chart (a
// spherical cap around +z) on the right half of the UV square and a "scalp"
// chart (the rest of the sphere) on the left half, both azimuthal-equidistant
// projections, so the seam machinery sees the same structure as a head
// template. Region labels partition the sphere into the seven supported
// labels. Scans are radial bump fields on the same sphere, supported on the
// upper (scalp) area; a family of scans shares a fixed set of bump patterns
// with per-member random amplitudes, which makes the family exactly
// low-dimensional and linear.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "headcraft/mesh.hpp"
#include "headcraft/rng.hpp"
#include "headcraft/subdivision.hpp"
#include "headcraft/vec3.hpp"

namespace headcraft {
namespace fixtures {

// Unit icosphere via midpoint subdivision of an icosahedron, positions
// re-projected to the unit sphere.
inline void icosphere(int subdivisions, std::vector<Vec3>& vertices,
                      std::vector<std::array<int, 3>>& faces) {
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {
        {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
        {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
        {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1},
    };
    for (Vec3& p : v) p = normalized(p);
    std::vector<std::array<int, 3>> f = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
        {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
        {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
    };
    for (int it = 0; it < subdivisions; ++it) {
        std::map<std::pair<int, int>, int> midpoint;
        std::vector<std::array<int, 3>> next;
        next.reserve(f.size() * 4);
        auto mid = [&](int a, int b) {
            auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
            auto it2 = midpoint.find(key);
            if (it2 != midpoint.end()) return it2->second;
            int idx = static_cast<int>(v.size());
            v.push_back(normalized((v[static_cast<std::size_t>(a)] +
                                    v[static_cast<std::size_t>(b)]) * 0.5));
            midpoint.emplace(key, idx);
            return idx;
        };
        for (const auto& tri : f) {
            int m01 = mid(tri[0], tri[1]);
            int m12 = mid(tri[1], tri[2]);
            int m20 = mid(tri[2], tri[0]);
            next.push_back({tri[0], m01, m20});
            next.push_back({m01, tri[1], m12});
            next.push_back({m20, m12, tri[2]});
            next.push_back({m01, m12, m20});
        }
        f = std::move(next);
    }
    vertices = std::move(v);
    faces = std::move(f);
}

// The face chart covers directions within this angle of +z.
constexpr double kFaceCapAngle = 1.0;  // radians

inline Region classify_region(const Vec3& dir) {
    // Priority order keeps labels unique where caps overlap.
    auto cap = [&](double cx, double cy, double cz, double radius) {
        return dist(dir, normalized(Vec3{cx, cy, cz})) < radius;
    };
    if (cap(0.0, -0.33, 0.92, 0.07)) return Region::inner_mouth;
    if (cap(0.0, -0.25, 0.95, 0.16)) return Region::lips;
    if (cap(0.35, 0.25, 0.9, 0.13) || cap(-0.35, 0.25, 0.9, 0.13)) return Region::eyeballs;
    if (std::abs(dir.x) > 0.9) return Region::ears;
    if (dir.y < -0.75) return Region::neck;
    if (dir.z > 0.25 && dir.y < 0.35) return Region::face_skin;
    return Region::scalp;
}

// Azimuthal-equidistant chart coordinates. Face chart: pole +z, landing on
// the right half of the UV square; scalp chart: pole -z, left half.
inline Vec2 chart_uv(const Vec3& dir, bool face_chart) {
    double cos_theta = face_chart ? dir.z : -dir.z;
    cos_theta = std::clamp(cos_theta, -1.0, 1.0);
    double theta = std::acos(cos_theta);
    double ax = dir.x, ay = dir.y;
    double len = std::sqrt(ax * ax + ay * ay);
    double cu, cv, scale;
    if (face_chart) {
        cu = 0.75;
        cv = 0.5;
        scale = 0.20 / (kFaceCapAngle + 0.6);  // cap plus straddling slack
    } else {
        cu = 0.25;
        cv = 0.5;
        scale = 0.20 / (3.14159265358979323846 - kFaceCapAngle + 0.6);
    }
    if (len < 1e-14) return {cu, cv};
    return {cu + scale * theta * (ax / len), cv + scale * theta * (ay / len)};
}

// Template sphere with the two-chart layout and all seven region labels.
inline TemplateMesh make_template(int subdivisions) {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
    icosphere(subdivisions, vertices, faces);

    TemplateMesh mesh;
    mesh.vertices = vertices;
    mesh.faces = faces;
    mesh.corner_uvs.resize(faces.size());
    mesh.regions.resize(vertices.size());
    for (std::size_t i = 0; i < vertices.size(); ++i)
        mesh.regions[i] = classify_region(normalized(vertices[i]));
    for (std::size_t f = 0; f < faces.size(); ++f) {
        Vec3 centroid = (vertices[static_cast<std::size_t>(faces[f][0])] +
                         vertices[static_cast<std::size_t>(faces[f][1])] +
                         vertices[static_cast<std::size_t>(faces[f][2])]) / 3.0;
        Vec3 cdir = normalized(centroid);
        bool face_chart = std::acos(std::clamp(cdir.z, -1.0, 1.0)) < kFaceCapAngle;
        for (int k = 0; k < 3; ++k)
            mesh.corner_uvs[f][static_cast<std::size_t>(k)] = chart_uv(
                normalized(vertices[static_cast<std::size_t>(faces[f][static_cast<std::size_t>(k)])]),
                face_chart);
    }
    validate_mesh(mesh, /*require_uvs=*/true);
    return mesh;
}

// Smooth window that is 1 on the upper sphere and fades to 0 toward y = 0.35,
// keeping bumps strictly inside the scalp label (ears reach up to y ~ 0.43
// but the window is almost zero there).
inline double scalp_window(const Vec3& dir) {
    double t = (dir.y - 0.35) / 0.2;
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    return t * t * (3.0 - 2.0 * t);
}

struct BumpPattern {
    Vec3 center;     // unit direction
    double sigma = 0.25;
};

// Fixed pattern set shared by a fixture family.
inline std::vector<BumpPattern> family_patterns() {
    return {
        {normalized(Vec3{0.0, 0.95, 0.2}), 0.30},
        {normalized(Vec3{0.5, 0.75, -0.3}), 0.25},
        {normalized(Vec3{-0.5, 0.75, -0.3}), 0.25},
        {normalized(Vec3{0.0, 0.6, -0.75}), 0.28},
        {normalized(Vec3{0.35, 0.85, 0.45}), 0.22},
    };
}

// Radial bump height at a unit direction for given pattern amplitudes.
inline double bump_height(const Vec3& dir, const std::vector<BumpPattern>& patterns,
                          const std::vector<double>& amplitudes) {
    double h = 0.0;
    for (std::size_t j = 0; j < patterns.size(); ++j) {
        double d2 = dist2(dir, patterns[j].center);
        h += amplitudes[j] * std::exp(-d2 / (2.0 * patterns[j].sigma * patterns[j].sigma));
    }
    return h * scalp_window(dir);
}

// Known ground-truth displacement field for the template: radial offsets of
// the bump field evaluated at each vertex direction.
inline std::vector<Vec3> bump_displacements(const TemplateMesh& mesh,
                                            const std::vector<BumpPattern>& patterns,
                                            const std::vector<double>& amplitudes) {
    std::vector<Vec3> d(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        Vec3 dir = normalized(mesh.vertices[i]);
        d[i] = dir * bump_height(dir, patterns, amplitudes);
    }
    return d;
}

// Scan cloud: `count` uniform directions at radius 1 + bump. The sphere is
// the limit surface, so the subdivided template (slightly inside the unit
// sphere) has a small irreducible offset to close during registration.
inline ScanCloud make_scan(const std::vector<BumpPattern>& patterns,
                           const std::vector<double>& amplitudes, std::size_t count,
                           std::uint64_t seed) {
    Rng rng(seed);
    ScanCloud cloud;
    cloud.points.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        // Uniform direction via normalized Gaussian triple.
        Vec3 dir{rng.normal(), rng.normal(), rng.normal()};
        double len = norm(dir);
        if (len < 1e-9) {
            dir = {1.0, 0.0, 0.0};
            len = 1.0;
        }
        dir = dir / len;
        cloud.points.push_back(dir * (1.0 + bump_height(dir, patterns, amplitudes)));
    }
    return cloud;
}

// Amplitudes for family member `index` under `seed`; uniform in [0.04, 0.2].
inline std::vector<double> family_amplitudes(std::uint64_t seed, int index) {
    Rng rng(seed * 1000003ULL + static_cast<std::uint64_t>(index) + 1);
    std::vector<double> amp(family_patterns().size());
    for (double& a : amp) a = rng.uniform(0.04, 0.2);
    return amp;
}

}  // namespace fixtures
}  // namespace headcraft
