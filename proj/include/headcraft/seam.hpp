// seam.hpp — UV seam handling: texel pairing, border equalization, vicinity
// blending, and Voronoi empty-space fill.
//
// The layout convention: the scalp chart occupies the left half of the UV
// square (u < 0.5) and the face chart the right half. A seam vertex is a
// vertex whose corner UVs appear on both halves; its two texels form a pair.
// Equalization sets both pair texels to the pair mean; blending then eases
// each region toward its seam values inside a fixed texel radius:
//
//     U[t] <- (r - dist(t)) / r * U[nearest seam texel] + dist(t) / r * U[t]
//
// Empty-space fill copies into every invalid texel the value of its nearest
// seam texel (exact Euclidean nearest site, ties to the lowest site index),
// so bilinear lookups can never hit undefined data.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "headcraft/mesh.hpp"
#include "headcraft/uv_map.hpp"

namespace headcraft {

struct Texel {
    int x = 0;
    int y = 0;
    bool operator==(const Texel& o) const { return x == o.x && y == o.y; }
    bool operator<(const Texel& o) const { return y < o.y || (y == o.y && x < o.x); }
};

struct SeamPair {
    Texel left;   // scalp-side texel
    Texel right;  // face-side texel
};

struct SeamTable {
    int width = 0;
    int height = 0;
    std::vector<SeamPair> pairs;

    // Seam sites per side, in pair order; `pooled_sites` is left_0, right_0,
    // left_1, right_1, ... and is what empty-space fill snaps to.
    std::vector<Texel> sites_left;
    std::vector<Texel> sites_right;
    std::vector<Texel> pooled_sites;

    // For every texel of a half: exact Euclidean distance to that half's
    // nearest seam site and the site index (into sites_left/right).
    std::vector<float> dist_left, dist_right;
    std::vector<std::int32_t> nn_left, nn_right;

    bool in_left_half(int x) const { return 2 * x < width - 1; }

    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(x);
    }
};

namespace detail {

inline Texel uv_to_texel(const Vec2& uv, int width, int height) {
    return {static_cast<int>(std::lround(uv.x * static_cast<double>(width - 1))),
            static_cast<int>(std::lround(uv.y * static_cast<double>(height - 1)))};
}

// Exact nearest-site scan for all texels restricted to one half of the map.
inline void distance_field(const std::vector<Texel>& sites, int width, int height, bool left_half,
                           std::vector<float>& dist, std::vector<std::int32_t>& nn) {
    dist.assign(static_cast<std::size_t>(width) * height,
                std::numeric_limits<float>::infinity());
    nn.assign(static_cast<std::size_t>(width) * height, -1);
    if (sites.empty()) return;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            bool in_left = 2 * x < width - 1;
            if (in_left != left_half) continue;
            double best = std::numeric_limits<double>::infinity();
            std::int32_t best_site = -1;
            for (std::size_t s = 0; s < sites.size(); ++s) {
                double dx = static_cast<double>(x - sites[s].x);
                double dy = static_cast<double>(y - sites[s].y);
                double d2 = dx * dx + dy * dy;
                if (d2 < best) {
                    best = d2;
                    best_site = static_cast<std::int32_t>(s);
                }
            }
            std::size_t idx = static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x);
            dist[idx] = static_cast<float>(std::sqrt(best));
            nn[idx] = best_site;
        }
    }
}

}  // namespace detail

// Builds the derived fields (sites, pooled list, distance fields) for an
// explicit pairing. Pairs whose left or right texel repeats are dropped to
// keep the pairing bijective.
inline SeamTable make_seam_table(std::vector<SeamPair> pairs, int width, int height) {
    SeamTable table;
    table.width = width;
    table.height = height;
    std::set<Texel> used_left, used_right;
    for (const SeamPair& p : pairs) {
        if (used_left.count(p.left) || used_right.count(p.right)) continue;
        used_left.insert(p.left);
        used_right.insert(p.right);
        table.pairs.push_back(p);
        table.sites_left.push_back(p.left);
        table.sites_right.push_back(p.right);
        table.pooled_sites.push_back(p.left);
        table.pooled_sites.push_back(p.right);
    }
    detail::distance_field(table.sites_left, width, height, /*left_half=*/true, table.dist_left,
                           table.nn_left);
    detail::distance_field(table.sites_right, width, height, /*left_half=*/false, table.dist_right,
                           table.nn_right);
    return table;
}

// Derives the seam pairing from the template's corner UVs. Vertices are
// scanned in index order and each texel joins at most one pair, so the
// pairing is a bijection between the two seam borders.
inline SeamTable build_seam_table(const TemplateMesh& mesh, int width, int height) {
    if (!mesh.has_uvs()) throw std::runtime_error("build_seam_table: mesh has no corner UVs");
    const std::size_t n = mesh.vertices.size();
    std::vector<Vec2> left_uv(n), right_uv(n);
    std::vector<std::uint8_t> has_left(n, 0), has_right(n, 0);
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        for (int k = 0; k < 3; ++k) {
            std::size_t v = static_cast<std::size_t>(mesh.faces[f][static_cast<std::size_t>(k)]);
            const Vec2& uv = mesh.corner_uvs[f][static_cast<std::size_t>(k)];
            if (uv.x < 0.5) {
                if (!has_left[v]) { left_uv[v] = uv; has_left[v] = 1; }
            } else {
                if (!has_right[v]) { right_uv[v] = uv; has_right[v] = 1; }
            }
        }
    }

    std::vector<SeamPair> pairs;
    for (std::size_t v = 0; v < n; ++v) {
        if (!has_left[v] || !has_right[v]) continue;
        pairs.push_back({detail::uv_to_texel(left_uv[v], width, height),
                         detail::uv_to_texel(right_uv[v], width, height)});
    }
    return make_seam_table(std::move(pairs), width, height);
}

// Equalizes seam pairs to their means and blends the vicinity of the seam
// inside each region. A map whose pairs are already equal is treated as
// processed and returned unchanged, which makes the operation idempotent.
inline UvMap process_seam(const UvMap& map, const SeamTable& seam, int blend_radius = 10) {
    if (seam.pairs.empty()) throw std::runtime_error("process_seam: empty seam table");
    if (blend_radius < 0) throw std::runtime_error("process_seam: blend radius must be >= 0");
    if (map.width != seam.width || map.height != seam.height)
        throw std::runtime_error("process_seam: map and seam table sizes differ");

    bool already_equal = true;
    for (const SeamPair& p : seam.pairs) {
        const Vec3& a = map.at(p.left.x, p.left.y);
        const Vec3& b = map.at(p.right.x, p.right.y);
        if (!(a == b)) {
            already_equal = false;
            break;
        }
    }
    if (already_equal) return map;

    UvMap out = map;
    for (const SeamPair& p : seam.pairs) {
        Vec3 mean = (out.at(p.left.x, p.left.y) + out.at(p.right.x, p.right.y)) * 0.5;
        out.at(p.left.x, p.left.y) = mean;
        out.at(p.right.x, p.right.y) = mean;
        out.valid[out.index(p.left.x, p.left.y)] = 1;
        out.valid[out.index(p.right.x, p.right.y)] = 1;
    }
    if (blend_radius == 0) return out;

    // Blend from a snapshot; seam texels themselves are fixed points (their
    // distance is 0 and their nearest site is themselves).
    const UvMap snapshot = out;
    const double r = static_cast<double>(blend_radius);
    auto blend_half = [&](const std::vector<float>& dist, const std::vector<std::int32_t>& nn,
                          const std::vector<Texel>& sites) {
        for (int y = 0; y < out.height; ++y) {
            for (int x = 0; x < out.width; ++x) {
                std::size_t idx = out.index(x, y);
                if (!out.valid[idx]) continue;
                double d = dist[idx];
                if (!(d < r) || nn[idx] < 0) continue;
                const Texel& site = sites[static_cast<std::size_t>(nn[idx])];
                const Vec3& seam_value = snapshot.at(site.x, site.y);
                double w = (r - d) / r;
                out.data[idx] = seam_value * w + snapshot.data[idx] * (1.0 - w);
            }
        }
    };
    blend_half(seam.dist_left, seam.nn_left, seam.sites_left);
    blend_half(seam.dist_right, seam.nn_right, seam.sites_right);
    return out;
}

// Copies into every invalid texel the value of its nearest seam texel. Valid
// flags stay untouched: filled texels hold defined values but remain marked
// as empty space.
inline UvMap fill_empty(const UvMap& map, const SeamTable& seam) {
    if (map.width != seam.width || map.height != seam.height)
        throw std::runtime_error("fill_empty: map and seam table sizes differ");
    UvMap out = map;
    if (seam.pooled_sites.empty()) return out;
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            std::size_t idx = out.index(x, y);
            if (out.valid[idx]) continue;
            double best = std::numeric_limits<double>::infinity();
            std::size_t best_site = 0;
            for (std::size_t s = 0; s < seam.pooled_sites.size(); ++s) {
                double dx = static_cast<double>(x - seam.pooled_sites[s].x);
                double dy = static_cast<double>(y - seam.pooled_sites[s].y);
                double d2 = dx * dx + dy * dy;
                if (d2 < best) {
                    best = d2;
                    best_site = s;
                }
            }
            const Texel& site = seam.pooled_sites[best_site];
            out.data[idx] = map.at(site.x, site.y);
        }
    }
    return out;
}

}  // namespace headcraft
