// metrics.hpp — set-level 3D metrics between generated and reference point
// clouds: MMD, coverage, and voxel-grid JSD.
//
// The cloud-to-cloud distance everywhere is the unpruned squared symmetric
// Chamfer mean. Report conventions: MMD is scaled by 1e3 and JSD by 1e2;
// coverage is a percentage.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "headcraft/chamfer.hpp"
#include "headcraft/mesh.hpp"
#include "headcraft/parallel.hpp"
#include "headcraft/rng.hpp"

namespace headcraft {

// Area-weighted uniform surface sampling, deterministic given the seed.
inline std::vector<Vec3> sample_surface(const std::vector<Vec3>& vertices,
                                        const std::vector<std::array<int, 3>>& faces,
                                        std::size_t count, std::uint64_t seed) {
    if (count == 0) return {};
    std::vector<double> cumulative(faces.size());
    double total = 0.0;
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto& tri = faces[f];
        Vec3 e1 = vertices[static_cast<std::size_t>(tri[1])] - vertices[static_cast<std::size_t>(tri[0])];
        Vec3 e2 = vertices[static_cast<std::size_t>(tri[2])] - vertices[static_cast<std::size_t>(tri[0])];
        total += 0.5 * norm(cross(e1, e2));
        cumulative[f] = total;
    }
    if (!(total > 0.0)) throw std::runtime_error("sample_surface: zero total area");

    Rng rng(seed);
    std::vector<Vec3> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        double pick = rng.uniform() * total;
        std::size_t f = static_cast<std::size_t>(
            std::lower_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin());
        if (f >= faces.size()) f = faces.size() - 1;
        const auto& tri = faces[f];
        // sqrt trick for uniform barycentric coordinates
        double r1 = std::sqrt(rng.uniform());
        double r2 = rng.uniform();
        double a = 1.0 - r1, b = r1 * (1.0 - r2), c = r1 * r2;
        out.push_back(vertices[static_cast<std::size_t>(tri[0])] * a +
                      vertices[static_cast<std::size_t>(tri[1])] * b +
                      vertices[static_cast<std::size_t>(tri[2])] * c);
    }
    return out;
}

inline std::vector<Vec3> sample_surface(const TemplateMesh& mesh, std::size_t count,
                                        std::uint64_t seed) {
    return sample_surface(mesh.vertices, mesh.faces, count, seed);
}

// Pairwise CD matrix, rows = ref clouds, cols = gen clouds. Cells are
// independent, so the worker split cannot change any value.
inline std::vector<std::vector<double>> pairwise_chamfer(
    const std::vector<std::vector<Vec3>>& ref, const std::vector<std::vector<Vec3>>& gen,
    int workers = 1) {
    std::vector<std::vector<double>> cd(ref.size(), std::vector<double>(gen.size(), 0.0));
    parallel_for(ref.size() * gen.size(), workers, [&](std::size_t cell) {
        std::size_t r = cell / gen.size();
        std::size_t g = cell % gen.size();
        cd[r][g] = chamfer_symmetric(ref[r], gen[g]);
    });
    return cd;
}

// Minimum matching distance: mean over reference clouds of the CD to the
// closest generated cloud. Raw value; the report scales it.
inline double mmd(const std::vector<std::vector<Vec3>>& gen,
                  const std::vector<std::vector<Vec3>>& ref, int workers = 1) {
    if (gen.empty() || ref.empty()) throw std::runtime_error("mmd: empty cloud set");
    auto cd = pairwise_chamfer(ref, gen, workers);
    double sum = 0.0;
    for (std::size_t r = 0; r < ref.size(); ++r)
        sum += *std::min_element(cd[r].begin(), cd[r].end());
    return sum / static_cast<double>(ref.size());
}

// Coverage: percentage of reference clouds whose nearest neighbor among
// (other references + generated) is generated. Equal distances count as
// generated.
inline double coverage(const std::vector<std::vector<Vec3>>& gen,
                       const std::vector<std::vector<Vec3>>& ref, int workers = 1) {
    if (gen.empty()) throw std::runtime_error("coverage: empty generated set");
    if (ref.empty()) throw std::runtime_error("coverage: empty reference set");
    auto cd_gen = pairwise_chamfer(ref, gen, workers);
    auto cd_ref = pairwise_chamfer(ref, ref, workers);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < ref.size(); ++r) {
        double best_gen = *std::min_element(cd_gen[r].begin(), cd_gen[r].end());
        double best_ref = std::numeric_limits<double>::infinity();
        for (std::size_t o = 0; o < ref.size(); ++o)
            if (o != r) best_ref = std::min(best_ref, cd_ref[r][o]);
        if (best_gen <= best_ref) ++hits;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(ref.size());
}

// Jensen-Shannon divergence between voxel occupancy distributions of the two
// pooled point sets (natural log, so the ceiling is ln 2). Raw value; the
// report scales it.
inline double jsd(const std::vector<std::vector<Vec3>>& gen,
                  const std::vector<std::vector<Vec3>>& ref, int grid_resolution = 64) {
    if (gen.empty() || ref.empty()) throw std::runtime_error("jsd: empty cloud set");
    if (grid_resolution < 2) throw std::runtime_error("jsd: grid resolution must be >= 2");

    Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
    Vec3 hi = -lo;
    auto extend = [&](const std::vector<std::vector<Vec3>>& set) {
        for (const auto& cloud : set)
            for (const Vec3& p : cloud)
                for (int a = 0; a < 3; ++a) {
                    lo[static_cast<std::size_t>(a)] =
                        std::min(lo[static_cast<std::size_t>(a)], p[static_cast<std::size_t>(a)]);
                    hi[static_cast<std::size_t>(a)] =
                        std::max(hi[static_cast<std::size_t>(a)], p[static_cast<std::size_t>(a)]);
                }
    };
    extend(gen);
    extend(ref);

    const double g = static_cast<double>(grid_resolution);
    Vec3 extent = hi - lo;
    for (int a = 0; a < 3; ++a)
        extent[static_cast<std::size_t>(a)] = std::max(extent[static_cast<std::size_t>(a)], 1e-12);

    auto splat = [&](const std::vector<std::vector<Vec3>>& set,
                     std::map<std::uint64_t, double>& counts, double& total) {
        for (const auto& cloud : set) {
            for (const Vec3& p : cloud) {
                std::uint64_t key = 0;
                for (int a = 0; a < 3; ++a) {
                    double t = (p[static_cast<std::size_t>(a)] - lo[static_cast<std::size_t>(a)]) /
                               extent[static_cast<std::size_t>(a)];
                    int cell = std::min(static_cast<int>(t * g), grid_resolution - 1);
                    cell = std::max(cell, 0);
                    key = key * static_cast<std::uint64_t>(grid_resolution) +
                          static_cast<std::uint64_t>(cell);
                }
                counts[key] += 1.0;
                total += 1.0;
            }
        }
    };
    std::map<std::uint64_t, double> pc, qc;
    double pt = 0.0, qt = 0.0;
    splat(gen, pc, pt);
    splat(ref, qc, qt);

    double value = 0.0;
    auto accumulate = [&](const std::map<std::uint64_t, double>& own, double own_total,
                          const std::map<std::uint64_t, double>& other, double other_total) {
        for (const auto& [key, count] : own) {
            double p = count / own_total;
            auto it = other.find(key);
            double q = it == other.end() ? 0.0 : it->second / other_total;
            double m = 0.5 * (p + q);
            value += 0.5 * p * std::log(p / m);
        }
    };
    accumulate(pc, pt, qc, qt);
    accumulate(qc, qt, pc, pt);
    return value;
}

struct MetricConfig {
    std::size_t surface_samples = 10000;
    int jsd_grid = 64;
    std::uint64_t seed = 0;
    int workers = 1;
};

struct MetricReport {
    double mmd_scaled = 0.0;   // raw * 1e3
    double jsd_scaled = 0.0;   // raw * 1e2
    double cov_percent = 0.0;
    MetricConfig config;
};

inline MetricReport compute_metrics(const std::vector<std::vector<Vec3>>& gen,
                                    const std::vector<std::vector<Vec3>>& ref,
                                    const std::vector<std::vector<Vec3>>& cov_ref,
                                    const MetricConfig& config) {
    MetricReport report;
    report.config = config;
    report.mmd_scaled = 1e3 * mmd(gen, ref, config.workers);
    report.jsd_scaled = 1e2 * jsd(gen, ref, config.jsd_grid);
    report.cov_percent = coverage(gen, cov_ref.empty() ? ref : cov_ref, config.workers);
    return report;
}

}  // namespace headcraft
