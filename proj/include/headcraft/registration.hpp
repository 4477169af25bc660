// registration.hpp — two-stage template-to-scan registration.
//
// Stage 1 optimizes free vector displacements D over the scalp region with
// strong regularization. Stage 2 recomputes vertex normals on the stage-1
// deformed mesh and optimizes per-vertex amplitudes alpha along those
// normals, with the facial region unfrozen as well:
//
//     D_stage2 = D_stage1 + N (.) alpha
//
// Frozen vertices keep exactly-zero parameters: their gradients are masked,
// so Adam never touches them. Scans are expected in the working frame
// (rigidly aligned and pre-scaled by the caller).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "headcraft/adam.hpp"
#include "headcraft/hull.hpp"
#include "headcraft/losses.hpp"
#include "headcraft/log.hpp"
#include "headcraft/mesh.hpp"

namespace headcraft {

enum class StageMode { vector, normal };

struct StageConfig {
    LossWeights weights;
    double learning_rate = 3e-2;
    int steps = 1000;
    std::vector<Region> free_regions;
    StageMode mode = StageMode::vector;
    bool recompute_normals_each_step = false;  // stage 2 experiment knob

    void validate() const {
        weights.validate();
        if (steps <= 0) throw std::runtime_error("stage step count must be > 0");
        if (!(learning_rate > 0.0)) throw std::runtime_error("learning rate must be > 0");
    }
};

inline StageConfig default_stage1_config() {
    StageConfig cfg;
    cfg.weights = {2e3, 2e5, 1e4, 1.0, true};
    cfg.learning_rate = 3e-2;
    cfg.steps = 1000;
    cfg.free_regions = {Region::scalp};
    cfg.mode = StageMode::vector;
    return cfg;
}

inline StageConfig default_stage2_config() {
    StageConfig cfg;
    cfg.weights = {2e4, 2e4, 1e4, 1.0, true};
    cfg.learning_rate = 3e-4;
    cfg.steps = 1000;
    cfg.free_regions = {Region::scalp, Region::face_skin, Region::lips};
    cfg.mode = StageMode::normal;
    return cfg;
}

// Partial registration regularizes stage 1 harder and widens its pruning,
// while stage 2 prunes aggressively so stray cloud points cannot drag the
// normals far.
inline StageConfig default_partial_stage1_config() {
    StageConfig cfg = default_stage1_config();
    cfg.weights = {2e3, 8e5, 1e5, 10.0, true};
    return cfg;
}

inline StageConfig default_partial_stage2_config() {
    StageConfig cfg = default_stage2_config();
    cfg.weights.prune_threshold = 0.1;
    return cfg;
}

struct TraceEntry {
    int stage = 0;
    int step = 0;
    LossBreakdown loss;
};

struct RegistrationResult {
    std::vector<Vec3> d_stage1;
    std::vector<double> alpha;
    std::vector<Vec3> stage2_normals;  // normals of the stage-1 deformed mesh
    std::vector<Vec3> d_stage2;        // clamped composition, see compose_stage2
    std::vector<std::uint8_t> observation_mask;  // all-true for full registration
    std::vector<TraceEntry> trace;
};

constexpr double kDisplacementClip = 20.0;

// D_stage2 = D_stage1 + N (.) alpha, each component clamped to the storage
// range. Within the range the identity is exact (the tests recompose through
// this same function).
inline std::vector<Vec3> compose_stage2(const std::vector<Vec3>& d_stage1,
                                        const std::vector<Vec3>& normals,
                                        const std::vector<double>& alpha,
                                        double clip = kDisplacementClip) {
    std::vector<Vec3> out(d_stage1.size());
    for (std::size_t i = 0; i < d_stage1.size(); ++i) {
        Vec3 v = d_stage1[i] + normals[i] * alpha[i];
        out[i] = {std::clamp(v.x, -clip, clip), std::clamp(v.y, -clip, clip),
                  std::clamp(v.z, -clip, clip)};
    }
    return out;
}

// Mask-true vertices with at least one mask-false 1-ring neighbor.
inline std::vector<int> boundary_vertices(const std::vector<std::uint8_t>& mask,
                                          const TemplateMesh& mesh) {
    if (mask.size() != mesh.vertices.size())
        throw std::runtime_error("boundary_vertices: mask length mismatch");
    auto adj = vertex_adjacency(mesh);
    std::vector<int> out;
    for (std::size_t v = 0; v < mask.size(); ++v) {
        if (!mask[v]) continue;
        for (int u : adj[v]) {
            if (!mask[static_cast<std::size_t>(u)]) {
                out.push_back(static_cast<int>(v));
                break;
            }
        }
    }
    return out;
}

namespace detail {

inline void check_finite(const LossBreakdown& loss, int stage, int step) {
    if (!std::isfinite(loss.total))
        throw std::runtime_error("non-finite loss at stage " + std::to_string(stage) + " step " +
                                 std::to_string(step));
}

// Shared optimization loop. Stage 1 packs D into the parameter vector;
// stage 2 packs alpha.
inline void run_stage(const TemplateMesh& mesh, const LossTopology& topology,
                      const std::vector<Vec3>& scan_points, const PointIndex& scan_index,
                      const StageConfig& cfg, const std::vector<std::uint8_t>& free_mask,
                      int stage_number, std::vector<Vec3>& d_state, std::vector<double>& alpha_state,
                      const std::vector<Vec3>& base_displacements, std::vector<Vec3>& stage_normals,
                      std::vector<TraceEntry>& trace) {
    const std::size_t n = mesh.vertices.size();
    const bool vector_mode = cfg.mode == StageMode::vector;
    std::vector<double> params(vector_mode ? 3 * n : n, 0.0);
    if (vector_mode) {
        for (std::size_t i = 0; i < n; ++i) {
            params[3 * i + 0] = d_state[i].x;
            params[3 * i + 1] = d_state[i].y;
            params[3 * i + 2] = d_state[i].z;
        }
    } else {
        params = alpha_state;
    }
    AdamState adam(params.size(), cfg.learning_rate);
    std::vector<double> grads(params.size(), 0.0);

    for (int step = 0; step < cfg.steps; ++step) {
        LossBreakdown loss;
        if (vector_mode) {
            for (std::size_t i = 0; i < n; ++i)
                d_state[i] = {params[3 * i + 0], params[3 * i + 1], params[3 * i + 2]};
            LossEvaluation ev = loss_gradients(mesh, topology, d_state, scan_points, scan_index,
                                               cfg.weights, free_mask);
            loss = ev.breakdown;
            for (std::size_t i = 0; i < n; ++i) {
                grads[3 * i + 0] = ev.grad[i].x;
                grads[3 * i + 1] = ev.grad[i].y;
                grads[3 * i + 2] = ev.grad[i].z;
            }
        } else {
            alpha_state = params;
            if (cfg.recompute_normals_each_step) {
                std::vector<Vec3> displaced(n);
                for (std::size_t i = 0; i < n; ++i)
                    displaced[i] = base_displacements[i] + stage_normals[i] * alpha_state[i];
                stage_normals = vertex_normals(mesh, &displaced);
            }
            auto [breakdown, grad_alpha] =
                loss_gradients_alpha(mesh, topology, base_displacements, stage_normals,
                                     alpha_state, scan_points, scan_index, cfg.weights, free_mask);
            loss = breakdown;
            grads = grad_alpha;
        }
        check_finite(loss, stage_number, step);
        trace.push_back({stage_number, step, loss});
        adam_step(adam, params, grads);
    }
    // Final parameter state (the trace records the loss *before* each step).
    if (vector_mode) {
        for (std::size_t i = 0; i < n; ++i)
            d_state[i] = {params[3 * i + 0], params[3 * i + 1], params[3 * i + 2]};
    } else {
        alpha_state = params;
    }
}

}  // namespace detail

// Full two-stage registration of an already-subdivided template to a scan.
inline RegistrationResult register_full(const TemplateMesh& mesh, const ScanCloud& scan,
                                        const StageConfig& cfg1, const StageConfig& cfg2) {
    cfg1.validate();
    cfg2.validate();
    if (cfg1.mode != StageMode::vector || cfg2.mode != StageMode::normal)
        throw std::runtime_error("register_full: stage 1 must be vector mode, stage 2 normal mode");
    if (scan.points.empty()) throw std::runtime_error("register_full: empty scan");
    validate_mesh(mesh, /*require_uvs=*/false);

    const std::size_t n = mesh.vertices.size();
    LossTopology topology(mesh);
    PointIndex scan_index(scan.points);

    RegistrationResult result;
    result.d_stage1.assign(n, Vec3{});
    result.alpha.assign(n, 0.0);

    auto free1 = region_mask(mesh, cfg1.free_regions);
    detail::run_stage(mesh, topology, scan.points, scan_index, cfg1, free1, 1, result.d_stage1,
                      result.alpha, {}, result.stage2_normals, result.trace);

    result.stage2_normals = vertex_normals(mesh, &result.d_stage1);
    auto free2 = region_mask(mesh, cfg2.free_regions);
    std::vector<Vec3> unused;
    detail::run_stage(mesh, topology, scan.points, scan_index, cfg2, free2, 2, unused,
                      result.alpha, result.d_stage1, result.stage2_normals, result.trace);

    result.d_stage2 = compose_stage2(result.d_stage1, result.stage2_normals, result.alpha);
    result.observation_mask.assign(n, 1);
    return result;
}

// Partial registration: restrict movement to vertices inside the expanded
// hull of the cloud, freeze the border of that allowed region, then keep only
// vertices that ended up within `proximity_t` of the cloud in the final
// observation mask.
inline RegistrationResult register_partial(const TemplateMesh& mesh, const ScanCloud& cloud,
                                           const StageConfig& cfg1, const StageConfig& cfg2,
                                           double proximity_t, double hull_expansion = 1.5,
                                           double floor_quantile = 0.3, int vertical_axis = 1) {
    cfg1.validate();
    cfg2.validate();
    if (cloud.points.empty()) throw std::runtime_error("register_partial: empty cloud");
    validate_mesh(mesh, /*require_uvs=*/false);

    auto hull_mask = build_hull_mask(cloud.points, mesh, hull_expansion, floor_quantile,
                                     vertical_axis);

    auto make_free = [&](const std::vector<Region>& regions) {
        auto mask = region_mask(mesh, regions);
        for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = mask[i] && hull_mask[i];
        for (int b : boundary_vertices(mask, mesh)) mask[static_cast<std::size_t>(b)] = 0;
        std::size_t free_count = 0;
        for (auto m : mask) free_count += m;
        if (free_count == 0)
            throw std::runtime_error("register_partial: empty free set after hull masking");
        return mask;
    };

    const std::size_t n = mesh.vertices.size();
    LossTopology topology(mesh);
    PointIndex cloud_index(cloud.points);

    RegistrationResult result;
    result.d_stage1.assign(n, Vec3{});
    result.alpha.assign(n, 0.0);

    auto free1 = make_free(cfg1.free_regions);
    detail::run_stage(mesh, topology, cloud.points, cloud_index, cfg1, free1, 1, result.d_stage1,
                      result.alpha, {}, result.stage2_normals, result.trace);

    result.stage2_normals = vertex_normals(mesh, &result.d_stage1);
    auto free2 = make_free(cfg2.free_regions);
    std::vector<Vec3> unused;
    detail::run_stage(mesh, topology, cloud.points, cloud_index, cfg2, free2, 2, unused,
                      result.alpha, result.d_stage1, result.stage2_normals, result.trace);

    result.d_stage2 = compose_stage2(result.d_stage1, result.stage2_normals, result.alpha);

    // m_final = stage-2 free mask AND proximity to the fitted cloud.
    result.observation_mask.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (!free2[i]) continue;
        Vec3 p = mesh.vertices[i] + result.d_stage2[i];
        auto hit = cloud_index.nearest(p);
        if (std::sqrt(hit.dist2) <= proximity_t) result.observation_mask[i] = 1;
    }
    return result;
}

// --- result files ---

// Displacement table: magic "HCDT", u32 vertex count, float32 x/y/z per
// vertex, little-endian.
inline void save_displacements(const std::string& path, const std::vector<Vec3>& d) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write("HCDT", 4);
    std::uint32_t count = static_cast<std::uint32_t>(d.size());
    out.write(reinterpret_cast<const char*>(&count), 4);
    for (const Vec3& v : d) {
        float xyz[3] = {static_cast<float>(v.x), static_cast<float>(v.y), static_cast<float>(v.z)};
        out.write(reinterpret_cast<const char*>(xyz), 12);
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

inline std::vector<Vec3> load_displacements(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "HCDT")
        throw std::runtime_error(path + ": not a displacement table");
    std::uint32_t count = 0;
    in.read(reinterpret_cast<char*>(&count), 4);
    std::vector<Vec3> d(count);
    for (auto& v : d) {
        float xyz[3];
        in.read(reinterpret_cast<char*>(xyz), 12);
        v = {xyz[0], xyz[1], xyz[2]};
    }
    if (!in) throw std::runtime_error(path + ": truncated displacement table");
    return d;
}

// Vertex mask: magic "HCMK", u32 count, u8 per vertex.
inline void save_vertex_mask(const std::string& path, const std::vector<std::uint8_t>& mask) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write("HCMK", 4);
    std::uint32_t count = static_cast<std::uint32_t>(mask.size());
    out.write(reinterpret_cast<const char*>(&count), 4);
    out.write(reinterpret_cast<const char*>(mask.data()), static_cast<std::streamsize>(mask.size()));
    if (!out) throw std::runtime_error("write failed for " + path);
}

inline std::vector<std::uint8_t> load_vertex_mask(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "HCMK") throw std::runtime_error(path + ": not a mask file");
    std::uint32_t count = 0;
    in.read(reinterpret_cast<char*>(&count), 4);
    std::vector<std::uint8_t> mask(count);
    in.read(reinterpret_cast<char*>(mask.data()), count);
    if (!in) throw std::runtime_error(path + ": truncated mask file");
    return mask;
}

inline void save_loss_trace(const std::string& path, const std::vector<TraceEntry>& trace) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "stage,step,total,chamfer,edge,laplacian\n";
    char buf[200];
    for (const TraceEntry& t : trace) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g,%.17g\n", t.stage, t.step,
                      t.loss.total, t.loss.chamfer, t.loss.edge, t.loss.laplacian);
        out << buf;
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace headcraft
