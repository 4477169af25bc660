// headcraft — command-line driver for the displacement-map toolkit.
//
// Subcommands cover the full pipeline: registration (full and partial),
// baking, UV post-processing, PCA fitting, sampling, masked latent fitting,
// map application, animation transfer, set metrics, gradient checking, and
// synthetic fixture generation.
//
// Exit codes: 0 success, 1 computation error, 2 usage or I/O error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "headcraft/chamfer.hpp"
#include "headcraft/config.hpp"
#include "headcraft/fixtures.hpp"
#include "headcraft/hull.hpp"
#include "headcraft/log.hpp"
#include "headcraft/losses.hpp"
#include "headcraft/mesh_io.hpp"
#include "headcraft/metrics.hpp"
#include "headcraft/parallel.hpp"
#include "headcraft/registration.hpp"
#include "headcraft/rng.hpp"
#include "headcraft/seam.hpp"
#include "headcraft/shape_model.hpp"
#include "headcraft/smoothing.hpp"
#include "headcraft/subdivision.hpp"
#include "headcraft/tbn.hpp"
#include "headcraft/uv_codec.hpp"
#include "headcraft/uv_map.hpp"

namespace fs = std::filesystem;
using namespace headcraft;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCompute = 1;
constexpr int kExitUsage = 2;

// Thrown for missing/unreadable inputs and bad user data; maps to exit 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::uint64_t env_seed_default() {
    const char* env = std::getenv("HEADCRAFT_SEED");
    if (!env) return 0;
    try {
        return std::stoull(env);
    } catch (...) {
        throw UsageError("HEADCRAFT_SEED is not an unsigned integer");
    }
}

// Seed precedence: --seed flag > config file > HEADCRAFT_SEED > 0.
PipelineConfig resolve_config(const std::string& config_path, std::optional<std::uint64_t> seed_flag,
                              std::optional<int> workers_flag) {
    PipelineConfig cfg;
    cfg.seed = env_seed_default();
    if (!config_path.empty()) {
        try {
            cfg = load_config(config_path, cfg);
        } catch (const std::exception& e) {
            throw UsageError(e.what());
        }
    }
    if (seed_flag) cfg.seed = *seed_flag;
    if (workers_flag) cfg.workers = *workers_flag;
    if (cfg.workers < 1) throw UsageError("--workers must be >= 1");
    return cfg;
}

template <typename Fn>
auto load_input(Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
}

struct ManifestEntry {
    std::string scan;
    std::string mesh_template;  // empty = shared template
    std::string subject;
};

// Similarity transform applied to scans on load (rigid alignment and global
// scaling are the caller's responsibility; this is the knob for it).
struct PreTransform {
    double scale = 1.0;
    std::vector<double> rotate_xyz;   // radians, applied as Rx then Ry then Rz
    std::vector<double> translate;

    bool is_identity() const {
        return scale == 1.0 && rotate_xyz.empty() && translate.empty();
    }

    void apply(std::vector<Vec3>& points) const {
        if (is_identity()) return;
        double ax = rotate_xyz.size() == 3 ? rotate_xyz[0] : 0.0;
        double ay = rotate_xyz.size() == 3 ? rotate_xyz[1] : 0.0;
        double az = rotate_xyz.size() == 3 ? rotate_xyz[2] : 0.0;
        Vec3 t = translate.size() == 3 ? Vec3{translate[0], translate[1], translate[2]} : Vec3{};
        auto rot = [](double& a, double& b, double angle) {
            double c = std::cos(angle), s = std::sin(angle);
            double na = c * a - s * b, nb = s * a + c * b;
            a = na;
            b = nb;
        };
        for (Vec3& p : points) {
            rot(p.y, p.z, ax);
            rot(p.z, p.x, ay);
            rot(p.x, p.y, az);
            p = p * scale + t;
        }
    }

    void validate() const {
        if (!rotate_xyz.empty() && rotate_xyz.size() != 3)
            throw UsageError("--pre-rotate needs exactly 3 angles");
        if (!translate.empty() && translate.size() != 3)
            throw UsageError("--pre-translate needs exactly 3 components");
        if (!(scale > 0.0)) throw UsageError("--pre-scale must be > 0");
    }
};

std::vector<ManifestEntry> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open manifest " + path);
    std::vector<ManifestEntry> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ss(line);
        ManifestEntry e;
        if (!(ss >> e.scan)) continue;
        if (e.scan[0] == '#') continue;
        ss >> e.mesh_template >> e.subject;
        entries.push_back(e);
    }
    if (entries.empty()) throw UsageError("manifest " + path + " lists no scans");
    return entries;
}

// Sorted expansion so directory listings cannot perturb outputs.
std::vector<std::string> expand_mesh_args(const std::vector<std::string>& args) {
    std::vector<std::string> out;
    for (const std::string& a : args) {
        if (fs::is_directory(a)) {
            std::vector<std::string> found;
            for (const auto& entry : fs::directory_iterator(a)) {
                std::string ext = entry.path().extension().string();
                if (ext == ".obj" || ext == ".ply") found.push_back(entry.path().string());
            }
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else {
            out.push_back(a);
        }
    }
    if (out.empty()) throw UsageError("no mesh inputs found");
    return out;
}

TemplateMesh prepare_template(const std::string& path, int subdivide_iterations) {
    TemplateMesh base = load_input([&] { return load_template_mesh(path); });
    if (subdivide_iterations <= 0) return base;
    return subdivide(base, subdivide_iterations);
}

void write_registration_outputs(const fs::path& out_dir, const std::string& stem,
                                const TemplateMesh& mesh, const RegistrationResult& result) {
    save_displacements((out_dir / (stem + "_displacements.hcdt")).string(), result.d_stage2);
    save_vertex_mask((out_dir / (stem + "_mask.hcmk")).string(), result.observation_mask);
    save_loss_trace((out_dir / (stem + "_trace.csv")).string(), result.trace);
    save_obj((out_dir / (stem + "_registered.obj")).string(), mesh, &result.d_stage2);
}

int cmd_register(const std::string& manifest_path, const std::vector<std::string>& scans,
                 const std::string& template_path, const std::string& config_path,
                 std::optional<std::uint64_t> seed_flag, std::optional<int> workers_flag,
                 int subdivide_iterations, const std::string& out_dir_str, bool dry_run,
                 bool partial, bool sparse, const PreTransform& pre) {
    PipelineConfig cfg = resolve_config(config_path, seed_flag, workers_flag);
    pre.validate();
    if (dry_run) {
        std::cout << dump_config(cfg);
        return kExitOk;
    }
    if (subdivide_iterations < 0) subdivide_iterations = cfg.subdivision_iterations;

    std::vector<ManifestEntry> entries;
    if (!manifest_path.empty()) {
        entries = load_manifest(manifest_path);
    } else {
        for (const std::string& s : scans) entries.push_back({s, "", ""});
    }
    if (entries.empty()) throw UsageError("no scans given (use --manifest or --scan)");
    for (const ManifestEntry& e : entries) {
        if (e.mesh_template.empty() && template_path.empty())
            throw UsageError("scan " + e.scan + " has no template (use --template)");
        if (!fs::exists(e.scan)) throw UsageError("scan path does not exist: " + e.scan);
    }

    fs::path out_dir(out_dir_str);
    fs::create_directories(out_dir);

    // Templates are subdivided once per distinct path.
    std::map<std::string, TemplateMesh> templates;
    for (const ManifestEntry& e : entries) {
        std::string t = e.mesh_template.empty() ? template_path : e.mesh_template;
        if (!templates.count(t)) {
            templates.emplace(t, prepare_template(t, subdivide_iterations));
            fs::path sub_path = out_dir / (fs::path(t).stem().string() + "_subdivided.obj");
            save_obj(sub_path.string(), templates.at(t));
            save_regions(sub_path.string(), templates.at(t).regions);
        }
    }

    struct ScanOutcome {
        bool ok = false;
        std::string error;
        double final_loss = 0.0;
        double final_chamfer = 0.0;
    };
    std::vector<ScanOutcome> outcomes(entries.size());

    parallel_for(entries.size(), cfg.workers, [&](std::size_t i) {
        const ManifestEntry& e = entries[i];
        ScanOutcome& outcome = outcomes[i];
        try {
            std::string t = e.mesh_template.empty() ? template_path : e.mesh_template;
            const TemplateMesh& mesh = templates.at(t);
            ScanCloud scan = load_scan(e.scan);
            pre.apply(scan.points);
            RegistrationResult result;
            if (partial) {
                double proximity = sparse ? cfg.partial_proximity_sparse : cfg.partial_proximity;
                result = register_partial(mesh, scan, cfg.partial_stage1, cfg.partial_stage2,
                                          proximity, cfg.partial_hull_expansion,
                                          cfg.partial_floor_quantile, cfg.vertical_axis);
            } else {
                result = register_full(mesh, scan, cfg.stage1, cfg.stage2);
            }
            std::string stem = fs::path(e.scan).stem().string();
            write_registration_outputs(out_dir, stem, mesh, result);
            outcome.ok = true;
            outcome.final_loss = result.trace.empty() ? 0.0 : result.trace.back().loss.total;
            outcome.final_chamfer = result.trace.empty() ? 0.0 : result.trace.back().loss.chamfer;
            log_info("register", e.scan + " done");
        } catch (const std::exception& ex) {
            outcome.error = ex.what();
            log_error("register", e.scan + " failed: " + outcome.error);
        }
    });

    std::ofstream summary(out_dir / "summary.csv");
    summary << "scan,status,final_loss,final_chamfer,error\n";
    bool all_ok = true;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const ScanOutcome& o = outcomes[i];
        all_ok = all_ok && o.ok;
        char buf[128];
        std::snprintf(buf, sizeof(buf), ",%s,%.17g,%.17g,", o.ok ? "ok" : "failed", o.final_loss,
                      o.final_chamfer);
        summary << entries[i].scan << buf << o.error << "\n";
    }
    if (!all_ok) {
        std::cerr << "some scans failed; see summary.csv\n";
        return kExitCompute;
    }
    return kExitOk;
}

int cmd_bake(const std::string& template_path, const std::string& displacements_path,
             const std::string& out_path, int resolution) {
    TemplateMesh mesh = load_input([&] { return load_template_mesh(template_path); });
    std::vector<Vec3> d = load_input([&] { return load_displacements(displacements_path); });
    if (d.size() != mesh.vertices.size())
        throw UsageError("displacement count does not match the template vertex count");
    BakeResult baked = bake(mesh, d, resolution);
    save_uv_map(out_path, baked.map);
    std::cout << "baked " << out_path << " (" << baked.overlap_count << " overlapped texels)\n";
    return kExitOk;
}

int cmd_postprocess(const std::string& template_path, const std::string& map_path,
                    const std::string& out_path, int blend_radius) {
    TemplateMesh mesh = load_input([&] { return load_template_mesh(template_path); });
    UvMap map = load_input([&] { return load_uv_map(map_path); });
    SeamTable seam = build_seam_table(mesh, map.width, map.height);
    UvMap processed = fill_empty(process_seam(map, seam, blend_radius), seam);
    save_uv_map(out_path, processed);
    return kExitOk;
}

std::vector<UvMap> load_maps(const std::vector<std::string>& paths) {
    std::vector<UvMap> maps;
    maps.reserve(paths.size());
    for (const std::string& p : paths) maps.push_back(load_input([&] { return load_uv_map(p); }));
    return maps;
}

int cmd_fit_pca(const std::vector<std::string>& map_paths, int components,
                const std::string& out_path, const PipelineConfig& cfg) {
    std::vector<UvMap> maps = load_maps(map_paths);
    int k = components > 0 ? components
                           : std::min(cfg.pca_components, static_cast<int>(maps.size()) - 1);
    LinearShapeModel model = fit_pca(maps, k);
    model.face_mask = make_face_mask(model.width, model.height, cfg.face_circle_u,
                                     cfg.face_circle_v, cfg.face_circle_radius);
    save_model(out_path, model);
    std::cout << "fitted " << k << " components over " << maps.size() << " maps -> " << out_path
              << "\n";
    return kExitOk;
}

int cmd_sample(const std::string& model_path, int count, double psi, std::uint64_t seed,
               const std::string& out_prefix, bool png) {
    LinearShapeModel model = load_input([&] { return load_model(model_path); });
    fs::path prefix(out_prefix);
    if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
    for (int i = 0; i < count; ++i) {
        UvMap map = sample_model(model, nullptr, psi, seed + static_cast<std::uint64_t>(i));
        char name[64];
        std::snprintf(name, sizeof(name), "_%03d.%s", i, png ? "png" : "hcuv");
        save_uv_map(out_prefix + name, map);
    }
    return kExitOk;
}

std::vector<std::uint8_t> load_texel_mask(const std::string& path, int width, int height) {
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".hcmk") {
        auto mask = load_vertex_mask(path);
        if (mask.size() != static_cast<std::size_t>(width) * height)
            throw UsageError("mask " + path + " does not match the map resolution");
        return mask;
    }
    PngImage img = load_input([&] { return read_png(path); });
    if (img.width != width || img.height != height)
        throw UsageError("mask " + path + " does not match the map resolution");
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(width) * height, 0);
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = img.data[i * static_cast<std::size_t>(img.channels)] >= 32768 ? 1 : 0;
    return mask;
}

int cmd_fit_latent(const std::string& model_path, const std::string& target_path,
                   const std::string& mask_path, const std::string& out_map,
                   const std::string& out_latent, const PipelineConfig& cfg) {
    LinearShapeModel model = load_input([&] { return load_model(model_path); });
    UvMap target = load_input([&] { return load_uv_map(target_path); });
    std::vector<std::uint8_t> mask;
    if (mask_path.empty())
        mask.assign(static_cast<std::size_t>(model.width) * model.height, 1);
    else
        mask = load_texel_mask(mask_path, model.width, model.height);

    MaskedFitOptions opts;
    opts.reg = cfg.latent_reg;
    opts.face_weight = cfg.latent_face_weight;
    opts.refine_steps = cfg.latent_refine_steps;
    opts.refine_lr = cfg.latent_refine_lr;
    LatentCode code = fit_latent_masked(model, target, mask, opts);
    UvMap fitted = reconstruct(model, code);
    save_uv_map(out_map, fitted);
    if (!out_latent.empty()) {
        std::ofstream out(out_latent);
        out.precision(17);
        for (double c : code.coeffs) out << c << "\n";
    }
    return kExitOk;
}

int cmd_apply(const std::string& template_path, const std::string& map_path,
              const std::string& out_path, int subdivide_iterations, bool smooth,
              const PipelineConfig& cfg) {
    TemplateMesh mesh = prepare_template(template_path, subdivide_iterations);
    if (smooth) mesh = laplacian_smooth(mesh, cfg.smoothing);
    UvMap map = load_input([&] { return load_uv_map(map_path); });
    std::vector<Vec3> d = sample_to_vertices(map, mesh);
    save_obj(out_path, mesh, &d);
    return kExitOk;
}

int cmd_animate(const std::string& neutral_path, const std::vector<std::string>& frame_paths,
                const std::string& map_path, const std::string& out_dir_str,
                int subdivide_iterations, const PipelineConfig& cfg) {
    TemplateMesh neutral = load_input([&] { return load_template_mesh(neutral_path); });
    std::vector<TemplateMesh> frames;
    for (const std::string& p : frame_paths)
        frames.push_back(load_input([&] { return load_template_mesh(p); }));
    for (const TemplateMesh& f : frames)
        if (f.faces != neutral.faces)
            throw UsageError("frame topology differs from the neutral template");
    UvMap map = load_input([&] { return load_uv_map(map_path); });
    if (subdivide_iterations < 0) subdivide_iterations = cfg.subdivision_iterations;

    SubdivisionMap subdiv = build_subdivision_map(neutral, subdivide_iterations);
    AnimationOptions opts;
    opts.smoothing = cfg.smoothing;

    // Frames are processed independently; outputs are index-addressed.
    TemplateMesh neutral_processed =
        laplacian_smooth(apply_subdivision_map(subdiv, neutral), opts.smoothing);
    TbnFrame neutral_tbn = compute_tbn(neutral_processed);
    std::vector<Vec3> d_tbn = encode_tbn(sample_to_vertices(map, neutral_processed), neutral_tbn);

    fs::path out_dir(out_dir_str);
    fs::create_directories(out_dir);
    std::vector<std::string> errors(frames.size());
    parallel_for(frames.size(), cfg.workers, [&](std::size_t i) {
        try {
            TemplateMesh frame =
                laplacian_smooth(apply_subdivision_map(subdiv, frames[i]), opts.smoothing);
            TbnFrame tbn = compute_tbn(frame);
            std::vector<Vec3> d = decode_tbn(d_tbn, tbn);
            for (std::size_t v = 0; v < frame.vertices.size(); ++v) frame.vertices[v] += d[v];
            char name[32];
            std::snprintf(name, sizeof(name), "frame_%05zu.obj", i);
            save_obj((out_dir / name).string(), frame);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (const std::string& e : errors)
        if (!e.empty()) throw std::runtime_error("animation frame failed: " + e);
    return kExitOk;
}

std::vector<std::vector<Vec3>> load_clouds(const std::vector<std::string>& paths,
                                           std::size_t samples, std::uint64_t seed) {
    std::vector<std::vector<Vec3>> clouds;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        const std::string& p = paths[i];
        ScanCloud scan = load_input([&] { return load_scan(p); });
        if (!scan.faces.empty() && samples > 0) {
            clouds.push_back(sample_surface(scan.points, scan.faces, samples,
                                            seed + static_cast<std::uint64_t>(i)));
        } else {
            clouds.push_back(scan.points);
        }
    }
    return clouds;
}

int cmd_metrics(const std::vector<std::string>& gen_args, const std::vector<std::string>& ref_args,
                const std::string& subject_manifest, const std::string& out_json,
                const PipelineConfig& cfg) {
    auto gen_paths = expand_mesh_args(gen_args);
    auto ref_paths = expand_mesh_args(ref_args);
    auto gen = load_clouds(gen_paths, cfg.metric_samples, cfg.seed);
    auto ref = load_clouds(ref_paths, cfg.metric_samples, cfg.seed + 1000000);

    // Coverage can use a one-scan-per-subject subset of the references.
    std::vector<std::vector<Vec3>> cov_ref;
    if (!subject_manifest.empty()) {
        std::ifstream in(subject_manifest);
        if (!in) throw UsageError("cannot open subject manifest " + subject_manifest);
        std::map<std::string, std::string> first_per_subject;  // subject -> path
        std::string path, subject, line;
        while (std::getline(in, line)) {
            std::istringstream ss(line);
            if (!(ss >> path >> subject)) continue;
            if (!first_per_subject.count(subject)) first_per_subject[subject] = path;
        }
        std::vector<std::string> subset_paths;
        for (const auto& [subj, p] : first_per_subject) subset_paths.push_back(p);
        std::sort(subset_paths.begin(), subset_paths.end());
        cov_ref = load_clouds(subset_paths, cfg.metric_samples, cfg.seed + 2000000);
    }

    MetricConfig mc;
    mc.surface_samples = cfg.metric_samples;
    mc.jsd_grid = cfg.metric_grid;
    mc.seed = cfg.seed;
    mc.workers = cfg.workers;
    MetricReport report = compute_metrics(gen, ref, cov_ref, mc);

    nlohmann::json j;
    j["mmd_x1000"] = report.mmd_scaled;
    j["jsd_x100"] = report.jsd_scaled;
    j["cov_percent"] = report.cov_percent;
    j["config"] = {{"samples", mc.surface_samples},
                   {"grid", mc.jsd_grid},
                   {"seed", mc.seed},
                   {"gen_count", gen.size()},
                   {"ref_count", ref.size()}};
    std::string text = j.dump(2) + "\n";
    if (!out_json.empty()) {
        std::ofstream out(out_json);
        out << text;
    }
    std::cout << text;
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%-12s %12s\n%-12s %12.6f\n%-12s %12.6f\n%-12s %12.2f\n",
                  "metric", "value", "MMD(x1e3)", report.mmd_scaled, "JSD(x1e2)",
                  report.jsd_scaled, "COV(%)", report.cov_percent);
    std::cerr << buf;
    return kExitOk;
}

int cmd_gen_fixtures(const std::string& out_dir_str, std::uint64_t seed, int family_size,
                     int base_subdivisions, int map_iterations, std::size_t scan_points) {
    fs::path out_dir(out_dir_str);
    fs::create_directories(out_dir);

    TemplateMesh base = fixtures::make_template(base_subdivisions);
    save_obj((out_dir / "template_base.obj").string(), base);
    save_regions((out_dir / "template_base.obj").string(), base.regions);

    TemplateMesh dense = subdivide(base, map_iterations);
    save_obj((out_dir / "template.obj").string(), dense);
    save_regions((out_dir / "template.obj").string(), dense.regions);

    auto patterns = fixtures::family_patterns();
    auto main_amp = fixtures::family_amplitudes(seed, 0);
    ScanCloud scan = fixtures::make_scan(patterns, main_amp, scan_points, seed);
    save_ply((out_dir / "scan.ply").string(), scan);

    ScanCloud frontal;
    for (const Vec3& p : scan.points)
        if (p.z >= 0.0) frontal.points.push_back(p);
    save_ply((out_dir / "scan_frontal.ply").string(), frontal);

    ScanCloud sparse;
    for (std::size_t i = 0; i < scan.points.size(); i += 100) sparse.points.push_back(scan.points[i]);
    save_ply((out_dir / "scan_sparse.ply").string(), sparse);

    std::ofstream manifest(out_dir / "family_manifest.txt");
    for (int m = 0; m < family_size; ++m) {
        auto amp = fixtures::family_amplitudes(seed, m);
        ScanCloud member = fixtures::make_scan(patterns, amp, scan_points,
                                               seed + 7000 + static_cast<std::uint64_t>(m));
        char name[64];
        std::snprintf(name, sizeof(name), "family_%02d.ply", m);
        save_ply((out_dir / name).string(), member);
        manifest << (out_dir / name).string() << "\n";
    }
    std::cout << "fixtures written to " << out_dir_str << "\n";
    return kExitOk;
}

}  // namespace

// Central-difference verification of the loss gradients on random small
// meshes; prints the worst relative error per configuration.
int cmd_gradcheck(std::uint64_t seed, int mesh_count);

int main(int argc, char** argv) {
    CLI::App app{"headcraft: displacement-map registration and generative modeling toolkit"};
    app.require_subcommand(1);

    std::string config_path, template_path, manifest_path, out_path, out_dir = "out";
    std::vector<std::string> scan_paths, map_paths, gen_paths, ref_paths, frame_paths;
    std::string model_path, target_path, mask_path, out_latent, subject_manifest;
    std::string displacements_path, neutral_path;
    std::optional<std::uint64_t> seed_flag;
    std::optional<int> workers_flag;
    int subdivide_iterations = -1;
    int resolution = 256;
    int blend_radius = 10;
    int components = -1;
    int count = 1;
    double psi = 0.7;
    bool dry_run = false, sparse = false, png = false, smooth = false;
    int family_size = 8, base_subdivisions = 2, map_iterations = 2;
    std::size_t scan_points = 4000;
    int gradcheck_meshes = 5;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "pipeline config file");
        sub->add_option("--seed", seed_flag, "seed override");
        sub->add_option("--workers", workers_flag, "worker threads");
    };

    PreTransform pre;
    auto add_pre_transform = [&](CLI::App* sub) {
        sub->add_option("--pre-scale", pre.scale, "similarity scale applied to scans on load");
        sub->add_option("--pre-rotate", pre.rotate_xyz,
                        "rotation angles (radians, x y z) applied to scans on load")
            ->expected(3);
        sub->add_option("--pre-translate", pre.translate, "translation applied to scans on load")
            ->expected(3);
    };

    CLI::App* reg = app.add_subcommand("register", "two-stage registration of scans");
    add_common(reg);
    reg->add_option("--manifest", manifest_path, "scan manifest: scan [template] [subject]");
    reg->add_option("--scan", scan_paths, "scan path (repeatable)");
    reg->add_option("--template", template_path, "shared template OBJ");
    reg->add_option("--subdivide", subdivide_iterations, "subdivision iterations before fitting");
    reg->add_option("--out", out_dir, "output directory");
    add_pre_transform(reg);
    reg->add_flag("--dry-run", dry_run, "print the resolved config and exit");

    CLI::App* regp = app.add_subcommand("register-partial", "registration against a partial cloud");
    add_common(regp);
    regp->add_option("--manifest", manifest_path);
    regp->add_option("--scan", scan_paths, "partial cloud path (repeatable)");
    regp->add_option("--template", template_path);
    regp->add_option("--subdivide", subdivide_iterations);
    regp->add_option("--out", out_dir);
    add_pre_transform(regp);
    regp->add_flag("--sparse", sparse, "use the sparse-cloud proximity threshold");
    regp->add_flag("--dry-run", dry_run);

    CLI::App* bake_cmd = app.add_subcommand("bake", "bake a displacement table into a UV map");
    add_common(bake_cmd);
    bake_cmd->add_option("--template", template_path)->required();
    bake_cmd->add_option("--displacements", displacements_path)->required();
    bake_cmd->add_option("--out", out_path)->required();
    bake_cmd->add_option("--resolution", resolution, "map resolution (default 256)");

    CLI::App* post = app.add_subcommand("postprocess-uv", "equalize seams and fill empty space");
    add_common(post);
    post->add_option("--template", template_path)->required();
    post->add_option("--map", target_path)->required();
    post->add_option("--out", out_path)->required();
    post->add_option("--blend-radius", blend_radius, "seam blend radius in texels (default 10)");

    CLI::App* fit = app.add_subcommand("fit-pca", "fit the linear model over UV maps");
    add_common(fit);
    fit->add_option("--maps", map_paths, "training maps")->required();
    fit->add_option("--components", components, "component count (default min(64, S-1))");
    fit->add_option("--out", out_path)->required();

    CLI::App* sample_cmd = app.add_subcommand("sample", "sample maps from the model");
    add_common(sample_cmd);
    sample_cmd->add_option("--model", model_path)->required();
    sample_cmd->add_option("--count", count, "number of samples");
    sample_cmd->add_option("--psi", psi, "truncation (default 0.7)");
    sample_cmd->add_option("--out-prefix", out_path, "output path prefix")->required();
    sample_cmd->add_flag("--png", png, "write quantized PNG instead of raw");

    CLI::App* fitl = app.add_subcommand("fit-latent", "masked latent fit to a target map");
    add_common(fitl);
    fitl->add_option("--model", model_path)->required();
    fitl->add_option("--target", target_path)->required();
    fitl->add_option("--mask", mask_path, "observation mask (PNG or .hcmk texel mask)");
    fitl->add_option("--out", out_path, "fitted map output")->required();
    fitl->add_option("--out-latent", out_latent, "write latent coefficients to a text file");

    CLI::App* apply_cmd = app.add_subcommand("apply", "apply a UV map to a template");
    add_common(apply_cmd);
    apply_cmd->add_option("--template", template_path)->required();
    apply_cmd->add_option("--map", target_path)->required();
    apply_cmd->add_option("--out", out_path)->required();
    apply_cmd->add_option("--subdivide", subdivide_iterations, "subdivide before applying");
    apply_cmd->add_flag("--smooth", smooth, "regional Laplacian smoothing before applying");

    CLI::App* anim = app.add_subcommand("animate", "transfer a map onto a frame sequence");
    add_common(anim);
    anim->add_option("--neutral", neutral_path)->required();
    anim->add_option("--frames", frame_paths, "frame templates (base topology)")->required();
    anim->add_option("--map", target_path)->required();
    anim->add_option("--subdivide", subdivide_iterations);
    anim->add_option("--out", out_dir)->required();

    CLI::App* met = app.add_subcommand("metrics", "MMD / COV / JSD between mesh sets");
    add_common(met);
    met->add_option("--gen", gen_paths, "generated meshes, clouds, or directories")->required();
    met->add_option("--ref", ref_paths, "reference meshes, clouds, or directories")->required();
    met->add_option("--subject-manifest", subject_manifest,
                    "`path subject` lines; coverage keeps one reference per subject");
    met->add_option("--out", out_path, "report JSON path");

    CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    add_common(grad);
    grad->add_option("--meshes", gradcheck_meshes, "number of random meshes");

    CLI::App* genf = app.add_subcommand("gen-fixtures", "generate synthetic fixtures");
    add_common(genf);
    genf->add_option("--out", out_dir)->required();
    genf->add_option("--family-size", family_size);
    genf->add_option("--base-subdivisions", base_subdivisions);
    genf->add_option("--map-iterations", map_iterations);
    genf->add_option("--scan-points", scan_points);

    CLI11_PARSE(app, argc, argv);

    try {
        PipelineConfig cfg = resolve_config(config_path, seed_flag, workers_flag);
        if (reg->parsed())
            return cmd_register(manifest_path, scan_paths, template_path, config_path, seed_flag,
                                workers_flag, subdivide_iterations, out_dir, dry_run,
                                /*partial=*/false, false, pre);
        if (regp->parsed())
            return cmd_register(manifest_path, scan_paths, template_path, config_path, seed_flag,
                                workers_flag, subdivide_iterations, out_dir, dry_run,
                                /*partial=*/true, sparse, pre);
        if (bake_cmd->parsed()) {
            if (!bake_cmd->count("--resolution")) resolution = cfg.uv_resolution;
            return cmd_bake(template_path, displacements_path, out_path, resolution);
        }
        if (post->parsed()) {
            if (!post->count("--blend-radius")) blend_radius = cfg.blend_radius;
            return cmd_postprocess(template_path, target_path, out_path, blend_radius);
        }
        if (fit->parsed()) return cmd_fit_pca(map_paths, components, out_path, cfg);
        if (sample_cmd->parsed()) {
            if (!sample_cmd->count("--psi")) psi = cfg.psi;
            return cmd_sample(model_path, count, psi, cfg.seed, out_path, png);
        }
        if (fitl->parsed())
            return cmd_fit_latent(model_path, target_path, mask_path, out_path, out_latent, cfg);
        if (apply_cmd->parsed())
            return cmd_apply(template_path, target_path, out_path, subdivide_iterations, smooth, cfg);
        if (anim->parsed())
            return cmd_animate(neutral_path, frame_paths, target_path, out_dir,
                               subdivide_iterations, cfg);
        if (met->parsed())
            return cmd_metrics(gen_paths, ref_paths, subject_manifest, out_path, cfg);
        if (grad->parsed()) return cmd_gradcheck(cfg.seed, gradcheck_meshes);
        if (genf->parsed())
            return cmd_gen_fixtures(out_dir, cfg.seed, family_size, base_subdivisions,
                                    map_iterations, scan_points);
        throw UsageError("no subcommand given");
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCompute;
    }
}

// --- gradcheck ---

namespace {

TemplateMesh random_patch_mesh(Rng& rng, int grid) {
    TemplateMesh mesh;
    for (int y = 0; y < grid; ++y)
        for (int x = 0; x < grid; ++x)
            mesh.vertices.push_back({static_cast<double>(x) + 0.3 * rng.normal(),
                                     static_cast<double>(y) + 0.3 * rng.normal(),
                                     0.5 * rng.normal()});
    for (int y = 0; y + 1 < grid; ++y)
        for (int x = 0; x + 1 < grid; ++x) {
            int a = y * grid + x, b = y * grid + x + 1, c = (y + 1) * grid + x,
                d = (y + 1) * grid + x + 1;
            mesh.faces.push_back({a, b, c});
            mesh.faces.push_back({b, d, c});
        }
    mesh.regions.assign(mesh.vertices.size(), Region::scalp);
    return mesh;
}

double gradcheck_worst(const TemplateMesh& mesh, const std::vector<Vec3>& scan,
                       const LossWeights& weights, Rng& rng) {
    const double h = 1e-4;
    LossTopology topo(mesh);
    PointIndex scan_index(scan);
    std::vector<std::uint8_t> free_mask(mesh.vertices.size(), 1);
    std::vector<Vec3> d(mesh.vertices.size());
    // Redraw until the probe window is clear of correspondence kinks, where
    // the one-sided gradient would legitimately disagree with FD.
    for (int attempt = 0; attempt < 50; ++attempt) {
        for (Vec3& v : d) v = {0.05 * rng.normal(), 0.05 * rng.normal(), 0.05 * rng.normal()};
        if (weights.chamfer == 0.0) break;
        std::vector<Vec3> positions(mesh.vertices.size());
        for (std::size_t k = 0; k < positions.size(); ++k) positions[k] = mesh.vertices[k] + d[k];
        if (chamfer_probe_differentiable(positions, scan, weights.prune_threshold, 4.0 * h)) break;
    }

    LossEvaluation ev = loss_gradients(mesh, topo, d, scan, scan_index, weights, free_mask);
    double worst = 0.0;
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        for (int a = 0; a < 3; ++a) {
            auto probe = [&](double delta) {
                std::vector<Vec3> dd = d;
                dd[i][static_cast<std::size_t>(a)] += delta;
                std::vector<Vec3> pos(mesh.vertices.size());
                for (std::size_t k = 0; k < pos.size(); ++k) pos[k] = mesh.vertices[k] + dd[k];
                return evaluate_loss(pos, topo, scan, scan_index, weights, false).breakdown.total;
            };
            double fd = (probe(h) - probe(-h)) / (2.0 * h);
            double an = ev.grad[i][static_cast<std::size_t>(a)];
            double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
            worst = std::max(worst, std::abs(fd - an) / denom);
        }
    }
    return worst;
}

}  // namespace

int cmd_gradcheck(std::uint64_t seed, int mesh_count) {
    Rng rng(seed + 17);
    bool ok = true;
    for (int m = 0; m < mesh_count; ++m) {
        TemplateMesh mesh = random_patch_mesh(rng, 5);
        std::vector<Vec3> scan;
        for (int i = 0; i < 60; ++i)
            scan.push_back({4.0 * rng.uniform(), 4.0 * rng.uniform(), rng.normal()});
        struct Case {
            const char* name;
            LossWeights weights;
        };
        const Case cases[] = {
            {"chamfer_sq_pruned", {1.0, 0.0, 0.0, 0.8, true}},
            {"chamfer_sq_unpruned", {1.0, 0.0, 0.0, 1e9, true}},
            {"chamfer_l1_pruned", {1.0, 0.0, 0.0, 0.8, false}},
            {"chamfer_l1_unpruned", {1.0, 0.0, 0.0, 1e9, false}},
            {"edge", {0.0, 1.0, 0.0, 1.0, true}},
            {"laplacian", {0.0, 0.0, 1.0, 1.0, true}},
            // Reference weight ratios normalized to unit scale; at the raw
            // 2e5 scale FD noise swamps the small cross-term components.
            {"combined", {0.01, 1.0, 0.05, 0.8, true}},
        };
        for (const Case& c : cases) {
            double worst = gradcheck_worst(mesh, scan, c.weights, rng);
            bool pass = worst < 1e-4;
            ok = ok && pass;
            std::printf("mesh %d %-22s rel.err %.3e %s\n", m, c.name, worst,
                        pass ? "ok" : "FAIL");
        }
    }
    return ok ? kExitOk : kExitCompute;
}
