// config.hpp — pipeline configuration: line-oriented `key = value` text with
// dotted section prefixes. Unknown keys are rejected outright; a silent typo
// in a weight name would otherwise burn a day.
//
// An empty config reproduces the reference hyperparameters: stage weights
// (2e3, 2e5, 1e4) / (2e4, 2e4, 1e4), learning rates 3e-2 / 3e-4, pruning 1.0,
// partial-stage overrides (8e5, 1e5, prune 10.0 / 0.1), proximity 0.1 dense
// and 0.3 sparse, UV resolution 256, blend radius 10, psi 0.7.
#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "headcraft/registration.hpp"
#include "headcraft/smoothing.hpp"

namespace headcraft {

struct PipelineConfig {
    std::uint64_t seed = 0;
    int workers = 1;

    int subdivision_iterations = 3;

    StageConfig stage1 = default_stage1_config();
    StageConfig stage2 = default_stage2_config();
    StageConfig partial_stage1 = default_partial_stage1_config();
    StageConfig partial_stage2 = default_partial_stage2_config();

    double partial_proximity = 0.1;
    double partial_proximity_sparse = 0.3;
    double partial_hull_expansion = 1.5;
    double partial_floor_quantile = 0.3;
    int vertical_axis = 1;  // +y

    int uv_resolution = 256;
    int blend_radius = 10;
    double face_circle_u = 0.75;
    double face_circle_v = 0.5;
    double face_circle_radius = 0.12;

    int pca_components = 64;  // upper bound; actual K = min(this, S-1)
    double psi = 0.7;
    double latent_reg = 1e-3;
    double latent_face_weight = 10.0 / 256.0;
    int latent_refine_steps = 0;
    double latent_refine_lr = 1e-2;

    std::size_t metric_samples = 10000;
    int metric_grid = 64;

    SmoothingSchedule smoothing = default_smoothing_schedule();
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

struct ConfigParser {
    PipelineConfig& cfg;
    std::map<std::string, std::function<void(const std::string&)>> setters;

    explicit ConfigParser(PipelineConfig& c) : cfg(c) {
        auto set_double = [](double& slot) {
            return [&slot](const std::string& v) { slot = parse_double(v); };
        };
        auto set_int = [](int& slot) {
            return [&slot](const std::string& v) { slot = parse_int(v); };
        };

        setters["seed"] = [this](const std::string& v) {
            cfg.seed = static_cast<std::uint64_t>(std::stoull(v));
        };
        setters["workers"] = set_int(cfg.workers);
        setters["subdivision.iterations"] = set_int(cfg.subdivision_iterations);

        register_stage("registration.stage1", cfg.stage1);
        register_stage("registration.stage2", cfg.stage2);
        register_stage("partial.stage1", cfg.partial_stage1);
        register_stage("partial.stage2", cfg.partial_stage2);

        setters["partial.proximity"] = set_double(cfg.partial_proximity);
        setters["partial.proximity_sparse"] = set_double(cfg.partial_proximity_sparse);
        setters["partial.expansion"] = set_double(cfg.partial_hull_expansion);
        setters["partial.floor_quantile"] = set_double(cfg.partial_floor_quantile);
        setters["partial.vertical_axis"] = [this](const std::string& v) {
            if (v == "x") cfg.vertical_axis = 0;
            else if (v == "y") cfg.vertical_axis = 1;
            else if (v == "z") cfg.vertical_axis = 2;
            else throw std::runtime_error("vertical_axis must be x, y, or z");
        };

        setters["uv.resolution"] = set_int(cfg.uv_resolution);
        setters["uv.blend_radius"] = set_int(cfg.blend_radius);
        setters["uv.face_circle_u"] = set_double(cfg.face_circle_u);
        setters["uv.face_circle_v"] = set_double(cfg.face_circle_v);
        setters["uv.face_circle_radius"] = set_double(cfg.face_circle_radius);

        setters["pca.components"] = set_int(cfg.pca_components);
        setters["sample.psi"] = set_double(cfg.psi);
        setters["latent.reg"] = set_double(cfg.latent_reg);
        setters["latent.face_weight"] = set_double(cfg.latent_face_weight);
        setters["latent.refine_steps"] = set_int(cfg.latent_refine_steps);
        setters["latent.refine_lr"] = set_double(cfg.latent_refine_lr);

        setters["metrics.samples"] = [this](const std::string& v) {
            cfg.metric_samples = static_cast<std::size_t>(std::stoull(v));
        };
        setters["metrics.grid"] = set_int(cfg.metric_grid);

        for (int r = 0; r < kRegionCount; ++r) {
            Region region = static_cast<Region>(r);
            setters[std::string("smoothing.") + region_name(region)] =
                [this, region](const std::string& v) {
                    cfg.smoothing[region] = parse_int(v);
                };
        }
    }

    static double parse_double(const std::string& v) {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::runtime_error("bad number '" + v + "'");
        return d;
    }

    static int parse_int(const std::string& v) {
        std::size_t pos = 0;
        int i = std::stoi(v, &pos);
        if (pos != v.size()) throw std::runtime_error("bad integer '" + v + "'");
        return i;
    }

    void register_stage(const std::string& prefix, StageConfig& stage) {
        setters[prefix + ".chamfer"] = [&stage](const std::string& v) {
            stage.weights.chamfer = parse_double(v);
        };
        setters[prefix + ".edge"] = [&stage](const std::string& v) {
            stage.weights.edge = parse_double(v);
        };
        setters[prefix + ".laplacian"] = [&stage](const std::string& v) {
            stage.weights.laplacian = parse_double(v);
        };
        setters[prefix + ".prune"] = [&stage](const std::string& v) {
            stage.weights.prune_threshold = parse_double(v);
        };
        setters[prefix + ".squared_chamfer"] = [&stage](const std::string& v) {
            if (v == "true" || v == "1") stage.weights.squared_chamfer = true;
            else if (v == "false" || v == "0") stage.weights.squared_chamfer = false;
            else throw std::runtime_error("squared_chamfer must be true or false");
        };
        setters[prefix + ".lr"] = [&stage](const std::string& v) {
            stage.learning_rate = parse_double(v);
        };
        setters[prefix + ".steps"] = [&stage](const std::string& v) {
            stage.steps = parse_int(v);
        };
        setters[prefix + ".recompute_normals"] = [&stage](const std::string& v) {
            if (v == "true" || v == "1") stage.recompute_normals_each_step = true;
            else if (v == "false" || v == "0") stage.recompute_normals_each_step = false;
            else throw std::runtime_error("recompute_normals must be true or false");
        };
    }

    void apply(const std::string& key, const std::string& value, std::size_t line_no) {
        auto it = setters.find(key);
        if (it == setters.end())
            throw std::runtime_error("config line " + std::to_string(line_no) + ": unknown key '" +
                                     key + "'");
        try {
            it->second(value);
        } catch (const std::runtime_error&) {
            throw;
        } catch (const std::exception&) {
            throw std::runtime_error("config line " + std::to_string(line_no) + ": bad value '" +
                                     value + "' for " + key);
        }
    }
};

}  // namespace detail

// Parses on top of `base`, so keys the file omits keep their incoming values.
inline PipelineConfig parse_config_text(std::istream& in, const PipelineConfig& base = {}) {
    PipelineConfig cfg = base;
    detail::ConfigParser parser(cfg);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string stripped = detail::trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": expected 'key = value'");
        std::string key = detail::trim(stripped.substr(0, eq));
        std::string value = detail::trim(stripped.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": empty key or value");
        parser.apply(key, value, line_no);
    }
    return cfg;
}

inline PipelineConfig load_config(const std::string& path, const PipelineConfig& base = {}) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    return parse_config_text(in, base);
}

// Resolved-config dump; `register --dry-run` prints this.
inline std::string dump_config(const PipelineConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    out << "seed = " << cfg.seed << "\n";
    out << "workers = " << cfg.workers << "\n";
    out << "subdivision.iterations = " << cfg.subdivision_iterations << "\n";
    auto dump_stage = [&](const char* prefix, const StageConfig& s) {
        out << prefix << ".chamfer = " << s.weights.chamfer << "\n";
        out << prefix << ".edge = " << s.weights.edge << "\n";
        out << prefix << ".laplacian = " << s.weights.laplacian << "\n";
        out << prefix << ".prune = " << s.weights.prune_threshold << "\n";
        out << prefix << ".squared_chamfer = " << (s.weights.squared_chamfer ? "true" : "false")
            << "\n";
        out << prefix << ".lr = " << s.learning_rate << "\n";
        out << prefix << ".steps = " << s.steps << "\n";
    };
    dump_stage("registration.stage1", cfg.stage1);
    dump_stage("registration.stage2", cfg.stage2);
    dump_stage("partial.stage1", cfg.partial_stage1);
    dump_stage("partial.stage2", cfg.partial_stage2);
    out << "partial.proximity = " << cfg.partial_proximity << "\n";
    out << "partial.proximity_sparse = " << cfg.partial_proximity_sparse << "\n";
    out << "partial.expansion = " << cfg.partial_hull_expansion << "\n";
    out << "partial.floor_quantile = " << cfg.partial_floor_quantile << "\n";
    out << "uv.resolution = " << cfg.uv_resolution << "\n";
    out << "uv.blend_radius = " << cfg.blend_radius << "\n";
    out << "pca.components = " << cfg.pca_components << "\n";
    out << "sample.psi = " << cfg.psi << "\n";
    out << "latent.reg = " << cfg.latent_reg << "\n";
    out << "latent.face_weight = " << cfg.latent_face_weight << "\n";
    out << "metrics.samples = " << cfg.metric_samples << "\n";
    out << "metrics.grid = " << cfg.metric_grid << "\n";
    for (int r = 0; r < kRegionCount; ++r) {
        Region region = static_cast<Region>(r);
        out << "smoothing." << region_name(region) << " = " << cfg.smoothing[region] << "\n";
    }
    return out.str();
}

}  // namespace headcraft
