// pipeline_smoke — drives the CLI through the whole pipeline on the synthetic
// family: gen-fixtures -> register (8 scans) -> bake -> postprocess-uv ->
// fit-pca -> sample -> metrics, plus fit-latent completion and the exit-code
// contract. Usage: pipeline_smoke <path-to-headcraft-cli>.

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "headcraft/shape_model.hpp"
#include "headcraft/uv_codec.hpp"

using namespace headcraft;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void check(bool ok, const std::string& what) {
    std::printf("%s %s\n", ok ? "ok  " : "FAIL", what.c_str());
    if (!ok) ++g_failures;
}

int run(const std::string& cmd) { return std::system((cmd + " >/dev/null 2>&1").c_str()); }

int exit_code(int system_status) {
#if defined(_WIN32)
    return system_status;
#else
    return WEXITSTATUS(system_status);
#endif
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: pipeline_smoke <headcraft-cli>\n";
        return 2;
    }
    std::string cli = argv[1];
    fs::path work = fs::temp_directory_path() / "headcraft_pipeline_smoke";
    fs::remove_all(work);
    fs::create_directories(work);
    const std::string fx = (work / "fx").string();

    check(run(cli + " gen-fixtures --out " + fx +
              " --seed 11 --family-size 8 --base-subdivisions 2 --map-iterations 1 "
              "--scan-points 1500") == 0,
          "gen-fixtures");

    // Exit-code contract: missing scan path is a usage error naming the path.
    {
        std::string cmd = cli + " register --scan " + fx + "/nope.ply --template " + fx +
                          "/template_base.obj --out " + (work / "none").string() +
                          " 2> " + (work / "err.txt").string() + " >/dev/null";
        int status = std::system(cmd.c_str());
        std::ifstream err(work / "err.txt");
        std::stringstream ss;
        ss << err.rdbuf();
        check(exit_code(status) == 2 && ss.str().find("nope.ply") != std::string::npos,
              "missing scan exits 2 and names the path");
    }
    check(exit_code(std::system(
              (cli + " register --dry-run --scan x --template y >" + (work / "dry.txt").string() +
               " 2>/dev/null")
                  .c_str())) == 0,
          "register --dry-run exits 0");
    {
        std::ifstream dry(work / "dry.txt");
        std::stringstream ss;
        ss << dry.rdbuf();
        check(ss.str().find("registration.stage1.chamfer = 2000") != std::string::npos &&
                  ss.str().find("registration.stage1.edge = 200000") != std::string::npos,
              "dry-run prints the resolved reference defaults");
    }

    std::string manifest = (work / "scans.txt").string();
    {
        std::ofstream m(manifest);
        for (int i = 0; i < 8; ++i) {
            char name[64];
            std::snprintf(name, sizeof(name), "/family_%02d.ply", i);
            m << fx << name << "\n";
        }
    }
    fs::path cfg_path = work / "fast.cfg";
    {
        // Fast, fixture-scaled stage weights; the shrink regularizers are
        // resolution dependent and this template is coarse.
        std::ofstream cfg(cfg_path);
        cfg << "registration.stage1.steps = 120\n"
               "registration.stage2.steps = 120\n"
               "registration.stage1.edge = 2000\n"
               "registration.stage1.laplacian = 100\n"
               "registration.stage2.edge = 200\n"
               "registration.stage2.laplacian = 10\n";
    }
    std::string reg_dir = (work / "reg").string();
    check(run(cli + " register --manifest " + manifest + " --template " + fx +
              "/template_base.obj --subdivide 1 --config " + cfg_path.string() +
              " --workers 4 --out " + reg_dir) == 0,
          "register 8 scans");
    check(fs::exists(reg_dir + "/summary.csv") && fs::exists(reg_dir + "/family_07_trace.csv"),
          "register outputs present");

    std::string tpl = reg_dir + "/template_base_subdivided.obj";
    std::string maps;
    bool baked_ok = true;
    for (int i = 0; i < 8; ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "family_%02d", i);
        std::string raw = (work / (std::string(name) + ".hcuv")).string();
        baked_ok = baked_ok && run(cli + " bake --template " + tpl + " --displacements " + reg_dir +
                                   "/" + name + "_displacements.hcdt --out " + raw +
                                   " --resolution 128") == 0;
        baked_ok = baked_ok &&
                   run(cli + " postprocess-uv --template " + tpl + " --map " + raw + " --out " +
                       raw) == 0;
        maps += " " + raw;
    }
    check(baked_ok, "bake + postprocess 8 maps");

    std::string model = (work / "model.hcpc").string();
    check(run(cli + " fit-pca --maps" + maps + " --components 7 --out " + model) == 0,
          "fit-pca K=7");

    check(run(cli + " sample --model " + model + " --count 3 --psi 0.7 --seed 21 --out-prefix " +
              (work / "gen").string()) == 0,
          "sample 3 maps");

    // psi = 0 reproduces the stored mean exactly.
    check(run(cli + " sample --model " + model + " --count 1 --psi 0 --seed 1 --out-prefix " +
              (work / "mean").string()) == 0,
          "sample psi=0");
    {
        LinearShapeModel m = load_model(model);
        UvMap mean_map = load_uv_map((work / "mean_000.hcuv").string());
        double worst = 0.0;
        for (std::size_t i = 0; i < m.valid_index.size(); ++i) {
            std::size_t t = m.valid_index[i];
            Eigen::Index row = 3 * static_cast<Eigen::Index>(i);
            worst = std::max(worst, std::abs(mean_map.data[t].x - m.mean[row]));
            worst = std::max(worst, std::abs(mean_map.data[t].y - m.mean[row + 1]));
            worst = std::max(worst, std::abs(mean_map.data[t].z - m.mean[row + 2]));
        }
        // Raw maps store float32, so equality holds to float precision.
        check(worst < 1e-6, "psi=0 sample equals the stored mean");
    }

    // HEADCRAFT_SEED env default matches an explicit --seed.
    check(run("HEADCRAFT_SEED=21 " + cli + " sample --model " + model +
              " --count 1 --psi 0.7 --out-prefix " + (work / "env").string()) == 0,
          "sample with HEADCRAFT_SEED");
    {
        std::ifstream a(work / "gen_000.hcuv", std::ios::binary);
        std::ifstream b(work / "env_000.hcuv", std::ios::binary);
        std::stringstream sa, sb;
        sa << a.rdbuf();
        sb << b.rdbuf();
        check(!sa.str().empty() && sa.str() == sb.str(), "HEADCRAFT_SEED matches --seed");
    }

    // Masked completion through the CLI: hide the face half of a held-out map.
    {
        LinearShapeModel m = load_model(model);
        std::vector<std::uint8_t> mask(static_cast<std::size_t>(m.width) * m.height, 0);
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width / 2; ++x)
                mask[static_cast<std::size_t>(y) * m.width + x] = 255;
        write_png8_gray((work / "half.png").string(), mask, m.width, m.height);

        std::string target = (work / "family_07.hcuv").string();
        check(run(cli + " fit-latent --model " + model + " --target " + target + " --mask " +
                  (work / "half.png").string() + " --out " + (work / "completed.hcuv").string()) ==
                  0,
              "fit-latent with half mask");

        UvMap target_map = load_uv_map(target);
        UvMap completed = load_uv_map((work / "completed.hcuv").string());
        UvMap mean_map = load_uv_map((work / "mean_000.hcuv").string());
        double fit_err = 0.0, base_err = 0.0;
        for (std::uint32_t t : m.valid_index) {
            int x = static_cast<int>(t) % m.width;
            if (x < m.width / 2) continue;  // hidden half only
            fit_err += dist2(completed.data[t], target_map.data[t]);
            base_err += dist2(mean_map.data[t], target_map.data[t]);
        }
        check(fit_err < base_err, "hidden-half completion beats the mean baseline");
    }

    // apply: displace the template with a sampled map.
    check(run(cli + " apply --template " + tpl + " --map " + (work / "gen_000.hcuv").string() +
              " --out " + (work / "gen_000.obj").string()) == 0,
          "apply sampled map");

    // metrics: generated maps applied to the template vs the fixture scans.
    bool applied = true;
    std::string gen_meshes;
    for (int i = 0; i < 3; ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "gen_%03d", i);
        applied = applied && run(cli + " apply --template " + tpl + " --map " +
                                 (work / (std::string(name) + ".hcuv")).string() + " --out " +
                                 (work / (std::string(name) + ".obj")).string()) == 0;
        gen_meshes += " --gen " + (work / (std::string(name) + ".obj")).string();
    }
    check(applied, "apply 3 sampled maps");
    std::string report = (work / "report.json").string();
    {
        std::string refs;
        for (int i = 0; i < 8; ++i) {
            char name[64];
            std::snprintf(name, sizeof(name), "/family_%02d.ply", i);
            refs += " --ref " + fx + name;
        }
        check(run(cli + " metrics" + gen_meshes + refs + " --seed 4 --out " + report) == 0,
              "metrics");
    }
    {
        std::ifstream in(report);
        nlohmann::json j;
        in >> j;
        double cov = j["cov_percent"].get<double>();
        double jsd_val = j["jsd_x100"].get<double>();
        double mmd_val = j["mmd_x1000"].get<double>();
        check(cov > 0.0, "COV > 0 (got " + std::to_string(cov) + ")");
        check(std::isfinite(jsd_val) && jsd_val >= 0.0, "JSD finite");
        check(std::isfinite(mmd_val) && mmd_val >= 0.0, "MMD finite");
    }

    // Identity pre-transform flags leave registration outputs unchanged.
    {
        std::string pre_dir = (work / "pre").string();
        check(run(cli + " register --scan " + fx + "/family_00.ply --template " + fx +
                  "/template_base.obj --subdivide 1 --config " + cfg_path.string() +
                  " --pre-scale 1 --pre-rotate 0 0 0 --pre-translate 0 0 0 --out " + pre_dir) == 0,
              "register with identity pre-transform");
        std::ifstream a(reg_dir + "/family_00_displacements.hcdt", std::ios::binary);
        std::ifstream b(pre_dir + "/family_00_displacements.hcdt", std::ios::binary);
        std::stringstream sa, sb;
        sa << a.rdbuf();
        sb << b.rdbuf();
        check(!sa.str().empty() && sa.str() == sb.str(),
              "identity pre-transform reproduces the plain run");
    }

    // metrics with a subject manifest (one reference per subject for COV).
    {
        std::string subjects = (work / "subjects.txt").string();
        std::ofstream s(subjects);
        s << fx << "/family_00.ply subjA\n"
          << fx << "/family_01.ply subjA\n"
          << fx << "/family_02.ply subjB\n";
        s.close();
        std::string rep = (work / "report_subjects.json").string();
        check(run(cli + " metrics" + gen_meshes + " --ref " + fx + "/family_00.ply --ref " + fx +
                  "/family_01.ply --ref " + fx + "/family_02.ply --subject-manifest " + subjects +
                  " --seed 4 --out " + rep) == 0,
              "metrics with subject manifest");
        std::ifstream in(rep);
        nlohmann::json j;
        in >> j;
        check(j.contains("cov_percent"), "subject-filtered report parses");
    }

    // animate: two frames of the base template driven by a sampled map.
    check(run(cli + " animate --neutral " + fx + "/template_base.obj --frames " + fx +
              "/template_base.obj " + fx + "/template_base.obj --map " +
              (work / "gen_000.hcuv").string() + " --subdivide 1 --out " +
              (work / "anim").string()) == 0,
          "animate 2 frames");
    check(fs::exists(work / "anim" / "frame_00000.obj") &&
              fs::exists(work / "anim" / "frame_00001.obj"),
          "animation frames written");

    // gradcheck subcommand.
    check(run(cli + " gradcheck --meshes 2 --seed 3") == 0, "gradcheck");

    if (g_failures > 0) {
        std::printf("%d smoke step(s) failed\n", g_failures);
        return 1;
    }
    std::printf("pipeline smoke passed\n");
    return 0;
}
