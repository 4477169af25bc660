#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "headcraft/config.hpp"

using namespace headcraft;

TEST_CASE("empty config reproduces the reference defaults") {
    std::istringstream empty("");
    PipelineConfig cfg = parse_config_text(empty);

    CHECK(cfg.stage1.weights.chamfer == 2e3);
    CHECK(cfg.stage1.weights.edge == 2e5);
    CHECK(cfg.stage1.weights.laplacian == 1e4);
    CHECK(cfg.stage1.weights.prune_threshold == 1.0);
    CHECK(cfg.stage1.learning_rate == 3e-2);
    CHECK(cfg.stage2.weights.chamfer == 2e4);
    CHECK(cfg.stage2.weights.edge == 2e4);
    CHECK(cfg.stage2.weights.laplacian == 1e4);
    CHECK(cfg.stage2.weights.prune_threshold == 1.0);
    CHECK(cfg.stage2.learning_rate == 3e-4);

    CHECK(cfg.partial_stage1.weights.chamfer == 2e3);
    CHECK(cfg.partial_stage1.weights.edge == 8e5);
    CHECK(cfg.partial_stage1.weights.laplacian == 1e5);
    CHECK(cfg.partial_stage1.weights.prune_threshold == 10.0);
    CHECK(cfg.partial_stage2.weights.prune_threshold == 0.1);

    CHECK(cfg.partial_proximity == 0.1);
    CHECK(cfg.partial_proximity_sparse == 0.3);
    CHECK(cfg.partial_hull_expansion == 1.5);
    CHECK(cfg.partial_floor_quantile == 0.3);

    CHECK(cfg.uv_resolution == 256);
    CHECK(cfg.blend_radius == 10);
    CHECK(cfg.psi == 0.7);
    CHECK(cfg.subdivision_iterations == 3);
    CHECK(cfg.latent_face_weight == 10.0 / 256.0);
    CHECK(cfg.metric_samples == 10000);

    CHECK(cfg.smoothing[Region::lips] == 3);
    CHECK(cfg.smoothing[Region::face_skin] == 5);
    CHECK(cfg.smoothing[Region::scalp] == 10);
    CHECK(cfg.smoothing[Region::neck] == 10);
    CHECK(cfg.smoothing[Region::ears] == 0);
    CHECK(cfg.smoothing[Region::eyeballs] == 0);
    CHECK(cfg.smoothing[Region::inner_mouth] == 0);
}

TEST_CASE("unknown keys are rejected with the line number") {
    std::istringstream in("registration.stage1.lr = 0.01\nregistration.stage1.lrr = 0.01\n");
    CHECK_THROWS_WITH(parse_config_text(in), Catch::Matchers::ContainsSubstring("line 2") &&
                                                 Catch::Matchers::ContainsSubstring("lrr"));
}

TEST_CASE("values parse and comments are skipped") {
    std::istringstream in(
        "# override a few knobs\n"
        "seed = 99\n"
        "workers = 4\n"
        "registration.stage1.steps = 250\n"
        "registration.stage2.lr = 1e-3\n"
        "partial.stage2.prune = 0.25\n"
        "uv.resolution = 128\n"
        "sample.psi = 0.5\n"
        "smoothing.neck = 2\n"
        "partial.vertical_axis = z\n");
    PipelineConfig cfg = parse_config_text(in);
    CHECK(cfg.seed == 99);
    CHECK(cfg.workers == 4);
    CHECK(cfg.stage1.steps == 250);
    CHECK(cfg.stage2.learning_rate == 1e-3);
    CHECK(cfg.partial_stage2.weights.prune_threshold == 0.25);
    CHECK(cfg.uv_resolution == 128);
    CHECK(cfg.psi == 0.5);
    CHECK(cfg.smoothing[Region::neck] == 2);
    CHECK(cfg.vertical_axis == 2);
}

TEST_CASE("malformed lines are rejected") {
    std::istringstream no_eq("registration.stage1.lr 0.01\n");
    CHECK_THROWS(parse_config_text(no_eq));
    std::istringstream bad_value("registration.stage1.lr = fast\n");
    CHECK_THROWS(parse_config_text(bad_value));
    std::istringstream bad_bool("registration.stage1.squared_chamfer = maybe\n");
    CHECK_THROWS(parse_config_text(bad_bool));
}

TEST_CASE("dump/parse roundtrip is stable") {
    std::istringstream in("registration.stage1.steps = 123\nsample.psi = 0.9\n");
    PipelineConfig cfg = parse_config_text(in);
    std::string dumped = dump_config(cfg);
    std::istringstream again(dumped);
    PipelineConfig cfg2 = parse_config_text(again);
    CHECK(cfg2.stage1.steps == 123);
    CHECK(cfg2.psi == 0.9);
    CHECK(dump_config(cfg2) == dumped);
}
