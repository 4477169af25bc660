#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "headcraft/rng.hpp"
#include "headcraft/shape_model.hpp"

using namespace headcraft;

namespace {

// Tiny synthetic maps with a shared validity mask.
UvMap blank_map(int res) {
    UvMap map(res, res);
    for (std::size_t i = 0; i < map.valid.size(); ++i) map.valid[i] = (i % 3 != 0) ? 1 : 0;
    return map;
}

UvMap random_map(Rng& rng, int res) {
    UvMap map = blank_map(res);
    for (std::size_t i = 0; i < map.data.size(); ++i)
        if (map.valid[i]) map.data[i] = {rng.normal(), rng.normal(), rng.normal()};
    return map;
}

double masked_l2(const UvMap& a, const UvMap& b, const std::vector<std::uint8_t>& mask) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        if (a.valid[i] && mask[i]) sum += dist2(a.data[i], b.data[i]);
    return std::sqrt(sum);
}

}  // namespace

TEST_CASE("two-sample PCA: mean and single component") {
    Rng rng(1);
    UvMap a = random_map(rng, 8);
    UvMap b = random_map(rng, 8);
    LinearShapeModel model = fit_pca({a, b}, 1);

    UvMap mean_map = sample_model(model, nullptr, 0.0);
    for (std::size_t i = 0; i < a.data.size(); ++i)
        if (a.valid[i])
            CHECK(dist(mean_map.data[i], (a.data[i] + b.data[i]) * 0.5) < 1e-12);

    LatentCode ca = project(model, a);
    UvMap ra = reconstruct(model, ca);
    for (std::size_t i = 0; i < a.data.size(); ++i)
        if (a.valid[i]) CHECK(dist(ra.data[i], a.data[i]) < 1e-10);
}

TEST_CASE("full-rank PCA reconstructs every training map") {
    Rng rng(2);
    std::vector<UvMap> maps;
    for (int s = 0; s < 6; ++s) maps.push_back(random_map(rng, 8));
    LinearShapeModel model = fit_pca(maps, 5);
    for (const UvMap& m : maps) {
        UvMap r = reconstruct(model, project(model, m));
        double err = 0.0;
        for (std::size_t i = 0; i < m.data.size(); ++i)
            if (m.valid[i]) err += dist2(r.data[i], m.data[i]);
        CHECK(std::sqrt(err) < 1e-6);
    }
}

TEST_CASE("PCA recovers a planted subspace") {
    // Family = mu* + sum_i c_i B*_i with orthogonal planted directions.
    Rng rng(3);
    const int res = 8;
    UvMap mu = random_map(rng, res);
    std::vector<UvMap> dirs;
    for (int k = 0; k < 2; ++k) dirs.push_back(random_map(rng, res));
    // Orthogonalize dir1 against dir0 texel-wise over the valid set.
    double d01 = 0.0, d00 = 0.0;
    for (std::size_t i = 0; i < mu.data.size(); ++i)
        if (mu.valid[i]) {
            d01 += dot(dirs[1].data[i], dirs[0].data[i]);
            d00 += dot(dirs[0].data[i], dirs[0].data[i]);
        }
    for (std::size_t i = 0; i < mu.data.size(); ++i)
        if (mu.valid[i]) dirs[1].data[i] -= dirs[0].data[i] * (d01 / d00);

    std::vector<UvMap> family;
    for (int s = 0; s < 8; ++s) {
        UvMap m = blank_map(res);
        double c0 = rng.normal(), c1 = rng.normal();
        for (std::size_t i = 0; i < m.data.size(); ++i)
            if (m.valid[i])
                m.data[i] = mu.data[i] + dirs[0].data[i] * c0 + dirs[1].data[i] * c1;
        family.push_back(m);
    }
    LinearShapeModel model = fit_pca(family, 2);
    // Planted directions project fully into the recovered span.
    for (const UvMap& dir : dirs) {
        Eigen::VectorXd v = detail::flatten_map(dir, model.valid_index);
        Eigen::VectorXd resid = v - model.basis * (model.basis.transpose() * v);
        CHECK(resid.norm() / v.norm() < 1e-8);
    }
}

TEST_CASE("basis is orthonormal and scales are non-increasing") {
    Rng rng(4);
    std::vector<UvMap> maps;
    for (int s = 0; s < 7; ++s) maps.push_back(random_map(rng, 8));
    LinearShapeModel model = fit_pca(maps, 6);
    Eigen::MatrixXd gram = model.basis.transpose() * model.basis;
    CHECK((gram - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-8);
    for (int k = 1; k < 6; ++k) CHECK(model.scales[k] <= model.scales[k - 1] + 1e-12);
}

TEST_CASE("sampling: psi 0 returns the mean bitwise; basis directions scale") {
    Rng rng(5);
    std::vector<UvMap> maps;
    for (int s = 0; s < 5; ++s) maps.push_back(random_map(rng, 8));
    LinearShapeModel model = fit_pca(maps, 3);

    UvMap mean_map = sample_model(model, nullptr, 0.0, 42);
    for (std::size_t i = 0; i < model.valid_index.size(); ++i) {
        std::size_t t = model.valid_index[i];
        CHECK(mean_map.data[t].x == model.mean[3 * static_cast<Eigen::Index>(i)]);
        CHECK(mean_map.data[t].y == model.mean[3 * static_cast<Eigen::Index>(i) + 1]);
        CHECK(mean_map.data[t].z == model.mean[3 * static_cast<Eigen::Index>(i) + 2]);
    }

    LatentCode e1;
    e1.coeffs = {1.0, 0.0, 0.0};
    UvMap u1 = sample_model(model, &e1, 1.0);
    for (std::size_t i = 0; i < model.valid_index.size(); ++i) {
        std::size_t t = model.valid_index[i];
        Eigen::Index row = 3 * static_cast<Eigen::Index>(i);
        CHECK_THAT(u1.data[t].x,
                   Catch::Matchers::WithinAbs(model.mean[row] + model.scales[0] * model.basis(row, 0),
                                              1e-12));
    }

    SECTION("sampling is linear in z") {
        LatentCode z2;
        z2.coeffs = {2.0, 0.0, 0.0};
        UvMap u2 = sample_model(model, &z2, 1.0);
        for (std::size_t t : model.valid_index) {
            Vec3 lhs = u2.data[t] - mean_map.data[t];
            Vec3 rhs = (u1.data[t] - mean_map.data[t]) * 2.0;
            CHECK(dist(lhs, rhs) < 1e-10);
        }
    }

    SECTION("deterministic given seed") {
        UvMap s1 = sample_model(model, nullptr, 0.7, 9);
        UvMap s2 = sample_model(model, nullptr, 0.7, 9);
        for (std::size_t i = 0; i < s1.data.size(); ++i) CHECK(s1.data[i] == s2.data[i]);
    }
}

TEST_CASE("masked fit: full mask with zero ridge equals projection") {
    Rng rng(6);
    std::vector<UvMap> maps;
    for (int s = 0; s < 6; ++s) maps.push_back(random_map(rng, 8));
    LinearShapeModel model = fit_pca(maps, 4);

    // Target inside the span.
    LatentCode truth;
    truth.coeffs = {0.7, -1.2, 0.4, 2.0};
    UvMap target = reconstruct(model, truth);

    MaskedFitOptions opts;
    opts.reg = 0.0;
    std::vector<std::uint8_t> full(static_cast<std::size_t>(model.width) * model.height, 1);
    LatentCode fit = fit_latent_masked(model, target, full, opts);
    for (std::size_t k = 0; k < truth.coeffs.size(); ++k)
        CHECK_THAT(fit.coeffs[k], Catch::Matchers::WithinAbs(truth.coeffs[k], 1e-8));

    LatentCode proj = project(model, target);
    for (std::size_t k = 0; k < truth.coeffs.size(); ++k)
        CHECK_THAT(fit.coeffs[k], Catch::Matchers::WithinAbs(proj.coeffs[k], 1e-8));
}

TEST_CASE("masked fit: huge ridge collapses to the mean") {
    Rng rng(7);
    std::vector<UvMap> maps;
    for (int s = 0; s < 5; ++s) maps.push_back(random_map(rng, 8));
    LinearShapeModel model = fit_pca(maps, 3);
    MaskedFitOptions opts;
    opts.reg = 1e14;
    std::vector<std::uint8_t> full(static_cast<std::size_t>(model.width) * model.height, 1);
    LatentCode fit = fit_latent_masked(model, maps[0], full, opts);
    for (double c : fit.coeffs) CHECK(std::abs(c) < 1e-6);
}

TEST_CASE("masked fit: half mask beats the mean baseline on the hidden half") {
    Rng rng(8);
    const int res = 16;
    // Low-rank family so half the texels still pin the latent down.
    std::vector<UvMap> basis_dirs;
    for (int k = 0; k < 3; ++k) {
        UvMap m = blank_map(res);
        for (std::size_t i = 0; i < m.data.size(); ++i)
            if (m.valid[i]) m.data[i] = {rng.normal(), rng.normal(), rng.normal()};
        basis_dirs.push_back(m);
    }
    std::vector<UvMap> family;
    for (int s = 0; s < 7; ++s) {
        UvMap m = blank_map(res);
        double c[3] = {rng.normal(), rng.normal(), rng.normal()};
        for (std::size_t i = 0; i < m.data.size(); ++i)
            if (m.valid[i])
                m.data[i] = basis_dirs[0].data[i] * c[0] + basis_dirs[1].data[i] * c[1] +
                            basis_dirs[2].data[i] * c[2];
        family.push_back(m);
    }
    LinearShapeModel model = fit_pca(family, 3);

    std::vector<std::uint8_t> visible(static_cast<std::size_t>(res) * res, 0);
    std::vector<std::uint8_t> hidden(static_cast<std::size_t>(res) * res, 0);
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x)
            (x < res / 2 ? visible : hidden)[static_cast<std::size_t>(y) * res + x] = 1;

    const UvMap& target = family[0];
    MaskedFitOptions opts;
    opts.reg = 1e-6;
    LatentCode fit = fit_latent_masked(model, target, visible, opts);
    UvMap completed = reconstruct(model, fit);
    UvMap mean_map = sample_model(model, nullptr, 0.0);
    double fit_err = masked_l2(target, completed, hidden);
    double baseline = masked_l2(target, mean_map, hidden);
    CHECK(fit_err < baseline);
}

TEST_CASE("masked fit: singular system without ridge is reported") {
    Rng rng(9);
    std::vector<UvMap> maps;
    for (int s = 0; s < 6; ++s) maps.push_back(random_map(rng, 8));
    LinearShapeModel model = fit_pca(maps, 5);
    // One valid texel = 3 rows < 5 unknowns: singular without ridge.
    std::vector<std::uint8_t> tiny(static_cast<std::size_t>(model.width) * model.height, 0);
    tiny[model.valid_index[0]] = 1;
    MaskedFitOptions opts;
    opts.reg = 0.0;
    CHECK_THROWS_WITH(fit_latent_masked(model, maps[0], tiny, opts),
                      Catch::Matchers::ContainsSubstring("singular"));
    opts.reg = 1e-3;
    CHECK_NOTHROW(fit_latent_masked(model, maps[0], tiny, opts));
}

TEST_CASE("iterative refinement stays close on an in-span target") {
    Rng rng(10);
    std::vector<UvMap> maps;
    for (int s = 0; s < 5; ++s) maps.push_back(random_map(rng, 8));
    LinearShapeModel model = fit_pca(maps, 3);
    model.face_mask.assign(static_cast<std::size_t>(model.width) * model.height, 0);
    LatentCode truth;
    truth.coeffs = {0.5, -0.25, 1.0};
    UvMap target = reconstruct(model, truth);
    std::vector<std::uint8_t> full(static_cast<std::size_t>(model.width) * model.height, 1);
    MaskedFitOptions opts;
    opts.reg = 0.0;
    opts.refine_steps = 50;
    opts.refine_lr = 1e-3;
    LatentCode fit = fit_latent_masked(model, target, full, opts);
    for (std::size_t k = 0; k < truth.coeffs.size(); ++k)
        CHECK_THAT(fit.coeffs[k], Catch::Matchers::WithinAbs(truth.coeffs[k], 0.05));
}

TEST_CASE("nearest_training: exact hit, perturbed hit, oracle equality") {
    Rng rng(11);
    std::vector<UvMap> maps;
    for (int s = 0; s < 5; ++s) maps.push_back(random_map(rng, 8));
    LinearShapeModel model = fit_pca(maps, 3);

    auto [idx, d] = nearest_training(model, maps, maps[3]);
    CHECK(idx == 3);
    CHECK(d == 0.0);

    UvMap noisy = maps[2];
    for (std::size_t i = 0; i < noisy.data.size(); ++i)
        if (noisy.valid[i]) noisy.data[i] += Vec3{1e-4, -1e-4, 1e-4};
    CHECK(nearest_training(model, maps, noisy).first == 2);

    // Brute-force oracle over the scalp half.
    UvMap query = random_map(rng, 8);
    auto [got, got_d] = nearest_training(model, maps, query);
    int oracle = -1;
    double oracle_d2 = 0.0;
    for (std::size_t s = 0; s < maps.size(); ++s) {
        double d2 = 0.0;
        for (std::uint32_t t : model.valid_index) {
            int x = static_cast<int>(t) % model.width;
            if (2 * x < model.width - 1) d2 += dist2(maps[s].data[t], query.data[t]);
        }
        if (oracle < 0 || d2 < oracle_d2) {
            oracle = static_cast<int>(s);
            oracle_d2 = d2;
        }
    }
    CHECK(got == oracle);
    CHECK_THAT(got_d, Catch::Matchers::WithinAbs(std::sqrt(oracle_d2), 1e-12));
}

TEST_CASE("model persistence: save/load keeps everything") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "headcraft_model_tests";
    fs::create_directories(dir);
    Rng rng(12);
    std::vector<UvMap> maps;
    for (int s = 0; s < 6; ++s) maps.push_back(random_map(rng, 8));
    LinearShapeModel model = fit_pca(maps, 4);
    model.face_mask = make_face_mask(8, 8, 0.75, 0.5, 0.2);

    std::string path = (dir / "model.hcpc").string();
    save_model(path, model);
    LinearShapeModel loaded = load_model(path);
    CHECK(loaded.width == model.width);
    CHECK(loaded.valid_index == model.valid_index);
    CHECK(loaded.face_mask == model.face_mask);
    CHECK((loaded.mean - model.mean).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.basis - model.basis).cwiseAbs().maxCoeff() == 0.0);
    Eigen::MatrixXd gram = loaded.basis.transpose() * loaded.basis;
    CHECK((gram - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("fit_pca input validation") {
    Rng rng(13);
    UvMap a = random_map(rng, 8);
    CHECK_THROWS(fit_pca({a}, 1));  // too few maps

    UvMap b = random_map(rng, 8);
    b.valid[b.valid.size() / 2] ^= 1;
    CHECK_THROWS_WITH(fit_pca({a, b}, 1), Catch::Matchers::ContainsSubstring("valid-texel"));

    UvMap c = random_map(rng, 8);
    CHECK_THROWS(fit_pca({a, c}, 2));  // K > S-1
}
