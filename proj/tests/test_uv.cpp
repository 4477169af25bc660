#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <set>
#include <utility>

#include "headcraft/fixtures.hpp"
#include "headcraft/rng.hpp"
#include "headcraft/seam.hpp"
#include "headcraft/subdivision.hpp"
#include "headcraft/uv_codec.hpp"
#include "headcraft/uv_map.hpp"

using namespace headcraft;
namespace fs = std::filesystem;

namespace {

TemplateMesh full_square_triangle() {
    TemplateMesh mesh;
    mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    mesh.faces = {{0, 1, 2}};
    mesh.corner_uvs = {{Vec2{0, 0}, Vec2{1, 0}, Vec2{0, 1}}};
    mesh.regions.assign(3, Region::scalp);
    return mesh;
}

bool maps_equal(const UvMap& a, const UvMap& b) {
    if (a.width != b.width || a.height != b.height) return false;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        if (!(a.data[i] == b.data[i])) return false;
    return a.valid == b.valid;
}

}  // namespace

TEST_CASE("bake: zero displacements give zero texels") {
    TemplateMesh mesh = full_square_triangle();
    std::vector<Vec3> d(3, Vec3{});
    BakeResult r = bake(mesh, d, 64);
    std::size_t valid = 0;
    for (std::size_t i = 0; i < r.map.data.size(); ++i) {
        if (!r.map.valid[i]) continue;
        ++valid;
        CHECK(r.map.data[i] == Vec3{});
    }
    CHECK(valid > 1000);  // roughly half the 64x64 square
    CHECK(r.overlap_count == 0);
}

TEST_CASE("bake: constant displacement fills covered texels with the constant") {
    TemplateMesh mesh = full_square_triangle();
    std::vector<Vec3> d(3, Vec3{1, 2, 3});
    BakeResult r = bake(mesh, d, 32);
    for (std::size_t i = 0; i < r.map.data.size(); ++i)
        if (r.map.valid[i]) CHECK(dist(r.map.data[i], Vec3{1, 2, 3}) < 1e-12);
}

TEST_CASE("bake: linear field matches barycentric interpolation at texel centers") {
    TemplateMesh mesh = full_square_triangle();
    // Linear in UV because corner UVs and positions coincide in (x, y).
    auto field = [](double u, double v) {
        return Vec3{0.3 * u - 0.1 * v + 0.05, -0.2 * u + 0.4 * v, 0.7 * u + 0.1 * v - 0.2};
    };
    std::vector<Vec3> d = {field(0, 0), field(1, 0), field(0, 1)};
    const int res = 64;
    BakeResult r = bake(mesh, d, res);
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
            if (!r.map.is_valid(x, y)) continue;
            double u = static_cast<double>(x) / (res - 1);
            double v = static_cast<double>(y) / (res - 1);
            CHECK(dist(r.map.at(x, y), field(u, v)) < 1e-6);
        }
}

TEST_CASE("bake: adjacent triangles never double-write their shared edge") {
    TemplateMesh mesh;
    mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    mesh.faces = {{0, 1, 2}, {0, 2, 3}};
    mesh.corner_uvs = {{Vec2{0, 0}, Vec2{1, 0}, Vec2{1, 1}},
                       {Vec2{0, 0}, Vec2{1, 1}, Vec2{0, 1}}};
    mesh.regions.assign(4, Region::scalp);
    std::vector<Vec3> d(4, Vec3{});
    BakeResult r = bake(mesh, d, 64);
    CHECK(r.overlap_count == 0);
    // The interior is fully covered; the tie rule leaves some outer boundary
    // texels to the (absent) neighboring triangles.
    for (int y = 1; y < 63; ++y)
        for (int x = 1; x < 63; ++x) CHECK(r.map.is_valid(x, y));
}

TEST_CASE("sample: constant map returns the constant anywhere") {
    UvMap map(16, 16);
    for (auto& v : map.data) v = {4, 5, 6};
    SampleStats stats;
    CHECK(sample_bilinear(map, 0.37, 0.81, &stats) == Vec3{4, 5, 6});
    CHECK(sample_bilinear(map, 0.0, 1.0, &stats) == Vec3{4, 5, 6});
    CHECK(stats.clamped == 0);
}

TEST_CASE("sample: texel centers return their own values, outside UVs clamp") {
    UvMap map(8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) map.at(x, y) = {static_cast<double>(x), static_cast<double>(y), 0};
    SampleStats stats;
    Vec3 v = sample_bilinear(map, 3.0 / 7.0, 5.0 / 7.0, &stats);
    CHECK_THAT(v.x, Catch::Matchers::WithinAbs(3.0, 1e-12));
    CHECK_THAT(v.y, Catch::Matchers::WithinAbs(5.0, 1e-12));
    Vec3 clamped = sample_bilinear(map, 1.4, -0.2, &stats);
    CHECK(stats.clamped == 1);
    CHECK_THAT(clamped.x, Catch::Matchers::WithinAbs(7.0, 1e-12));
    CHECK_THAT(clamped.y, Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("seam: equalization sets both sides to the pair mean") {
    SeamTable seam = make_seam_table({{{3, 10}, {27, 10}}}, 32, 32);
    UvMap map(32, 32);
    map.at(3, 10) = {1, 2, 3};
    map.at(27, 10) = {3, 4, 5};
    map.valid[map.index(3, 10)] = 1;
    map.valid[map.index(27, 10)] = 1;
    UvMap out = process_seam(map, seam, 0);
    CHECK(out.at(3, 10) == Vec3{2, 3, 4});
    CHECK(out.at(27, 10) == Vec3{2, 3, 4});
}

TEST_CASE("seam: blend weight at distance 5 of radius 10 is one half") {
    SeamTable seam = make_seam_table({{{2, 16}, {29, 16}}}, 32, 32);
    UvMap map(32, 32);
    // Seam pair values a and b; an interior texel at distance 5 with value u.
    Vec3 a{2, 0, 0}, b{4, 0, 0}, u{10, 0, 0};
    map.at(2, 16) = a;
    map.at(29, 16) = b;
    map.at(7, 16) = u;  // distance 5 from (2,16), same half
    map.valid[map.index(2, 16)] = 1;
    map.valid[map.index(29, 16)] = 1;
    map.valid[map.index(7, 16)] = 1;
    UvMap out = process_seam(map, seam, 10);
    Vec3 s = (a + b) * 0.5;
    CHECK(dist(out.at(7, 16), s * 0.5 + u * 0.5) < 1e-12);
}

TEST_CASE("seam: constant map is unchanged") {
    SeamTable seam = make_seam_table({{{2, 16}, {29, 16}}}, 32, 32);
    UvMap map(32, 32);
    for (auto& v : map.data) v = {7, 7, 7};
    for (auto& f : map.valid) f = 1;
    UvMap out = process_seam(map, seam, 10);
    CHECK(maps_equal(out, map));
}

TEST_CASE("seam: processing is idempotent") {
    TemplateMesh mesh = subdivide(fixtures::make_template(2), 1);
    auto d = fixtures::bump_displacements(mesh, fixtures::family_patterns(),
                                          fixtures::family_amplitudes(2, 1));
    BakeResult baked = bake(mesh, d, 128);
    SeamTable seam = build_seam_table(mesh, 128, 128);
    REQUIRE_FALSE(seam.pairs.empty());

    UvMap once = process_seam(baked.map, seam, 10);
    UvMap twice = process_seam(once, seam, 10);
    CHECK(maps_equal(once, twice));

    SECTION("pairs are exactly equal after processing") {
        for (const SeamPair& p : seam.pairs)
            CHECK(once.at(p.left.x, p.left.y) == once.at(p.right.x, p.right.y));
    }

    SECTION("fill is idempotent and defines every texel") {
        UvMap filled = fill_empty(once, seam);
        UvMap filled2 = fill_empty(filled, seam);
        CHECK(maps_equal(filled, filled2));
        for (const Vec3& v : filled.data) CHECK(is_finite(v));
        // Validity flags never change during filling.
        CHECK(filled.valid == once.valid);
    }
}

TEST_CASE("fill: no invalid texels means no change") {
    SeamTable seam = make_seam_table({{{1, 1}, {30, 30}}}, 32, 32);
    UvMap map(32, 32);
    for (auto& v : map.valid) v = 1;
    for (auto& v : map.data) v = {1, 1, 1};
    CHECK(maps_equal(fill_empty(map, seam), map));
}

TEST_CASE("fill: single site floods everything; two sites partition by distance") {
    SeamTable one = make_seam_table({{{4, 4}, {28, 28}}}, 32, 32);
    UvMap map(32, 32);
    map.at(4, 4) = {9, 0, 0};
    map.valid[map.index(4, 4)] = 1;
    map.at(28, 28) = {-9, 0, 0};
    map.valid[map.index(28, 28)] = 1;
    UvMap filled = fill_empty(map, one);
    // Brute-force nearest-site oracle with lowest-index ties.
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            if (map.valid[map.index(x, y)]) continue;
            double dl = std::hypot(x - 4.0, y - 4.0);
            double dr = std::hypot(x - 28.0, y - 28.0);
            Vec3 expected = dl <= dr ? Vec3{9, 0, 0} : Vec3{-9, 0, 0};
            CHECK(filled.at(x, y) == expected);
        }
}

TEST_CASE("seam table: built from the fixture template is a bijection") {
    TemplateMesh mesh = subdivide(fixtures::make_template(2), 1);
    SeamTable seam = build_seam_table(mesh, 256, 256);
    REQUIRE(seam.pairs.size() > 20);
    std::set<std::pair<int, int>> lefts, rights;
    for (const SeamPair& p : seam.pairs) {
        CHECK(seam.in_left_half(p.left.x));
        CHECK_FALSE(seam.in_left_half(p.right.x));
        CHECK(lefts.insert({p.left.x, p.left.y}).second);
        CHECK(rights.insert({p.right.x, p.right.y}).second);
    }
}

TEST_CASE("process_seam rejects an empty seam table") {
    SeamTable empty;
    empty.width = empty.height = 16;
    UvMap map(16, 16);
    CHECK_THROWS(process_seam(map, empty, 10));
}

TEST_CASE("encode: range endpoints and the midpoint rounding rule") {
    CHECK(encode_u16_value(-20.0) == 0);
    CHECK(encode_u16_value(20.0) == 65535);
    CHECK(encode_u16_value(0.0) == 32768);  // round half away from zero of 32767.5
    CHECK(encode_u16_value(-25.0) == 0);    // clipped
    CHECK(encode_u16_value(25.0) == 65535);
}

TEST_CASE("encode/decode: exhaustive roundtrip over all 65536 codes") {
    for (std::uint32_t code = 0; code <= 65535; ++code) {
        double x = decode_u16_value(static_cast<std::uint16_t>(code));
        CHECK(encode_u16_value(x) == code);
    }
}

TEST_CASE("encode/decode: random map roundtrip within half a step") {
    Rng rng(99);
    UvMap map(32, 32);
    for (auto& v : map.data)
        v = {rng.uniform(-20.0, 20.0), rng.uniform(-20.0, 20.0), rng.uniform(-20.0, 20.0)};
    for (auto& f : map.valid) f = 1;
    std::vector<std::uint16_t> codes;
    CHECK(encode_u16(map, codes) == 0);
    UvMap back;
    decode_u16(codes, 32, 32, back);
    double worst = 0.0;
    for (std::size_t i = 0; i < map.data.size(); ++i)
        worst = std::max(worst, norm(map.data[i] - back.data[i]) == 0.0
                                    ? 0.0
                                    : std::max({std::abs(map.data[i].x - back.data[i].x),
                                                std::abs(map.data[i].y - back.data[i].y),
                                                std::abs(map.data[i].z - back.data[i].z)}));
    CHECK(worst <= 3.06e-4);
}

TEST_CASE("PNG: 16-bit file roundtrips codes exactly") {
    fs::path dir = fs::temp_directory_path() / "headcraft_uv_tests";
    fs::create_directories(dir);
    Rng rng(123);
    UvMap map(16, 16);
    for (auto& v : map.data)
        v = {rng.uniform(-19.0, 19.0), rng.uniform(-19.0, 19.0), rng.uniform(-19.0, 19.0)};
    std::vector<std::uint16_t> codes;
    encode_u16(map, codes);
    std::string path = (dir / "map.png").string();
    write_png16(path, codes, 16, 16);
    PngImage img = read_png(path);
    REQUIRE(img.width == 16);
    REQUIRE(img.channels == 3);
    CHECK(img.data == codes);
}

TEST_CASE("raw HCUV: lossless within float32, keeps validity") {
    fs::path dir = fs::temp_directory_path() / "headcraft_uv_tests";
    fs::create_directories(dir);
    Rng rng(31);
    UvMap map(8, 8);
    for (std::size_t i = 0; i < map.data.size(); ++i) {
        map.data[i] = {rng.normal(), rng.normal(), rng.normal()};
        map.valid[i] = rng.uniform() < 0.5 ? 1 : 0;
    }
    std::string path = (dir / "map.hcuv").string();
    save_uv_raw(path, map);
    UvMap back = load_uv_raw(path);
    CHECK(back.valid == map.valid);
    for (std::size_t i = 0; i < map.data.size(); ++i)
        CHECK(dist(back.data[i], map.data[i]) < 1e-6);
}

TEST_CASE("face mask: circle membership") {
    auto mask = make_face_mask(64, 64, 0.75, 0.5, 0.1);
    auto at = [&](double u, double v) {
        int x = static_cast<int>(std::lround(u * 63));
        int y = static_cast<int>(std::lround(v * 63));
        return mask[static_cast<std::size_t>(y) * 64 + x];
    };
    CHECK(at(0.75, 0.5) == 1);
    CHECK(at(0.75, 0.55) == 1);
    CHECK(at(0.25, 0.5) == 0);
    CHECK(at(0.95, 0.5) == 0);
}
