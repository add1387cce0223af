#include <catch_amalgamated.hpp>

#include <numbers>

#include "helpers.hpp"
#include "toothseg/panorama.hpp"
#include "toothseg/phantom.hpp"

using namespace toothseg;

namespace {

// straight curve along x at fixed y, normals along +y
PanoramaGeometry straight_geometry(int n_s, double y, std::array<int, 3> dims,
                                   std::array<double, 3> spacing, double alpha, double step,
                                   std::array<int, 2> z_range) {
    PanoramaGeometry g;
    for (int s = 0; s < n_s; ++s) {
        g.curve.points.push_back({10.0 + s, y});
        g.curve.normals.push_back({0.0, 1.0});
    }
    g.curve.arc_spacing_mm = spacing[0];
    g.curve.n_interp = n_s;
    g.curve.n_extrap = 0;
    g.alpha_mm = alpha;
    g.ray_step_mm = step;
    g.z_range = z_range;
    g.volume_dims = dims;
    g.spacing = spacing;
    return g;
}

}  // namespace

TEST_CASE("mip_z basics and oracle", "[panorama]") {
    Volume3 c({6, 5, 4}, {1, 1, 1}, 3.5f);
    Image2 m = mip_z(c);
    REQUIRE(m.dims == std::array<int, 2>{6, 5});
    for (double v : m.data) REQUIRE(v == 3.5);

    Volume3 z({8, 8, 12}, {1, 1, 1}, 0.0f);
    z.at(3, 5, 9) = 100.0f;
    Image2 mz = mip_z(z);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) REQUIRE(mz(x, y) == ((x == 3 && y == 5) ? 100.0 : 0.0));

    std::mt19937_64 rng(5);
    Volume3 r = testutil::random_u16_volume({7, 9, 11}, rng);
    Image2 mr = mip_z(r);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 7; ++x) {
            double best = 0.0;
            for (int zz = 0; zz < 11; ++zz) best = std::max(best, double(r(x, y, zz)));
            REQUIRE(mr(x, y) == best);
        }
}

TEST_CASE("panorama of a constant volume equals 2*alpha*c", "[panorama]") {
    const double c = 100.0, alpha = 5.0;
    Volume3 v({120, 60, 8}, {1, 1, 1}, static_cast<float>(c));
    auto g = straight_geometry(100, 30.0, v.dims, v.spacing, alpha, 0.25, {0, 8});
    Image2 p = render_panorama(v, g);
    REQUIRE(p.dims == std::array<int, 2>{100, 8});
    for (double x : p.data)
        REQUIRE(std::abs(x - 2 * alpha * c) <= 1e-9 * 2 * alpha * c);
}

TEST_CASE("panorama of a bright ball matches the chord integral", "[panorama]") {
    const double rho_mm = 6.0, c = 50.0;
    Volume3 v({120, 80, 20}, {0.5, 0.5, 0.5}, 0.0f);
    // ball centered exactly on the curve at s0=60, z0=10
    const Vec2 center{70.0, 40.0};
    const int z0 = 10;
    for (int z = 0; z < 20; ++z)
        for (int y = 0; y < 80; ++y)
            for (int x = 0; x < 120; ++x) {
                double dx = (x - center.x) * 0.5, dy = (y - center.y) * 0.5,
                       dz = (z - z0) * 0.5;
                if (dx * dx + dy * dy + dz * dz <= rho_mm * rho_mm)
                    v.at(x, y, z) = static_cast<float>(c);
            }
    auto g = straight_geometry(100, 40.0, v.dims, v.spacing, 10.0, 0.05, {0, 20});
    Image2 p = render_panorama(v, g);
    // the column through the center integrates a full diameter
    double expect = 2.0 * rho_mm * c;
    REQUIRE(p(60, 10) == Catch::Approx(expect).epsilon(0.02));
    // and it is the maximal response
    double maxv = 0.0;
    int arg_s = -1, arg_z = -1;
    for (int z = 0; z < 20; ++z)
        for (int s = 0; s < 100; ++s)
            if (p(s, z) > maxv) {
                maxv = p(s, z);
                arg_s = s;
                arg_z = z;
            }
    REQUIRE(arg_s == 60);
    REQUIRE(arg_z == 10);
}

TEST_CASE("panorama is linear in the volume", "[panorama]") {
    std::mt19937_64 rng(17);
    Volume3 v1 = testutil::random_u16_volume({40, 30, 6}, rng);
    Volume3 v2 = testutil::random_u16_volume({40, 30, 6}, rng);
    Volume3 mix(v1.dims, v1.spacing);
    const double a = 0.25, b = 2.0;  // exact in float for u16 inputs
    for (size_t i = 0; i < mix.size(); ++i)
        mix.data[i] = static_cast<float>(a * v1.data[i] + b * v2.data[i]);
    auto g = straight_geometry(20, 15.0, v1.dims, v1.spacing, 4.0, 0.5, {0, 6});
    Image2 p1 = render_panorama(v1, g);
    Image2 p2 = render_panorama(v2, g);
    Image2 pm = render_panorama(mix, g);
    for (size_t i = 0; i < pm.data.size(); ++i)
        REQUIRE(pm.data[i] ==
                Catch::Approx(a * p1.data[i] + b * p2.data[i]).margin(1e-3).epsilon(1e-9));
}

TEST_CASE("doubling alpha leaves a slab-limited volume unchanged", "[panorama]") {
    Volume3 v({80, 60, 6}, {1, 1, 1}, 0.0f);
    // nonzero only within |y-30| <= 5 (inside the alpha=10 slab)
    for (int z = 0; z < 6; ++z)
        for (int y = 25; y <= 35; ++y)
            for (int x = 0; x < 80; ++x) v.at(x, y, z) = 70.0f;
    auto g1 = straight_geometry(60, 30.0, v.dims, v.spacing, 10.0, 0.5, {0, 6});
    auto g2 = g1;
    g2.alpha_mm = 20.0;  // alpha/step stays integral: sample positions nest
    Image2 p1 = render_panorama(v, g1);
    Image2 p2 = render_panorama(v, g2);
    for (size_t i = 0; i < p1.data.size(); ++i)
        REQUIRE(std::abs(p1.data[i] - p2.data[i]) <= 1e-9 * std::max(1.0, p1.data[i]));
}

TEST_CASE("curve outside the volume is a geometry error", "[panorama]") {
    Volume3 v({20, 20, 4}, {1, 1, 1}, 1.0f);
    auto g = straight_geometry(10, 500.0, v.dims, v.spacing, 2.0, 0.5, {0, 4});
    for (auto& p : g.curve.points) p.x += 500.0;
    REQUIRE_THROWS_AS(render_panorama(v, g), Error);
}

TEST_CASE("build_panoramas runs the full chain on the phantom", "[panorama]") {
    PhantomSpec spec = default_phantom_spec();
    auto [volume, truth] = generate_phantom(spec);
    PanoramaParams params;
    PanoramaBundle bundle = build_panoramas(volume, params);

    REQUIRE(bundle.upper.panorama.dims == std::array<int, 2>{640, 320});
    REQUIRE(bundle.lower.panorama.dims == std::array<int, 2>{640, 320});
    REQUIRE(bundle.upper.geometry.jaw == Jaw::upper);

    // bone thresholds separate soft tissue from bone and teeth
    REQUIRE(bundle.bone_t1 > spec.soft_intensity);
    REQUIRE(bundle.bone_t1 <= spec.jaw_intensity);

    // each tooth is visible in exactly one of the two panoramas
    auto fp_u = project_tooth_footprints(truth, bundle.upper.geometry);
    auto fp_l = project_tooth_footprints(truth, bundle.lower.geometry);
    REQUIRE(fp_u.size() == 16);
    REQUIRE(fp_l.size() == 16);
    for (const auto& [fdi, fp] : fp_u) REQUIRE(fp.pixels > 0);
    for (const auto& [fdi, fp] : fp_l) REQUIRE(fp.pixels > 0);

    // tooth columns respond >3x the background median
    const Image2& pano = bundle.upper.panorama;
    std::vector<double> values(pano.data.begin(), pano.data.end());
    std::nth_element(values.begin(), values.begin() + values.size() / 2, values.end());
    double median = values[values.size() / 2];
    for (const auto& [fdi, fp] : fp_u) {
        int s = static_cast<int>(std::lround(fp.box.s));
        int z = static_cast<int>(std::lround(fp.box.z));
        REQUIRE(pano(s, z) > 3.0 * std::max(median, 1.0));
    }
}

TEST_CASE("build_panoramas attributes stage failures", "[panorama]") {
    // one fused blob: bone present but only a single component
    Volume3 v({40, 40, 100}, {1, 1, 1}, 100.0f);
    for (int z = 85; z < 95; ++z)
        for (int y = 10; y < 30; ++y)
            for (int x = 10; x < 30; ++x) v.at(x, y, z) = 1000.0f;
    PanoramaParams params;
    params.z_crop_bottom = 10;
    try {
        build_panoramas(v, params);
        FAIL("expected jaws-not-separated");
    } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::jaws_not_separated);
        REQUIRE(e.stage() == "split_jaws");
    }
}
