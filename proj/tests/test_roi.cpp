#include <catch_amalgamated.hpp>

#include "helpers.hpp"
#include "toothseg/phantom.hpp"
#include "toothseg/roi.hpp"

using namespace toothseg;

namespace {

PanoramaGeometry straight_geometry(int n_s, double y, std::array<int, 3> dims,
                                   std::array<double, 3> spacing, double alpha, int z_lo,
                                   int height) {
    PanoramaGeometry g;
    for (int s = 0; s < n_s; ++s) {
        g.curve.points.push_back({5.0 + s, y});
        g.curve.normals.push_back({0.0, 1.0});
    }
    g.curve.arc_spacing_mm = spacing[0];
    g.curve.n_interp = n_s;
    g.alpha_mm = alpha;
    g.ray_step_mm = spacing[0] / 2;
    g.z_range = {z_lo, z_lo + height};
    g.volume_dims = dims;
    g.spacing = spacing;
    return g;
}

struct PhantomFixture {
    PhantomSpec spec = default_phantom_spec();
    Volume3 volume;
    PhantomTruth truth;
    PanoramaGeometry geometry;  // analytic upper geometry
    std::map<int, ToothFootprint> footprints;
    PhantomFixture() {
        std::tie(volume, truth) = generate_phantom(spec);
        geometry = analytic_geometry(truth, Jaw::upper);
        footprints = project_tooth_footprints(truth, geometry);
    }
};

PhantomFixture& phantom_fixture() {
    static PhantomFixture f;
    return f;
}

}  // namespace

TEST_CASE("single pixel back-projects to a normal-aligned segment", "[roi]") {
    const double dy = 0.5;
    auto g = straight_geometry(40, 24.0, {60, 50, 10}, {0.5, dy, 0.5}, 4.0, 2, 8);
    const int s0 = 11, z0 = 3;
    BinaryVolume3 d = backproject_domain({{s0, z0}}, g);
    // expected: a y-aligned run of voxels at x = 5 + s0, slice z0 + 2
    const int expected_len = static_cast<int>(2 * 4.0 / dy) + 1;
    size_t count = d.count();
    REQUIRE(std::abs(static_cast<int>(count) - expected_len) <= 1);
    for (int z = 0; z < 10; ++z)
        for (int y = 0; y < 50; ++y)
            for (int x = 0; x < 60; ++x)
                if (d(x, y, z)) {
                    REQUIRE(x == 5 + s0);
                    REQUIRE(z == z0 + 2);
                }
    // the ray is contiguous in y
    int ymin = 50, ymax = -1;
    for (int y = 0; y < 50; ++y)
        if (d(5 + s0, y, z0 + 2)) {
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    REQUIRE(static_cast<size_t>(ymax - ymin + 1) == count);
}

TEST_CASE("backproject is monotone in alpha", "[roi]") {
    auto g1 = straight_geometry(40, 24.0, {60, 50, 10}, {0.5, 0.5, 0.5}, 3.0, 2, 8);
    auto g2 = g1;
    g2.alpha_mm = 6.0;
    std::vector<PixelCoord> pixels{{10, 1}, {11, 1}, {12, 2}};
    BinaryVolume3 d1 = backproject_domain(pixels, g1);
    BinaryVolume3 d2 = backproject_domain(pixels, g2);
    REQUIRE(d2.count() > d1.count());
    for (size_t i = 0; i < d1.size(); ++i)
        if (d1.data[i]) REQUIRE(d2.data[i] == 1);  // strict superset
}

TEST_CASE("backproject rejects empty input and bad pixels", "[roi]") {
    auto g = straight_geometry(40, 24.0, {60, 50, 10}, {0.5, 0.5, 0.5}, 3.0, 2, 8);
    REQUIRE_THROWS_AS(backproject_domain({}, g), Error);
    REQUIRE_THROWS_AS(backproject_domain({{100, 1}}, g), Error);
}

TEST_CASE("seg domain is contained in box domain", "[roi]") {
    std::mt19937_64 rng(9);
    auto g = straight_geometry(60, 25.0, {80, 50, 12}, {0.5, 0.5, 0.5}, 5.0, 0, 12);
    for (int trial = 0; trial < 10; ++trial) {
        std::uniform_int_distribution<int> su(5, 50), sv(2, 9), w(2, 8), h(1, 3);
        int u0 = su(rng), v0 = sv(rng), du = w(rng), dv = h(rng);
        std::vector<PixelCoord> box;
        for (int v = v0; v < std::min(12, v0 + dv); ++v)
            for (int u = u0; u < std::min(60, u0 + du); ++u) box.push_back({u, v});
        std::vector<PixelCoord> seg;
        for (auto p : box)
            if (rng() % 2) seg.push_back(p);
        if (seg.empty()) seg.push_back(box.front());
        BinaryVolume3 d_box = backproject_domain(box, g);
        BinaryVolume3 d_seg = backproject_domain(seg, g);
        for (size_t i = 0; i < d_box.size(); ++i)
            if (d_seg.data[i]) REQUIRE(d_box.data[i] == 1);
    }
}

TEST_CASE("extract_roi_pair shares one bounding box", "[roi]") {
    Volume3 v({80, 50, 12}, {0.5, 0.5, 0.5}, 100.0f);
    auto g = straight_geometry(60, 25.0, v.dims, v.spacing, 5.0, 0, 12);
    std::vector<PixelCoord> box;
    for (int z = 2; z < 8; ++z)
        for (int s = 10; s < 30; ++s) box.push_back({s, z});
    std::vector<PixelCoord> seg(box.begin() + 40, box.begin() + 80);
    ToothID id;
    id.quadrant = 1;
    id.number = 1;
    RoiPair roi = extract_roi_pair(v, box, seg, g, id, 2);
    REQUIRE(roi.loose.dims == roi.tight.dims);
    // B_seg == B_box makes loose == tight
    RoiPair same = extract_roi_pair(v, box, box, g, id, 2);
    REQUIRE(same.loose.data == same.tight.data);
    // all nonzero voxels lie inside the bounding box by construction
    auto ext = roi.bbox3.extents();
    REQUIRE(roi.loose.dims == std::array<int, 3>{ext[0], ext[1], ext[2]});
    // tight nonzero implies loose nonzero
    for (size_t i = 0; i < roi.tight.size(); ++i)
        if (roi.tight.data[i] != 0.0f) REQUIRE(roi.loose.data[i] != 0.0f);
}

TEST_CASE("phantom tooth: box domain covers the tooth, tight excludes neighbors", "[roi]") {
    auto& f = phantom_fixture();
    // per-tooth voxel counts for adjacency checks
    std::map<int, size_t> tooth_voxels;
    for (const auto& t : f.truth.teeth) tooth_voxels[t.fdi] = t.voxels;

    for (int fdi : {11, 13, 16, 26}) {
        const ToothFootprint& fp = f.footprints.at(fdi);
        REQUIRE(fp.pixels > 0);
        auto b_box = box_pixels(fp.box, f.geometry.width(), f.geometry.height());
        auto b_seg = mask_pixels(fp.mask);
        ToothID id;
        id.jaw = Jaw::upper;
        id.quadrant = fdi / 10;
        id.number = fdi % 10;
        id.class_id = class_of_fdi(fdi);
        RoiPair roi = extract_roi_pair(f.volume, b_box, b_seg, f.geometry, id, 2);

        // D_box covers >= 99.5% of the tooth's ground-truth voxels
        BinaryVolume3 d_box = backproject_domain(b_box, f.geometry);
        size_t covered = 0, total = 0;
        for (int z = 0; z < f.truth.dims[2]; ++z)
            for (int y = 0; y < f.truth.dims[1]; ++y)
                for (int x = 0; x < f.truth.dims[0]; ++x)
                    if (f.truth.label_at(x, y, z) == fdi) {
                        ++total;
                        covered += d_box(x, y, z);
                    }
        REQUIRE(total == tooth_voxels[fdi]);
        REQUIRE(static_cast<double>(covered) / total >= 0.995);

        // tight ROI contains < 0.5% of any adjacent tooth's voxels
        std::map<int, size_t> inside;
        for (int z = roi.bbox3.lo[2]; z < roi.bbox3.hi[2]; ++z)
            for (int y = roi.bbox3.lo[1]; y < roi.bbox3.hi[1]; ++y)
                for (int x = roi.bbox3.lo[0]; x < roi.bbox3.hi[0]; ++x) {
                    uint16_t label = f.truth.label_at(x, y, z);
                    if (!label || label == fdi) continue;
                    size_t idx = roi.tight.index(x - roi.bbox3.lo[0], y - roi.bbox3.lo[1],
                                                 z - roi.bbox3.lo[2]);
                    if (roi.tight.data[idx] != 0.0f) ++inside[label];
                }
        for (const auto& [other, count] : inside)
            REQUIRE(static_cast<double>(count) / tooth_voxels[other] < 0.005);
    }
}

TEST_CASE("round-trip locality: re-projected box domain contains the box", "[roi]") {
    auto& f = phantom_fixture();
    const int fdi = 21;
    const ToothFootprint& fp = f.footprints.at(fdi);
    auto b_box = box_pixels(fp.box, f.geometry.width(), f.geometry.height());
    BinaryVolume3 d_box = backproject_domain(b_box, f.geometry);

    // project D_box back into panorama space with the same ray walk
    PhantomTruth domain_truth;
    domain_truth.dims = f.truth.dims;
    domain_truth.spacing = f.truth.spacing;
    domain_truth.labels.assign(d_box.data.size(), 0);
    for (size_t i = 0; i < d_box.data.size(); ++i)
        if (d_box.data[i]) domain_truth.labels[i] = fdi;
    ToothTruth tt;
    tt.fdi = fdi;
    tt.voxels = d_box.count();
    domain_truth.teeth.push_back(tt);
    auto reproj = project_tooth_footprints(domain_truth, f.geometry);
    const BinaryImage2& refoot = reproj.at(fdi).mask;
    // every box pixel lies in the re-projected footprint dilated by <= 2 px
    for (auto p : b_box) {
        bool hit = false;
        for (int dv = -2; dv <= 2 && !hit; ++dv)
            for (int du = -2; du <= 2 && !hit; ++du) {
                int u = p.u + du, v = p.v + dv;
                if (refoot.in_bounds(u, v) && refoot(u, v)) hit = true;
            }
        REQUIRE(hit);
    }
}

TEST_CASE("make_roi_input resamples both channels consistently", "[roi]") {
    Volume3 v({40, 40, 20}, {0.5, 0.5, 0.5}, 200.0f);
    auto g = straight_geometry(30, 20.0, v.dims, v.spacing, 4.0, 0, 20);
    std::vector<PixelCoord> box;
    for (int z = 4; z < 16; ++z)
        for (int s = 5; s < 25; ++s) box.push_back({s, z});
    ToothID id;
    RoiPair roi = extract_roi_pair(v, box, box, g, id, 2);
    RoiInput input = make_roi_input(roi, 64);
    REQUIRE(input.dims() == std::array<int, 3>{64, 64, 64});
    REQUIRE(input.loose.data == input.tight.data);  // identical domains

    // per-channel mass is conserved through resampling within 2%
    double mass_in = 0, mass_out = 0;
    for (float x : roi.loose.data) mass_in += x;
    for (float x : input.loose.data) mass_out += x;
    mass_in *= roi.loose.voxel_volume_mm3();
    mass_out *= input.loose.voxel_volume_mm3();
    REQUIRE(mass_out == Catch::Approx(mass_in).epsilon(0.02));
}

TEST_CASE("phantom tooth mass is conserved through 128-cube resampling", "[roi]") {
    auto& f = phantom_fixture();
    const ToothFootprint& fp = f.footprints.at(16);
    auto b_box = box_pixels(fp.box, f.geometry.width(), f.geometry.height());
    ToothID id;
    id.number = 6;
    RoiPair roi = extract_roi_pair(f.volume, b_box, b_box, f.geometry, id, 2);
    RoiInput input = make_roi_input(roi, 128);
    double mass_in = 0, mass_out = 0;
    for (float x : roi.loose.data) mass_in += x;
    for (float x : input.loose.data) mass_out += x;
    mass_in *= roi.loose.voxel_volume_mm3();
    mass_out *= input.loose.voxel_volume_mm3();
    REQUIRE(mass_out == Catch::Approx(mass_in).epsilon(0.02));
}

TEST_CASE("roi input file round trip", "[roi]") {
    auto dir = testutil::scratch_dir("roi_io");
    Volume3 v({20, 20, 10}, {0.5, 0.5, 0.5}, 123.0f);
    auto g = straight_geometry(15, 10.0, v.dims, v.spacing, 2.0, 0, 10);
    std::vector<PixelCoord> box;
    for (int z = 2; z < 8; ++z)
        for (int s = 2; s < 12; ++s) box.push_back({s, z});
    RoiPair roi = extract_roi_pair(v, box, box, g, {}, 1);
    RoiInput input = make_roi_input(roi, 32);
    save_roi_input(input, dir / "in.raw");
    RoiInput back = load_roi_input(dir / "in.raw");
    REQUIRE(back.dims() == input.dims());
    for (size_t i = 0; i < back.loose.size(); ++i) {
        REQUIRE(back.loose.data[i] == std::llround(input.loose.data[i]));
        REQUIRE(back.tight.data[i] == std::llround(input.tight.data[i]));
    }
}
