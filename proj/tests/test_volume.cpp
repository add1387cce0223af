#include <catch_amalgamated.hpp>

#include <fstream>

#include "helpers.hpp"
#include "toothseg/volume_io.hpp"
#include "toothseg/volume_ops.hpp"

using namespace toothseg;

TEST_CASE("load_volume reads a constant u16 volume", "[volume]") {
    auto dir = testutil::scratch_dir("vol_load");
    Volume3 v({2, 2, 2}, {0.5, 0.5, 0.5}, 100.0f);
    save_volume(v, dir / "c.raw");
    Volume3 r = load_volume(dir / "c.raw");
    REQUIRE(r.dims == std::array<int, 3>{2, 2, 2});
    REQUIRE(r.spacing[0] == Catch::Approx(0.5));
    for (float x : r.data) REQUIRE(x == 100.0f);
}

TEST_CASE("load_volume size checks", "[volume]") {
    auto dir = testutil::scratch_dir("vol_size");
    // 4x4x4 u16 = 128 bytes: accepted
    {
        std::ofstream raw(dir / "ok.raw", std::ios::binary);
        std::vector<char> bytes(128, 0);
        raw.write(bytes.data(), bytes.size());
    }
    write_json_file(dir / "ok.json",
                    {{"dims", {4, 4, 4}}, {"spacing_mm", {1, 1, 1}}, {"dtype", "u16"}});
    REQUIRE_NOTHROW(load_volume(dir / "ok.raw"));

    // 100 bytes: size mismatch
    {
        std::ofstream raw(dir / "bad.raw", std::ios::binary);
        std::vector<char> bytes(100, 0);
        raw.write(bytes.data(), bytes.size());
    }
    write_json_file(dir / "bad.json",
                    {{"dims", {4, 4, 4}}, {"spacing_mm", {1, 1, 1}}, {"dtype", "u16"}});
    try {
        load_volume(dir / "bad.raw");
        FAIL("expected size-mismatch error");
    } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::format_error);
    }
}

TEST_CASE("load_volume rejects missing sidecar and bad spacing", "[volume]") {
    auto dir = testutil::scratch_dir("vol_sidecar");
    {
        std::ofstream raw(dir / "x.raw", std::ios::binary);
        raw << "xx";
    }
    try {
        load_volume(dir / "x.raw");
        FAIL("expected missing-sidecar error");
    } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::io_error);
    }
    write_json_file(dir / "x.json",
                    {{"dims", {1, 1, 1}}, {"spacing_mm", {0.0, 1, 1}}, {"dtype", "u16"}});
    try {
        load_volume(dir / "x.raw");
        FAIL("expected nonpositive-spacing error");
    } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::format_error);
    }
}

TEST_CASE("volume round-trip is bit-exact for u16 data", "[volume]") {
    auto dir = testutil::scratch_dir("vol_rt");
    std::mt19937_64 rng(7);
    Volume3 v = testutil::random_u16_volume({9, 7, 5}, rng);
    save_volume(v, dir / "a.raw");
    Volume3 r = load_volume(dir / "a.raw");
    save_volume(r, dir / "b.raw");
    auto bytes_a = detail::read_file_bytes(dir / "a.raw");
    auto bytes_b = detail::read_file_bytes(dir / "b.raw");
    REQUIRE(bytes_a == bytes_b);
    REQUIRE(r.data == v.data);
}

TEST_CASE("save_volume to an unwritable location fails", "[volume]") {
    try {
        save_volume(Volume3({1, 1, 1}, {1, 1, 1}, 1.0f), "/proc/no_such_dir/x.raw");
        FAIL("expected io error");
    } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::io_error);
    }
}

TEST_CASE("masked elementwise product", "[volume]") {
    Volume3 v({4, 4, 2}, {1, 1, 1}, 7.0f);
    BinaryVolume3 ones(v.dims, 1), zeros(v.dims, 0), checker(v.dims, 0);
    for (int z = 0; z < 2; ++z)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) checker.at(x, y, z) = (x + y + z) % 2;

    REQUIRE(masked(v, ones).data == v.data);
    for (float x : masked(v, zeros).data) REQUIRE(x == 0.0f);
    Volume3 m = masked(v, checker);
    for (int z = 0; z < 2; ++z)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x)
                REQUIRE(m(x, y, z) == (checker(x, y, z) ? 7.0f : 0.0f));

    // idempotence under the same mask
    REQUIRE(masked(m, checker).data == m.data);

    BinaryVolume3 wrong({3, 3, 3});
    REQUIRE_THROWS_AS(masked(v, wrong), Error);
}

TEST_CASE("resample_trilinear preserves constants and ramps", "[volume]") {
    Volume3 c({5, 6, 7}, {1, 1, 1}, 5.0f);
    Volume3 rc = resample_trilinear(c, {128, 128, 128});
    for (float x : rc.data) REQUIRE(x == Catch::Approx(5.0).margin(1e-9));

    // linear ramp along x is reproduced exactly (within float storage)
    Volume3 ramp({32, 4, 4}, {1, 1, 1});
    for (int z = 0; z < 4; ++z)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 32; ++x) ramp.at(x, y, z) = static_cast<float>(x * 8);
    Volume3 rr = resample_trilinear(ramp, {64, 4, 4});
    double range = 31 * 8;
    for (int x = 0; x < 64; ++x) {
        double expect = x * (31.0 * 8.0) / 63.0;
        REQUIRE(std::abs(rr(x, 2, 2) - expect) < 1e-6 * range);
    }
}

TEST_CASE("resample_trilinear reproduces trilinear fields", "[volume]") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> coef(-3.0, 3.0);
    for (int trial = 0; trial < 10; ++trial) {
        double a0 = coef(rng), ax = coef(rng), ay = coef(rng), az = coef(rng);
        double axy = coef(rng), axz = coef(rng), ayz = coef(rng), axyz = coef(rng);
        auto field = [&](double x, double y, double z) {
            return a0 + ax * x + ay * y + az * z + axy * x * y + axz * x * z + ayz * y * z +
                   axyz * x * y * z;
        };
        std::array<int, 3> in{9, 8, 7}, out{17, 13, 11};
        Volume3 v(in, {1, 1, 1});
        double vmax = 1e-12;
        for (int z = 0; z < in[2]; ++z)
            for (int y = 0; y < in[1]; ++y)
                for (int x = 0; x < in[0]; ++x) {
                    double f = field(x, y, z);
                    v.at(x, y, z) = static_cast<float>(f);
                    vmax = std::max(vmax, std::abs(f));
                }
        Volume3 r = resample_trilinear(v, out);
        for (int z = 0; z < out[2]; ++z)
            for (int y = 0; y < out[1]; ++y)
                for (int x = 0; x < out[0]; ++x) {
                    double sx = x * double(in[0] - 1) / (out[0] - 1);
                    double sy = y * double(in[1] - 1) / (out[1] - 1);
                    double sz = z * double(in[2] - 1) / (out[2] - 1);
                    // trilinear interpolation of samples of a trilinear
                    // field reproduces the field in every lattice cell
                    REQUIRE(std::abs(r(x, y, z) - field(sx, sy, sz)) < 1e-6 * vmax);
                }
    }
}

TEST_CASE("pgm 16-bit round trip", "[volume]") {
    auto dir = testutil::scratch_dir("pgm");
    Image2 img({5, 3});
    for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<double>(i * 11);
    save_pgm16(img, dir / "x.pgm", /*rescale=*/false);
    Image2 r = load_pgm16(dir / "x.pgm");
    REQUIRE(r.dims == img.dims);
    for (size_t i = 0; i < img.data.size(); ++i) REQUIRE(r.data[i] == img.data[i]);
}
