#include <catch_amalgamated.hpp>

#include <numbers>

#include "helpers.hpp"
#include "toothseg/curve.hpp"

using namespace toothseg;

TEST_CASE("straight skeleton fits a straight curve", "[curve]") {
    std::vector<Vec2> pts;
    for (int i = 0; i < 10; ++i) pts.push_back({10.0 + 3.0 * i, 20.0 + 1.5 * i});
    ReferenceCurve c = fit_reference_curve(pts, 50, 10);
    REQUIRE(c.size() == 70);
    Vec2 dir{3.0, 1.5};
    double dn = norm(dir);
    dir = (1.0 / dn) * dir;
    // all points on the line through the inputs
    for (const auto& p : c.points) {
        double cross = (p.x - 10.0) * dir.y - (p.y - 20.0) * dir.x;
        REQUIRE(std::abs(cross) < 1e-6);
    }
    // all normals identical and perpendicular
    for (const auto& n : c.normals) {
        REQUIRE(std::abs(dot(n, dir)) < 1e-9);
        REQUIRE(norm(n) == Catch::Approx(1.0).margin(1e-9));
        REQUIRE(std::abs(n.x - c.normals.front().x) < 1e-9);
        REQUIRE(std::abs(n.y - c.normals.front().y) < 1e-9);
    }
}

TEST_CASE("semicircle fit: radial error < 0.5 px, normals within 1 degree", "[curve]") {
    const double radius = 100.0;
    const Vec2 center{150.0, 120.0};
    std::vector<Vec2> pts;
    const int n_pts = 300;
    for (int i = 0; i < n_pts; ++i) {
        double theta = std::numbers::pi * i / (n_pts - 1);
        pts.push_back({center.x + radius * std::cos(theta), center.y + radius * std::sin(theta)});
    }
    ReferenceCurve c = fit_reference_curve(pts, 500, 0);
    REQUIRE(c.size() == 500);
    double max_radial = 0.0, max_angle_deg = 0.0;
    for (int k = 0; k < c.size(); ++k) {
        Vec2 d = c.points[k] - center;
        max_radial = std::max(max_radial, std::abs(norm(d) - radius));
        Vec2 radial = (1.0 / norm(d)) * d;
        double cosang = std::clamp(std::abs(dot(c.normals[k], radial)), -1.0, 1.0);
        max_angle_deg = std::max(max_angle_deg, std::acos(cosang) * 180.0 / std::numbers::pi);
    }
    CAPTURE(max_radial, max_angle_deg);
    REQUIRE(max_radial < 0.5);
    REQUIRE(max_angle_deg < 1.0);
}

TEST_CASE("extrapolation length matches 70 points at 0.19 mm", "[curve]") {
    const double radius = 100.0;
    std::vector<Vec2> pts;
    const int n_pts = 300;
    for (int i = 0; i < n_pts; ++i) {
        double theta = std::numbers::pi * i / (n_pts - 1);
        pts.push_back({150.0 + radius * std::cos(theta), 120.0 + radius * std::sin(theta)});
    }
    // choose the pixel size so the resampled arc spacing is 0.19 mm
    double arc_len_px = std::numbers::pi * radius;
    CurveFitOptions opt;
    opt.pixel_size_mm = 0.19 * 499.0 / arc_len_px;
    ReferenceCurve c = fit_reference_curve(pts, 500, 70, opt);
    REQUIRE(c.size() == 640);
    REQUIRE(c.arc_spacing_mm == Catch::Approx(0.19).epsilon(0.02));
    double side_mm = 0.0;
    for (int k = 0; k < 70; ++k)
        side_mm += norm(c.points[k + 1] - c.points[k]) * opt.pixel_size_mm;
    REQUIRE(side_mm == Catch::Approx(13.3).epsilon(0.05));
}

TEST_CASE("curve fit rejects tiny inputs", "[curve]") {
    std::vector<Vec2> three{{0, 0}, {1, 0}, {2, 0}};
    REQUIRE_THROWS_AS(fit_reference_curve(three, 100, 10), Error);
}

TEST_CASE("normals vary continuously along the curve", "[curve]") {
    // arch-like parabola
    std::vector<Vec2> pts;
    for (int i = 0; i <= 220; ++i) {
        double x = 90.0 + i;
        double y = 290.0 - 0.014 * (x - 200.0) * (x - 200.0);
        pts.push_back({x, y});
    }
    ReferenceCurve c = fit_reference_curve(pts, 500, 70);
    for (int k = 1; k < c.size(); ++k) {
        double cosang = std::clamp(dot(c.normals[k], c.normals[k - 1]), -1.0, 1.0);
        double deg = std::acos(cosang) * 180.0 / std::numbers::pi;
        REQUIRE(deg < 10.0);
        REQUIRE(norm(c.normals[k]) == Catch::Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("inward-bending ends trip the self-intersection check", "[curve]") {
    // horseshoe whose tips curl toward each other
    std::vector<Vec2> pts;
    for (int i = 0; i <= 300; ++i) {
        double theta = (-0.35 + 1.7 * i / 300.0) * std::numbers::pi;
        pts.push_back({100.0 + 60.0 * std::sin(theta), 100.0 - 60.0 * std::cos(theta)});
    }
    REQUIRE_THROWS_AS(fit_reference_curve(pts, 100, 200), Error);
}
