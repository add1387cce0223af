// Curved panoramic reconstruction: MIP, panorama rendering along the
// reference curve, and the full per-jaw chain from a raw CBCT volume to the
// two panoramic images.
#pragma once

#include <json.hpp>

#include "toothseg/connected.hpp"
#include "toothseg/curve.hpp"
#include "toothseg/histogram.hpp"
#include "toothseg/morphology.hpp"
#include "toothseg/skeleton.hpp"
#include "toothseg/types.hpp"
#include "toothseg/volume_ops.hpp"

namespace toothseg {

/// Geometry tying a panorama to the volume it was rendered from. Panorama
/// row r corresponds to volume slice r + z_range[0]; column s follows the
/// reference curve. The slab half-thickness alpha and the integration step
/// are in mm.
struct PanoramaGeometry {
    ReferenceCurve curve;
    double alpha_mm = 10.0;
    double ray_step_mm = 0.2;
    std::array<int, 2> z_range{0, 0};  // [z_lo, z_hi): height = z_hi - z_lo
    std::array<int, 3> volume_dims{0, 0, 0};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    Jaw jaw = Jaw::upper;

    int width() const { return curve.size(); }
    int height() const { return z_range[1] - z_range[0]; }
};

/// Maximum intensity projection along z: out(x, y) = max_z v(x, y, z).
inline Image2 mip_z(const Volume3& v) {
    Image2 out({v.dims[0], v.dims[1]}, {v.spacing[0], v.spacing[1]});
    for (int z = 0; z < v.dims[2]; ++z)
        for (int y = 0; y < v.dims[1]; ++y) {
            const float* row = v.data.data() + v.index(0, y, z);
            double* orow = out.data.data() + out.index(0, y);
            for (int x = 0; x < v.dims[0]; ++x)
                if (row[x] > orow[x]) orow[x] = row[x];
        }
    return out;
}

namespace detail {

// Bilinear in-plane sample; positions outside the volume contribute zero
// (rays may exit the grid).
inline double sample_ray(const Volume3& v, double x, double y, int z) {
    if (x < 0.0 || y < 0.0 || x > v.dims[0] - 1 || y > v.dims[1] - 1) return 0.0;
    int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
    int x1 = std::min(x0 + 1, v.dims[0] - 1);
    int y1 = std::min(y0 + 1, v.dims[1] - 1);
    double fx = x - x0, fy = y - y0;
    return (1 - fx) * (1 - fy) * v(x0, y0, z) + fx * (1 - fy) * v(x1, y0, z) +
           (1 - fx) * fy * v(x0, y1, z) + fx * fy * v(x1, y1, z);
}

}  // namespace detail

/// Render a panorama: P(s, z) = sum_k v(r(s) + t_k n(s), z) * dt with t_k the
/// midpoints of a uniform subdivision of [-alpha, alpha]. Sampling is
/// bilinear in (x, y) at integer slices; the row sum is sequential and
/// fixed-order, so results are bit-deterministic.
inline Image2 render_panorama(const Volume3& v, const PanoramaGeometry& g) {
    if (std::abs(v.spacing[0] - v.spacing[1]) > 1e-9)
        throw Error(ErrorCode::invalid_argument, "panorama requires isotropic in-plane spacing");
    if (g.height() <= 0 || g.curve.size() == 0)
        throw Error(ErrorCode::invalid_argument, "panorama geometry is empty");
    bool any_inside = false;
    for (const auto& p : g.curve.points)
        if (p.x >= 0 && p.y >= 0 && p.x <= v.dims[0] - 1 && p.y <= v.dims[1] - 1) {
            any_inside = true;
            break;
        }
    if (!any_inside)
        throw Error(ErrorCode::geometry_error, "reference curve lies outside the volume");

    const int n_s = g.curve.size();
    const int height = g.height();
    const double dx = v.spacing[0];
    const long k_steps = std::max(1L, std::lround(2.0 * g.alpha_mm / g.ray_step_mm));
    const double dt = 2.0 * g.alpha_mm / static_cast<double>(k_steps);

    Image2 out({n_s, height}, {g.curve.arc_spacing_mm, v.spacing[2]});
    for (int s = 0; s < n_s; ++s) {
        const Vec2 r = g.curve.points[s];
        const Vec2 n = g.curve.normals[s];
        for (int row = 0; row < height; ++row) {
            int z = row + g.z_range[0];
            if (z < 0 || z >= v.dims[2]) continue;  // outside volume: zero
            double acc = 0.0;
            for (long k = 0; k < k_steps; ++k) {
                double t = -g.alpha_mm + (k + 0.5) * dt;
                double px = r.x + (t / dx) * n.x;
                double py = r.y + (t / dx) * n.y;
                acc += detail::sample_ray(v, px, py, z);
            }
            out.at(s, row) = acc * dt;
        }
    }
    return out;
}

/// Knobs for the Step 1 chain. width must equal n_interp + 2*n_extrap.
struct PanoramaParams {
    int n_interp = 500;
    int n_extrap = 70;
    int width = 640;
    int height = 320;
    double alpha_mm = 10.0;
    double ray_step_mm = 0.2;
    int z_crop_bottom = 80;
    int bins = 256;
    int closing_radius = 3;
    double control_spacing_px = 3.0;
    double min_component_fraction = 0.01;

    void validate() const {
        if (width != n_interp + 2 * n_extrap)
            throw Error(ErrorCode::invalid_argument,
                        "panorama width must equal n_interp + 2*n_extrap");
        if (height <= 0 || alpha_mm <= 0 || ray_step_mm <= 0 || bins < 2 || z_crop_bottom < 0)
            throw Error(ErrorCode::invalid_argument, "bad panorama parameters");
    }
};

struct JawPanorama {
    Image2 panorama;
    PanoramaGeometry geometry;
    BinaryVolume3 jaw_mask;
    Image2 mip;
    BinaryImage2 arch_region;
    std::vector<PixelCoord> skeleton;
};

struct PanoramaBundle {
    JawPanorama upper;
    JawPanorama lower;
    double bone_t0 = 0.0;
    double bone_t1 = 0.0;
};

namespace detail {

template <typename F>
auto staged(const char* stage, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error::with_stage(e, stage);
    }
}

inline JawPanorama build_jaw_panorama(const Volume3& x, const BinaryVolume3& jaw_mask, Jaw jaw,
                                      const PanoramaParams& p) {
    JawPanorama out;
    out.jaw_mask = jaw_mask;
    Image2 mip = staged("mip", [&] {
        Volume3 jaw_volume = masked(x, jaw_mask);
        return mip_z(jaw_volume);
    });
    out.arch_region = staged("arch_otsu", [&] {
        double t = otsu_single(histogram(mip, p.bins));
        return binarize(mip, t);
    });
    out.mip = std::move(mip);
    out.arch_region = staged("closing", [&] {
        BinaryImage2 closed = closing_2d(out.arch_region, p.closing_radius);
        // Stray specks would make the medial axis ill-defined; the arch is
        // the dominant component.
        return largest_component_8(closed);
    });
    out.skeleton = staged("skeletonize", [&] { return skeletonize_2d(out.arch_region); });
    // Canonical s direction: the curve runs toward increasing x, so
    // patient-left consistently sits at higher s in every panorama.
    if (!out.skeleton.empty() && out.skeleton.front().u > out.skeleton.back().u)
        std::reverse(out.skeleton.begin(), out.skeleton.end());
    ReferenceCurve curve = staged("fit_curve", [&] {
        CurveFitOptions opt;
        opt.control_spacing_px = p.control_spacing_px;
        opt.pixel_size_mm = x.spacing[0];
        return fit_reference_curve(out.skeleton, p.n_interp, p.n_extrap, opt);
    });
    out.geometry.curve = std::move(curve);
    out.geometry.alpha_mm = p.alpha_mm;
    out.geometry.ray_step_mm = p.ray_step_mm;
    out.geometry.z_range = {p.z_crop_bottom, p.z_crop_bottom + p.height};
    out.geometry.volume_dims = x.dims;
    out.geometry.spacing = x.spacing;
    out.geometry.jaw = jaw;
    out.panorama = staged("render", [&] {
        Volume3 jaw_volume = masked(x, jaw_mask);
        return render_panorama(jaw_volume, out.geometry);
    });
    return out;
}

}  // namespace detail

/// Full Step 1 chain: bone thresholding (two-level Otsu over the slices
/// above the bottom crop), jaw separation, and per-jaw MIP -> arch region ->
/// medial axis -> reference curve -> panorama. Errors carry the stage they
/// surfaced in.
inline PanoramaBundle build_panoramas(const Volume3& x, const PanoramaParams& p = {}) {
    p.validate();
    if (p.z_crop_bottom >= x.dims[2])
        throw Error(ErrorCode::invalid_argument, "bottom crop removes the whole volume");
    PanoramaBundle bundle;
    const size_t plane = static_cast<size_t>(x.dims[0]) * x.dims[1];
    const size_t offset = plane * static_cast<size_t>(p.z_crop_bottom);

    Histogram h = detail::staged("histogram", [&] {
        std::span<const float> tail(x.data.data() + offset, x.data.size() - offset);
        return detail::histogram_of_values(tail, {}, p.bins);
    });
    std::tie(bundle.bone_t0, bundle.bone_t1) =
        detail::staged("otsu", [&] { return otsu_two_level(h); });

    BinaryVolume3 bone(x.dims);
    for (size_t i = offset; i < x.data.size(); ++i)
        bone.data[i] = (x.data[i] >= bundle.bone_t1) ? 1 : 0;

    JawPair jaws = detail::staged("split_jaws",
                                  [&] { return split_jaws(bone, p.min_component_fraction); });
    bone = BinaryVolume3();  // release before the per-jaw masked copies

    bundle.upper = detail::build_jaw_panorama(x, jaws.upper, Jaw::upper, p);
    bundle.lower = detail::build_jaw_panorama(x, jaws.lower, Jaw::lower, p);
    return bundle;
}

// --- geometry (de)serialization -------------------------------------------

inline nlohmann::json geometry_to_json(const PanoramaGeometry& g) {
    nlohmann::json points = nlohmann::json::array();
    nlohmann::json normals = nlohmann::json::array();
    for (const auto& pt : g.curve.points) points.push_back({pt.x, pt.y});
    for (const auto& n : g.curve.normals) normals.push_back({n.x, n.y});
    return {
        {"jaw", jaw_name(g.jaw)},
        {"alpha_mm", g.alpha_mm},
        {"ray_step_mm", g.ray_step_mm},
        {"z_range", g.z_range},
        {"volume_dims", g.volume_dims},
        {"spacing_mm", g.spacing},
        {"arc_spacing_mm", g.curve.arc_spacing_mm},
        {"n_interp", g.curve.n_interp},
        {"n_extrap", g.curve.n_extrap},
        {"points", points},
        {"normals", normals},
    };
}

inline PanoramaGeometry geometry_from_json(const nlohmann::json& j) {
    PanoramaGeometry g;
    try {
        g.jaw = jaw_from_name(j.at("jaw").get<std::string>());
        g.alpha_mm = j.at("alpha_mm").get<double>();
        g.ray_step_mm = j.at("ray_step_mm").get<double>();
        for (int i = 0; i < 2; ++i) g.z_range[i] = j.at("z_range").at(i).get<int>();
        for (int i = 0; i < 3; ++i) g.volume_dims[i] = j.at("volume_dims").at(i).get<int>();
        for (int i = 0; i < 3; ++i) g.spacing[i] = j.at("spacing_mm").at(i).get<double>();
        g.curve.arc_spacing_mm = j.at("arc_spacing_mm").get<double>();
        g.curve.n_interp = j.at("n_interp").get<int>();
        g.curve.n_extrap = j.at("n_extrap").get<int>();
        for (const auto& pt : j.at("points"))
            g.curve.points.push_back({pt.at(0).get<double>(), pt.at(1).get<double>()});
        for (const auto& n : j.at("normals"))
            g.curve.normals.push_back({n.at(0).get<double>(), n.at(1).get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::format_error, std::string("bad geometry JSON: ") + e.what());
    }
    if (g.curve.points.size() != g.curve.normals.size() || g.curve.points.empty())
        throw Error(ErrorCode::format_error, "geometry JSON: points/normals mismatch");
    return g;
}

}  // namespace toothseg
