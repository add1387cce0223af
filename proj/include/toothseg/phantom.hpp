// Deterministic parametric CBCT phantom: two arch-following jaw slabs with
// ellipsoid-crown / tapered-root teeth inside a soft-tissue head, plus
// complete ground truth (per-voxel FDI labels, jaw masks, analytic arch
// curves, panorama-space boxes). Every derived oracle in the test suite is
// driven from here.
#pragma once

#include <map>
#include <random>

#include <json.hpp>

#include "toothseg/identify.hpp"
#include "toothseg/panorama.hpp"
#include "toothseg/types.hpp"
#include "toothseg/volume_io.hpp"

namespace toothseg {

/// Parabolic arch in the axial plane, all lengths in mm. The arch opens
/// toward -y: apex at (center_x, apex_y), arms reaching end_y at
/// center_x +- half_width.
struct ArchSpec {
    double apex_y_mm = 116.0;
    double end_y_mm = 48.0;
    double half_width_mm = 44.0;
};

struct ToothSpec {
    int fdi = 0;
    double arc_mm = 0.0;       // signed arc position along the arch, 0 at the apex
    double crown_w_mm = 7.0;   // along the arch tangent
    double crown_d_mm = 7.0;   // along the arch normal
    double crown_h_mm = 7.2;
    double root_len_mm = 8.8;  // from crown mid-height to the root tip
    double intensity = 1500.0;
};

struct PhantomSpec {
    uint64_t seed = 1;
    std::array<int, 3> dims{400, 400, 200};
    std::array<double, 3> spacing{0.4, 0.4, 0.4};
    ArchSpec arch_upper;
    ArchSpec arch_lower{114.0, 47.2, 42.0};
    std::vector<ToothSpec> teeth;  // both jaws; jaw and quadrant come from the FDI code
    double air_intensity = 50.0;
    double soft_intensity = 400.0;
    double jaw_intensity = 900.0;
    std::vector<int> missing;  // FDI codes to omit
    double bite_gap_mm = 4.0;
    double bite_z_mm = 58.8;             // center of the bite gap
    double slab_lower_mm = 15.2;         // lower jaw slab thickness
    double slab_upper_mm = 9.6;
    double band_halfwidth_mm = 6.0;      // arch band half-width
    double head_semi_mm[2] = {68.0, 74.0};
    double noise_sigma = 0.0;
    int overlap_tolerance_voxels = 0;
};

struct ToothTruth {
    int fdi = 0;
    ToothClass class_id = ToothClass::incisor;
    std::array<double, 3> center_vox{0, 0, 0};
    double intensity = 0.0;
    size_t voxels = 0;
};

struct PhantomTruth {
    std::array<int, 3> dims{0, 0, 0};
    std::array<double, 3> spacing{1, 1, 1};
    std::vector<uint16_t> labels;  // 0 background, else FDI code
    BinaryVolume3 jaw_upper;
    BinaryVolume3 jaw_lower;
    std::vector<Vec2> arch_upper;  // dense analytic centerline, voxel units
    std::vector<Vec2> arch_lower;
    std::vector<ToothTruth> teeth;
    std::map<int, PanoBox> boxes_upper;  // analytic-geometry panorama boxes
    std::map<int, PanoBox> boxes_lower;

    uint16_t label_at(int x, int y, int z) const {
        return labels[static_cast<size_t>(z) * dims[0] * dims[1] +
                      static_cast<size_t>(y) * dims[0] + x];
    }
    const ToothTruth* tooth(int fdi) const {
        for (const auto& t : teeth)
            if (t.fdi == fdi) return &t;
        return nullptr;
    }
};

namespace detail {

// Dense arc-length table along a parabolic arch, sampled in mm.
struct ArchTable {
    std::vector<Vec2> pts_mm;
    std::vector<double> arc;  // cumulative length
    size_t apex = 0;
    Vec2 centroid{0, 0};

    static ArchTable build(const ArchSpec& a, double center_x_mm) {
        ArchTable t;
        const int n = 4001;
        double k = (a.apex_y_mm - a.end_y_mm) / (a.half_width_mm * a.half_width_mm);
        t.pts_mm.resize(n);
        t.arc.resize(n, 0.0);
        for (int i = 0; i < n; ++i) {
            double xp = -a.half_width_mm + 2.0 * a.half_width_mm * i / (n - 1);
            t.pts_mm[i] = {center_x_mm + xp, a.apex_y_mm - k * xp * xp};
            if (i > 0) t.arc[i] = t.arc[i - 1] + norm(t.pts_mm[i] - t.pts_mm[i - 1]);
            t.centroid.x += t.pts_mm[i].x;
            t.centroid.y += t.pts_mm[i].y;
        }
        t.centroid = (1.0 / n) * t.centroid;
        t.apex = n / 2;
        return t;
    }

    struct Frame {
        Vec2 point;    // mm
        Vec2 tangent;  // unit, toward increasing x
        Vec2 normal;   // unit, away from the arch centroid (outer side)
    };

    Frame frame_at(double arc_mm) const {
        double target = arc[apex] + arc_mm;
        target = std::clamp(target, arc.front(), arc.back());
        size_t lo = 0, hi = arc.size() - 1;
        while (lo + 1 < hi) {
            size_t mid = (lo + hi) / 2;
            if (arc[mid] <= target) lo = mid;
            else hi = mid;
        }
        double seg = arc[hi] - arc[lo];
        double f = seg > 0 ? (target - arc[lo]) / seg : 0.0;
        Frame fr;
        fr.point = pts_mm[lo] + f * (pts_mm[hi] - pts_mm[lo]);
        Vec2 d = pts_mm[hi] - pts_mm[lo];
        double dn = norm(d);
        fr.tangent = dn > 0 ? (1.0 / dn) * d : Vec2{1, 0};
        Vec2 n{-fr.tangent.y, fr.tangent.x};
        if (dot(n, fr.point - centroid) < 0) n = {-n.x, -n.y};
        fr.normal = n;
        return fr;
    }
};

}  // namespace detail

/// Default 32-tooth spec (half resolution: 400x400x200 at 0.4 mm).
inline PhantomSpec default_phantom_spec() {
    PhantomSpec spec;
    // Per-quadrant widths from the central incisor outward, roughly tooth-like
    // proportions scaled to fit the arch.
    struct ClassRow {
        int pos;
        double w, d, h;
    };
    const ClassRow row[8] = {
        {1, 7.0, 6.5, 7.2}, {2, 6.0, 6.0, 7.2}, {3, 7.0, 7.0, 7.2}, {4, 6.5, 7.5, 7.2},
        {5, 6.5, 7.5, 7.2}, {6, 9.5, 9.0, 7.2}, {7, 9.0, 9.0, 7.2}, {8, 8.5, 8.5, 7.2},
    };
    const double gap = 0.8;
    for (int quadrant : {1, 2, 3, 4}) {
        double arc = gap / 2.0;
        for (const auto& r : row) {
            ToothSpec t;
            t.fdi = quadrant * 10 + r.pos;
            t.crown_w_mm = r.w;
            t.crown_d_mm = r.d;
            t.crown_h_mm = r.h;
            t.arc_mm = arc + r.w / 2.0;
            // patient-left quadrants (2 upper, 3 lower) sit at positive arc
            if (quadrant == 1 || quadrant == 4) t.arc_mm = -t.arc_mm;
            arc += r.w + gap;
            spec.teeth.push_back(t);
        }
    }
    std::sort(spec.teeth.begin(), spec.teeth.end(),
              [](const ToothSpec& a, const ToothSpec& b) {
                  if ((a.fdi / 10 <= 2) != (b.fdi / 10 <= 2)) return a.fdi / 10 <= 2;
                  return a.arc_mm < b.arc_mm;
              });
    return spec;
}

/// Full-resolution spec for benchmarks (matches clinical acquisition size).
inline PhantomSpec full_res_phantom_spec() {
    PhantomSpec spec = default_phantom_spec();
    spec.dims = {800, 800, 400};
    spec.spacing = {0.2, 0.2, 0.2};
    return spec;
}

/// Narrow intensity gaps for robustness tests.
inline PhantomSpec hard_phantom_spec() {
    PhantomSpec spec = default_phantom_spec();
    spec.soft_intensity = 600.0;
    spec.jaw_intensity = 850.0;
    for (auto& t : spec.teeth) t.intensity = 1100.0;
    spec.noise_sigma = 8.0;
    return spec;
}

inline void validate_spec(const PhantomSpec& spec) {
    if (spec.dims[0] <= 0 || spec.dims[1] <= 0 || spec.dims[2] <= 0 || spec.spacing[0] <= 0 ||
        spec.spacing[1] <= 0 || spec.spacing[2] <= 0)
        throw Error(ErrorCode::spec_invalid, "phantom: bad dims or spacing");
    if (!(spec.air_intensity < spec.soft_intensity && spec.soft_intensity < spec.jaw_intensity))
        throw Error(ErrorCode::spec_invalid,
                    "phantom: intensities must satisfy air < soft < bone");
    if (spec.bite_gap_mm <= 0)
        throw Error(ErrorCode::spec_invalid, "phantom: bite gap must be positive");
    // teeth strictly ordered in arc position within each jaw
    for (int upper = 0; upper <= 1; ++upper) {
        double prev = -1e30;
        for (const auto& t : spec.teeth) {
            bool is_upper = (t.fdi / 10 == 1 || t.fdi / 10 == 2);
            if (is_upper != (upper == 1)) continue;
            if (t.fdi / 10 < 1 || t.fdi / 10 > 4 || t.fdi % 10 < 1 || t.fdi % 10 > 8)
                throw Error(ErrorCode::spec_invalid, "phantom: bad FDI code");
            if (t.intensity <= spec.jaw_intensity)
                throw Error(ErrorCode::spec_invalid, "phantom: teeth must be brighter than bone");
            if (t.arc_mm <= prev)
                throw Error(ErrorCode::spec_invalid,
                            "phantom: teeth must be strictly ordered along the arch");
            prev = t.arc_mm;
        }
    }
}

/// Generate the phantom volume and its ground truth. Deterministic for a
/// fixed spec (including the seed when noise is enabled).
inline std::pair<Volume3, PhantomTruth> generate_phantom(const PhantomSpec& spec) {
    validate_spec(spec);
    const auto [nx, ny, nz] = spec.dims;
    const double dx = spec.spacing[0], dz = spec.spacing[2];
    const double cx_mm = nx * dx / 2.0;

    Volume3 vol(spec.dims, spec.spacing, static_cast<float>(spec.air_intensity));
    PhantomTruth truth;
    truth.dims = spec.dims;
    truth.spacing = spec.spacing;
    truth.labels.assign(vol.size(), 0);
    truth.jaw_upper = BinaryVolume3(spec.dims);
    truth.jaw_lower = BinaryVolume3(spec.dims);

    // Soft-tissue head: elliptical cylinder through all slices.
    const double hx = spec.head_semi_mm[0] / dx, hy = spec.head_semi_mm[1] / dx;
    const double cxv = (nx - 1) / 2.0, cyv = (ny - 1) / 2.0;
    std::vector<uint8_t> head(static_cast<size_t>(nx) * ny, 0);
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
            double ex = (x - cxv) / hx, ey = (y - cyv) / hy;
            head[static_cast<size_t>(y) * nx + x] = (ex * ex + ey * ey <= 1.0) ? 1 : 0;
        }
    for (int z = 0; z < nz; ++z) {
        float* slice = vol.data.data() + vol.index(0, 0, z);
        for (size_t i = 0; i < head.size(); ++i)
            if (head[i]) slice[i] = static_cast<float>(spec.soft_intensity);
    }

    // Arch bands: union of disks stamped along the centerline.
    auto stamp_band = [&](const detail::ArchTable& arch) {
        std::vector<uint8_t> band(static_cast<size_t>(nx) * ny, 0);
        const int r = std::max(1, static_cast<int>(std::lround(spec.band_halfwidth_mm / dx)));
        const double step_mm = 0.5 * dx;
        for (double a = 0.0; a <= arch.arc.back(); a += step_mm) {
            double arc_signed = a - arch.arc[arch.apex];
            Vec2 p = arch.frame_at(arc_signed).point;
            int px = static_cast<int>(std::lround(p.x / dx));
            int py = static_cast<int>(std::lround(p.y / dx));
            for (int oy = -r; oy <= r; ++oy)
                for (int ox = -r; ox <= r; ++ox) {
                    if (ox * ox + oy * oy > r * r) continue;
                    int xx = px + ox, yy = py + oy;
                    if (xx >= 0 && xx < nx && yy >= 0 && yy < ny)
                        band[static_cast<size_t>(yy) * nx + xx] = 1;
                }
        }
        return band;
    };
    auto arch_u = detail::ArchTable::build(spec.arch_upper, cx_mm);
    auto arch_l = detail::ArchTable::build(spec.arch_lower, cx_mm);
    std::vector<uint8_t> band_u = stamp_band(arch_u);
    std::vector<uint8_t> band_l = stamp_band(arch_l);

    // z layout, derived from the bite plane outward (in voxel slices).
    const double gap_half = spec.bite_gap_mm / 2.0;
    const int lower_crown_top = static_cast<int>(std::lround((spec.bite_z_mm - gap_half) / dz));
    const int upper_crown_bot = static_cast<int>(std::lround((spec.bite_z_mm + gap_half) / dz));
    const int crown_h_vox = std::max(2, static_cast<int>(std::lround(7.2 / dz)));
    const int lower_slab_top = lower_crown_top - crown_h_vox - 4;
    const int lower_slab_bot = lower_slab_top - static_cast<int>(std::lround(spec.slab_lower_mm / dz));
    const int upper_slab_bot = upper_crown_bot + crown_h_vox + 4;
    const int upper_slab_top = upper_slab_bot + static_cast<int>(std::lround(spec.slab_upper_mm / dz));
    if (lower_slab_bot < 0 || upper_slab_top >= nz)
        throw Error(ErrorCode::spec_invalid, "phantom: jaw layout exceeds the volume");

    auto fill_slab = [&](const std::vector<uint8_t>& band, BinaryVolume3& jaw_mask, int z0,
                         int z1) {
        for (int z = z0; z < z1; ++z) {
            float* slice = vol.data.data() + vol.index(0, 0, z);
            uint8_t* mask = jaw_mask.data.data() + jaw_mask.index(0, 0, z);
            for (size_t i = 0; i < band.size(); ++i)
                if (band[i]) {
                    slice[i] = static_cast<float>(spec.jaw_intensity);
                    mask[i] = 1;
                }
        }
    };
    fill_slab(band_l, truth.jaw_lower, lower_slab_bot, lower_slab_top);
    fill_slab(band_u, truth.jaw_upper, upper_slab_bot, upper_slab_top);

    // Teeth: ellipsoid crown plus a tapered root running into the slab.
    size_t collisions = 0;
    std::vector<int> missing_sorted = spec.missing;
    std::sort(missing_sorted.begin(), missing_sorted.end());
    for (const auto& tooth : spec.teeth) {
        if (std::binary_search(missing_sorted.begin(), missing_sorted.end(), tooth.fdi)) continue;
        bool is_upper = (tooth.fdi / 10 == 1 || tooth.fdi / 10 == 2);
        const auto& arch = is_upper ? arch_u : arch_l;
        auto frame = arch.frame_at(tooth.arc_mm);
        const double a = tooth.crown_w_mm / 2.0 / dx;  // semi-axes in voxels
        const double b = tooth.crown_d_mm / 2.0 / dx;
        const double c = tooth.crown_h_mm / 2.0 / dz;
        const double px = frame.point.x / dx, py = frame.point.y / dx;
        const double crown_center_z =
            is_upper ? upper_crown_bot + c : lower_crown_top - c;
        const double root_dir = is_upper ? 1.0 : -1.0;
        const double root_len_vox = tooth.root_len_mm / dz;
        const double tip_z = crown_center_z + root_dir * (c + root_len_vox);

        int x0 = std::max(0, static_cast<int>(px - std::max(a, b)) - 2);
        int x1 = std::min(nx - 1, static_cast<int>(px + std::max(a, b)) + 2);
        int y0 = std::max(0, static_cast<int>(py - std::max(a, b)) - 2);
        int y1 = std::min(ny - 1, static_cast<int>(py + std::max(a, b)) + 2);
        int z0 = std::max(0, static_cast<int>(std::floor(std::min(crown_center_z - c, tip_z))) - 1);
        int z1 = std::min(nz - 1, static_cast<int>(std::ceil(std::max(crown_center_z + c, tip_z))) + 1);

        ToothTruth tt;
        tt.fdi = tooth.fdi;
        tt.class_id = class_of_fdi(tooth.fdi);
        tt.intensity = tooth.intensity;
        double sx = 0, sy = 0, sz = 0;
        auto& jaw_mask = is_upper ? truth.jaw_upper : truth.jaw_lower;
        for (int z = z0; z <= z1; ++z) {
            double dzc = z - crown_center_z;
            // root taper: full crown cross-section at the crown center,
            // narrowing toward the tip
            double root_progress = root_dir * dzc / (c + root_len_vox);
            bool in_root_span = root_progress >= 0.0 && root_progress <= 1.0;
            double f = 0.8 + (0.25 - 0.8) * root_progress;
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    double du = (x - px) * frame.tangent.x + (y - py) * frame.tangent.y;
                    double dv = (x - px) * frame.normal.x + (y - py) * frame.normal.y;
                    double crown = (du / a) * (du / a) + (dv / b) * (dv / b) + (dzc / c) * (dzc / c);
                    bool inside = crown <= 1.0;
                    if (!inside && in_root_span) {
                        double ru = du / (a * f), rv = dv / (b * f);
                        inside = ru * ru + rv * rv <= 1.0;
                    }
                    if (!inside) continue;
                    size_t idx = vol.index(x, y, z);
                    if (truth.labels[idx] != 0 && truth.labels[idx] != tooth.fdi) {
                        ++collisions;
                        continue;
                    }
                    vol.data[idx] = static_cast<float>(tooth.intensity);
                    truth.labels[idx] = static_cast<uint16_t>(tooth.fdi);
                    jaw_mask.data[idx] = 1;
                    ++tt.voxels;
                    sx += x;
                    sy += y;
                    sz += z;
                }
            }
        }
        if (tt.voxels == 0)
            throw Error(ErrorCode::spec_invalid,
                        "phantom: tooth " + std::to_string(tooth.fdi) + " rasterized to nothing");
        tt.center_vox = {sx / tt.voxels, sy / tt.voxels, sz / tt.voxels};
        truth.teeth.push_back(tt);
    }
    if (collisions > static_cast<size_t>(spec.overlap_tolerance_voxels))
        throw Error(ErrorCode::spec_invalid,
                    "phantom: teeth overlap by " + std::to_string(collisions) + " voxels");

    if (spec.noise_sigma > 0.0) {
        std::mt19937_64 rng(spec.seed);
        std::normal_distribution<double> noise(0.0, spec.noise_sigma);
        for (auto& v : vol.data)
            v = static_cast<float>(std::max(0.0, v + noise(rng)));
    }

    // Analytic centerlines in voxel units.
    auto polyline_vox = [&](const detail::ArchTable& arch) {
        std::vector<Vec2> pts;
        pts.reserve(arch.pts_mm.size() / 4);
        for (size_t i = 0; i < arch.pts_mm.size(); i += 4)
            pts.push_back({arch.pts_mm[i].x / dx, arch.pts_mm[i].y / dx});
        return pts;
    };
    truth.arch_upper = polyline_vox(arch_u);
    truth.arch_lower = polyline_vox(arch_l);
    return {std::move(vol), std::move(truth)};
}

// --- panorama-space ground truth -------------------------------------------

struct ToothFootprint {
    PanoBox box;
    BinaryImage2 mask;  // footprint in panorama pixels
    size_t pixels = 0;
};

/// Project per-voxel tooth labels through the panorama geometry: a tooth's
/// footprint is the set of (s, z) pixels whose integration ray passes
/// through one of its voxels. Only teeth of the geometry's jaw are
/// projected (panoramas are rendered from per-jaw masked volumes).
inline std::map<int, ToothFootprint> project_tooth_footprints(const PhantomTruth& truth,
                                                              const PanoramaGeometry& g) {
    const int n_s = g.curve.size();
    const int height = g.height();
    const double dx = truth.spacing[0];
    const double step = 0.5 * std::min(truth.spacing[0], truth.spacing[1]);
    const long ksteps = std::max(1L, std::lround(2.0 * g.alpha_mm / step));

    std::array<int, 49> slot;  // fdi (11..48) -> footprint index
    slot.fill(-1);
    std::vector<int> fdis;
    std::vector<ToothFootprint> fps;
    struct Bounds {
        int smin, smax, zmin, zmax;
    };
    std::vector<Bounds> bounds;
    for (const auto& t : truth.teeth) {
        if ((jaw_of_fdi(t.fdi) == Jaw::upper) != (g.jaw == Jaw::upper)) continue;
        slot[t.fdi] = static_cast<int>(fps.size());
        fdis.push_back(t.fdi);
        fps.push_back({});
        fps.back().mask = BinaryImage2({n_s, height});
        bounds.push_back({n_s, -1, height, -1});
    }
    for (int s = 0; s < n_s; ++s) {
        const Vec2 r = g.curve.points[s];
        const Vec2 n = g.curve.normals[s];
        for (int row = 0; row < height; ++row) {
            int z = row + g.z_range[0];
            if (z < 0 || z >= truth.dims[2]) continue;
            for (long k = 0; k <= ksteps; ++k) {
                double t = -g.alpha_mm + 2.0 * g.alpha_mm * k / ksteps;
                int x = static_cast<int>(std::lround(r.x + (t / dx) * n.x));
                int y = static_cast<int>(std::lround(r.y + (t / dx) * n.y));
                if (x < 0 || x >= truth.dims[0] || y < 0 || y >= truth.dims[1]) continue;
                uint16_t label = truth.label_at(x, y, z);
                if (!label || label > 48 || slot[label] < 0) continue;
                ToothFootprint& fp = fps[slot[label]];
                if (!fp.mask(s, row)) {
                    fp.mask.at(s, row) = 1;
                    ++fp.pixels;
                    Bounds& bb = bounds[slot[label]];
                    bb.smin = std::min(bb.smin, s);
                    bb.smax = std::max(bb.smax, s);
                    bb.zmin = std::min(bb.zmin, row);
                    bb.zmax = std::max(bb.zmax, row);
                }
            }
        }
    }
    std::map<int, ToothFootprint> out;
    for (size_t i = 0; i < fps.size(); ++i) {
        const Bounds& bb = bounds[i];
        if (bb.smax >= bb.smin) {
            fps[i].box.s = (bb.smin + bb.smax + 1) / 2.0;
            fps[i].box.z = (bb.zmin + bb.zmax + 1) / 2.0;
            fps[i].box.w = bb.smax - bb.smin + 1;
            fps[i].box.h = bb.zmax - bb.zmin + 1;
        }
        out.emplace(fdis[i], std::move(fps[i]));
    }
    return out;
}

struct TruthBoxes {
    std::map<int, PanoBox> boxes;
    std::vector<int> invisible;  // teeth with no panorama footprint (flagged)
};

/// Tight panorama-space bounds per tooth under the given geometry.
inline TruthBoxes truth_panorama_boxes(const PhantomTruth& truth, const PanoramaGeometry& g) {
    TruthBoxes out;
    auto footprints = project_tooth_footprints(truth, g);
    for (const auto& [fdi, fp] : footprints) {
        if (fp.pixels == 0) out.invisible.push_back(fdi);
        else out.boxes[fdi] = fp.box;
    }
    return out;
}

/// Fill truth.boxes_upper/lower from the phantom's own analytic geometry.
inline void fill_analytic_boxes(PhantomTruth& truth, const PanoramaParams& p = {});

/// Panorama geometry built from the phantom's own analytic centerline
/// (resampled to the standard width) rather than a fitted skeleton.
inline PanoramaGeometry analytic_geometry(const PhantomTruth& truth, Jaw jaw,
                                          const PanoramaParams& p = {}) {
    p.validate();
    const auto& polyline = jaw == Jaw::upper ? truth.arch_upper : truth.arch_lower;
    CurveFitOptions opt;
    opt.control_spacing_px = p.control_spacing_px;
    opt.pixel_size_mm = truth.spacing[0];
    PanoramaGeometry g;
    g.curve = fit_reference_curve(polyline, p.n_interp, p.n_extrap, opt);
    g.alpha_mm = p.alpha_mm;
    g.ray_step_mm = p.ray_step_mm;
    g.z_range = {p.z_crop_bottom, p.z_crop_bottom + p.height};
    g.volume_dims = truth.dims;
    g.spacing = truth.spacing;
    g.jaw = jaw;
    return g;
}

inline void fill_analytic_boxes(PhantomTruth& truth, const PanoramaParams& p) {
    truth.boxes_upper = truth_panorama_boxes(truth, analytic_geometry(truth, Jaw::upper, p)).boxes;
    truth.boxes_lower = truth_panorama_boxes(truth, analytic_geometry(truth, Jaw::lower, p)).boxes;
}

// --- spec / truth (de)serialization ----------------------------------------

inline nlohmann::json phantom_spec_to_json(const PhantomSpec& s) {
    nlohmann::json teeth = nlohmann::json::array();
    for (const auto& t : s.teeth)
        teeth.push_back({{"fdi", t.fdi},
                         {"arc_mm", t.arc_mm},
                         {"crown_mm", {t.crown_w_mm, t.crown_d_mm, t.crown_h_mm}},
                         {"root_len_mm", t.root_len_mm},
                         {"intensity", t.intensity}});
    return {
        {"seed", s.seed},
        {"dims", s.dims},
        {"spacing_mm", s.spacing},
        {"arch_upper", {s.arch_upper.apex_y_mm, s.arch_upper.end_y_mm, s.arch_upper.half_width_mm}},
        {"arch_lower", {s.arch_lower.apex_y_mm, s.arch_lower.end_y_mm, s.arch_lower.half_width_mm}},
        {"teeth", teeth},
        {"air_intensity", s.air_intensity},
        {"soft_intensity", s.soft_intensity},
        {"jaw_intensity", s.jaw_intensity},
        {"missing", s.missing},
        {"bite_gap_mm", s.bite_gap_mm},
        {"bite_z_mm", s.bite_z_mm},
        {"slab_lower_mm", s.slab_lower_mm},
        {"slab_upper_mm", s.slab_upper_mm},
        {"band_halfwidth_mm", s.band_halfwidth_mm},
        {"head_semi_mm", {s.head_semi_mm[0], s.head_semi_mm[1]}},
        {"noise_sigma", s.noise_sigma},
        {"overlap_tolerance_voxels", s.overlap_tolerance_voxels},
    };
}

inline PhantomSpec phantom_spec_from_json(const nlohmann::json& j) {
    PhantomSpec s = default_phantom_spec();
    try {
        s.seed = j.value("seed", s.seed);
        if (j.contains("dims"))
            for (int i = 0; i < 3; ++i) s.dims[i] = j["dims"].at(i).get<int>();
        if (j.contains("spacing_mm"))
            for (int i = 0; i < 3; ++i) s.spacing[i] = j["spacing_mm"].at(i).get<double>();
        auto arch = [](const nlohmann::json& a) {
            return ArchSpec{a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
        };
        if (j.contains("arch_upper")) s.arch_upper = arch(j["arch_upper"]);
        if (j.contains("arch_lower")) s.arch_lower = arch(j["arch_lower"]);
        if (j.contains("teeth")) {
            s.teeth.clear();
            for (const auto& tj : j["teeth"]) {
                ToothSpec t;
                t.fdi = tj.at("fdi").get<int>();
                t.arc_mm = tj.at("arc_mm").get<double>();
                t.crown_w_mm = tj.at("crown_mm").at(0).get<double>();
                t.crown_d_mm = tj.at("crown_mm").at(1).get<double>();
                t.crown_h_mm = tj.at("crown_mm").at(2).get<double>();
                t.root_len_mm = tj.value("root_len_mm", t.root_len_mm);
                t.intensity = tj.value("intensity", t.intensity);
                s.teeth.push_back(t);
            }
        }
        s.air_intensity = j.value("air_intensity", s.air_intensity);
        s.soft_intensity = j.value("soft_intensity", s.soft_intensity);
        s.jaw_intensity = j.value("jaw_intensity", s.jaw_intensity);
        if (j.contains("missing")) s.missing = j["missing"].get<std::vector<int>>();
        s.bite_gap_mm = j.value("bite_gap_mm", s.bite_gap_mm);
        s.bite_z_mm = j.value("bite_z_mm", s.bite_z_mm);
        s.slab_lower_mm = j.value("slab_lower_mm", s.slab_lower_mm);
        s.slab_upper_mm = j.value("slab_upper_mm", s.slab_upper_mm);
        s.band_halfwidth_mm = j.value("band_halfwidth_mm", s.band_halfwidth_mm);
        if (j.contains("head_semi_mm")) {
            s.head_semi_mm[0] = j["head_semi_mm"].at(0).get<double>();
            s.head_semi_mm[1] = j["head_semi_mm"].at(1).get<double>();
        }
        s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
        s.overlap_tolerance_voxels = j.value("overlap_tolerance_voxels", s.overlap_tolerance_voxels);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::format_error, std::string("bad phantom spec JSON: ") + e.what());
    }
    return s;
}

/// Write volume + truth into a directory with fixed file names.
inline void save_phantom(const fs::path& dir, const Volume3& vol, const PhantomTruth& truth,
                         const PhantomSpec& spec) {
    fs::create_directories(dir);
    save_volume(vol, dir / "volume.raw");
    save_labels(truth.labels, truth.dims, truth.spacing, dir / "labels.raw");
    save_mask(truth.jaw_upper, dir / "jaw_upper.raw", truth.spacing);
    save_mask(truth.jaw_lower, dir / "jaw_lower.raw", truth.spacing);
    nlohmann::json teeth = nlohmann::json::array();
    for (const auto& t : truth.teeth)
        teeth.push_back({{"fdi", t.fdi},
                         {"class", tooth_class_name(t.class_id)},
                         {"center_vox", t.center_vox},
                         {"intensity", t.intensity},
                         {"voxels", t.voxels}});
    auto curve_json = [](const std::vector<Vec2>& pts) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& p : pts) arr.push_back({p.x, p.y});
        return arr;
    };
    auto boxes_json = [](const std::map<int, PanoBox>& boxes) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& [fdi, b] : boxes)
            arr.push_back({{"fdi", fdi}, {"box", {b.s, b.z, b.w, b.h}}});
        return arr;
    };
    nlohmann::json j = {
        {"spec", phantom_spec_to_json(spec)},
        {"teeth", teeth},
        {"arch_upper", curve_json(truth.arch_upper)},
        {"arch_lower", curve_json(truth.arch_lower)},
        {"panorama_boxes",
         {{"upper", boxes_json(truth.boxes_upper)}, {"lower", boxes_json(truth.boxes_lower)}}},
        {"files",
         {{"volume", "volume.raw"},
          {"labels", "labels.raw"},
          {"jaw_upper", "jaw_upper.raw"},
          {"jaw_lower", "jaw_lower.raw"}}},
    };
    write_json_file(dir / "truth.json", j);
}

/// Load the truth written by save_phantom (labels, masks, tooth table,
/// analytic curves; analytic boxes are not reloaded).
inline PhantomTruth load_phantom_truth(const fs::path& dir) {
    PhantomTruth truth;
    truth.labels = load_labels(dir / "labels.raw", truth.dims, &truth.spacing);
    truth.jaw_upper = load_mask(dir / "jaw_upper.raw");
    truth.jaw_lower = load_mask(dir / "jaw_lower.raw");
    nlohmann::json j = detail::read_json_file(dir / "truth.json");
    try {
        for (const auto& tj : j.at("teeth")) {
            ToothTruth t;
            t.fdi = tj.at("fdi").get<int>();
            t.class_id = tooth_class_from_name(tj.at("class").get<std::string>());
            for (int i = 0; i < 3; ++i) t.center_vox[i] = tj.at("center_vox").at(i).get<double>();
            t.intensity = tj.at("intensity").get<double>();
            t.voxels = tj.at("voxels").get<size_t>();
            truth.teeth.push_back(t);
        }
        for (const auto& p : j.at("arch_upper"))
            truth.arch_upper.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        for (const auto& p : j.at("arch_lower"))
            truth.arch_lower.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::format_error, std::string("bad truth JSON: ") + e.what());
    }
    return truth;
}

}  // namespace toothseg
