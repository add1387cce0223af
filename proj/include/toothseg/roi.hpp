// Back-projection of panorama-space pixel sets into the CT volume and
// extraction of the loose/tight ROI pair sharing one 3D bounding box, plus
// the two-channel network input built from them.
#pragma once

#include <json.hpp>

#include "toothseg/detection.hpp"
#include "toothseg/identify.hpp"
#include "toothseg/panorama.hpp"
#include "toothseg/types.hpp"
#include "toothseg/volume_io.hpp"
#include "toothseg/volume_ops.hpp"

namespace toothseg {

/// Voxel box, half-open per axis: [lo, hi).
struct VoxelBox {
    std::array<int, 3> lo{0, 0, 0};
    std::array<int, 3> hi{0, 0, 0};

    std::array<int, 3> extents() const {
        return {hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]};
    }
};

/// Pixel set of an axis-aligned panorama box, clamped to the panorama.
inline std::vector<PixelCoord> box_pixels(const PanoBox& box, int pano_w, int pano_h) {
    int s0 = std::max(0, static_cast<int>(std::lround(box.s - box.w / 2)));
    int s1 = std::min(pano_w, static_cast<int>(std::lround(box.s + box.w / 2)));
    int z0 = std::max(0, static_cast<int>(std::lround(box.z - box.h / 2)));
    int z1 = std::min(pano_h, static_cast<int>(std::lround(box.z + box.h / 2)));
    std::vector<PixelCoord> pixels;
    for (int z = z0; z < z1; ++z)
        for (int s = s0; s < s1; ++s) pixels.push_back({s, z});
    return pixels;
}

inline std::vector<PixelCoord> mask_pixels(const BinaryImage2& mask) {
    std::vector<PixelCoord> pixels;
    for (int v = 0; v < mask.dims[1]; ++v)
        for (int u = 0; u < mask.dims[0]; ++u)
            if (mask(u, v)) pixels.push_back({u, v});
    return pixels;
}

/// Back-project a panorama pixel set through the geometry:
/// D = { (r(s) + t n(s), z + z_lo) : -alpha <= t <= alpha, (s, z) in B },
/// rasterized at half-voxel steps along each ray so the covered voxel set
/// has no gaps. The result lives on the original volume grid.
inline BinaryVolume3 backproject_domain(const std::vector<PixelCoord>& pixels,
                                        const PanoramaGeometry& g,
                                        VoxelBox* bounds_out = nullptr) {
    if (pixels.empty())
        throw Error(ErrorCode::invalid_argument, "backproject: empty pixel set");
    if (g.volume_dims[0] <= 0)
        throw Error(ErrorCode::invalid_argument, "backproject: geometry lacks volume dims");
    const double dx = g.spacing[0];
    const double step_mm = 0.5 * std::min(g.spacing[0], g.spacing[1]);
    const long ksteps = std::max(1L, std::lround(2.0 * g.alpha_mm / step_mm));
    BinaryVolume3 domain(g.volume_dims);
    VoxelBox bb{{g.volume_dims[0], g.volume_dims[1], g.volume_dims[2]}, {0, 0, 0}};
    bool any = false;
    for (const auto& px : pixels) {
        if (px.u < 0 || px.u >= g.curve.size() || px.v < 0 || px.v >= g.height())
            throw Error(ErrorCode::invalid_argument, "backproject: pixel outside panorama");
        int z = px.v + g.z_range[0];
        if (z < 0 || z >= g.volume_dims[2]) continue;
        const Vec2 r = g.curve.points[px.u];
        const Vec2 n = g.curve.normals[px.u];
        for (long k = 0; k <= ksteps; ++k) {
            double t = -g.alpha_mm + 2.0 * g.alpha_mm * k / ksteps;
            int x = static_cast<int>(std::lround(r.x + (t / dx) * n.x));
            int y = static_cast<int>(std::lround(r.y + (t / dx) * n.y));
            if (x >= 0 && x < g.volume_dims[0] && y >= 0 && y < g.volume_dims[1]) {
                domain.at(x, y, z) = 1;
                any = true;
                bb.lo = {std::min(bb.lo[0], x), std::min(bb.lo[1], y), std::min(bb.lo[2], z)};
                bb.hi = {std::max(bb.hi[0], x + 1), std::max(bb.hi[1], y + 1),
                         std::max(bb.hi[2], z + 1)};
            }
        }
    }
    if (bounds_out) {
        if (!any)
            throw Error(ErrorCode::invalid_argument, "backproject: domain maps to no voxels");
        *bounds_out = bb;
    }
    return domain;
}

struct RoiPair {
    Volume3 loose;   // CT masked by the box domain, cropped to bbox3
    Volume3 tight;   // CT masked by the segmentation domain, same crop
    VoxelBox bbox3;
    ToothID fdi;
    int padding = 0;
};

/// Extract the loose/tight ROI pair: bbox3 is the tight bound of the
/// back-projected box domain (padded), the loose ROI zeroes everything
/// outside D_box, and the tight ROI zeroes everything outside D_seg while
/// sharing the same bounding box.
inline RoiPair extract_roi_pair(const Volume3& x, const std::vector<PixelCoord>& box_px,
                                const std::vector<PixelCoord>& seg_px,
                                const PanoramaGeometry& g, const ToothID& fdi,
                                int padding = 2) {
    if (x.dims != g.volume_dims)
        throw Error(ErrorCode::invalid_argument, "extract_roi: geometry volume dims mismatch");
    VoxelBox bb;
    BinaryVolume3 d_box = backproject_domain(box_px, g, &bb);
    BinaryVolume3 d_seg = backproject_domain(seg_px, g);
    for (int a = 0; a < 3; ++a) {
        bb.lo[a] = std::max(0, bb.lo[a] - padding);
        bb.hi[a] = std::min(x.dims[a], bb.hi[a] + padding);
    }

    RoiPair roi;
    roi.bbox3 = bb;
    roi.fdi = fdi;
    roi.padding = padding;
    auto ext = bb.extents();
    roi.loose = Volume3({ext[0], ext[1], ext[2]}, x.spacing);
    roi.tight = Volume3({ext[0], ext[1], ext[2]}, x.spacing);
    for (int z = bb.lo[2]; z < bb.hi[2]; ++z)
        for (int y = bb.lo[1]; y < bb.hi[1]; ++y)
            for (int xx = bb.lo[0]; xx < bb.hi[0]; ++xx) {
                size_t src = x.index(xx, y, z);
                size_t dst = roi.loose.index(xx - bb.lo[0], y - bb.lo[1], z - bb.lo[2]);
                if (d_box.data[src]) roi.loose.data[dst] = x.data[src];
                if (d_seg.data[src]) roi.tight.data[dst] = x.data[src];
            }
    return roi;
}

/// Two-channel network input: loose and tight resampled to cube^3 with the
/// shared lattice transform. Channel order is fixed (loose, tight).
struct RoiInput {
    Volume3 loose;  // channel 0
    Volume3 tight;  // channel 1

    std::array<int, 3> dims() const { return loose.dims; }
};

inline RoiInput make_roi_input(const RoiPair& roi, int cube = 128) {
    RoiInput input;
    input.loose = resample_trilinear(roi.loose, {cube, cube, cube});
    input.tight = resample_trilinear(roi.tight, {cube, cube, cube});
    return input;
}

// --- file formats ------------------------------------------------------------

/// Two-channel raw file: channel 0 then channel 1, each x-fastest, dtype
/// u16, sidecar carries "channels": 2.
inline void save_roi_input(const RoiInput& input, const fs::path& path) {
    if (input.loose.dims != input.tight.dims)
        throw Error(ErrorCode::invalid_argument, "roi input channels disagree in dims");
    size_t n = input.loose.size();
    std::vector<uint16_t> raw(2 * n);
    auto quantize = [](float v) {
        return static_cast<uint16_t>(
            std::clamp(std::llround(static_cast<double>(v)), 0LL, 65535LL));
    };
    for (size_t i = 0; i < n; ++i) raw[i] = quantize(input.loose.data[i]);
    for (size_t i = 0; i < n; ++i) raw[n + i] = quantize(input.tight.data[i]);
    detail::write_file_atomic(path, raw.data(), raw.size() * 2);
    json sc = {{"dims", input.loose.dims},
               {"spacing_mm", input.loose.spacing},
               {"dtype", "u16"},
               {"channels", 2}};
    write_json_file(sidecar_path(path), sc);
}

inline RoiInput load_roi_input(const fs::path& path) {
    RawHeader h = read_sidecar(path);
    if (h.channels != 2 || h.dtype != "u16")
        throw Error(ErrorCode::format_error, path.string() + ": expected 2-channel u16 raw");
    size_t n = static_cast<size_t>(h.dims[0]) * h.dims[1] * h.dims[2];
    auto raw = detail::read_scalars<uint16_t>(path, 2 * n);
    RoiInput input;
    input.loose = Volume3(h.dims, h.spacing);
    input.tight = Volume3(h.dims, h.spacing);
    for (size_t i = 0; i < n; ++i) input.loose.data[i] = raw[i];
    for (size_t i = 0; i < n; ++i) input.tight.data[i] = raw[n + i];
    return input;
}

/// FNV-1a hash of the serialized geometry; recorded in ROI metadata so a
/// saved ROI can be traced to the exact geometry that produced it.
inline std::string geometry_hash(const PanoramaGeometry& g) {
    std::string bytes = geometry_to_json(g).dump();
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline nlohmann::json roi_meta_to_json(const RoiPair& roi, const PanoramaGeometry& g) {
    nlohmann::json meta = {
        {"class", tooth_class_name(roi.fdi.class_id)},
        {"jaw", jaw_name(roi.fdi.jaw)},
        {"quadrant", roi.fdi.quadrant},
        {"fdi", nullptr},
        {"bbox3", {{"lo", roi.bbox3.lo}, {"hi", roi.bbox3.hi}}},
        {"padding", roi.padding},
        {"geometry_hash", geometry_hash(g)},
    };
    if (auto f = roi.fdi.fdi()) meta["fdi"] = *f;
    return meta;
}

/// Save the ROI pair as two raw volumes plus a JSON metadata file, named
/// from the given stem: <stem>_loose.raw, <stem>_tight.raw, <stem>_roi.json.
inline void save_roi_pair(const RoiPair& roi, const PanoramaGeometry& g, const fs::path& dir,
                          const std::string& stem) {
    fs::create_directories(dir);
    save_volume(roi.loose, dir / (stem + "_loose.raw"));
    save_volume(roi.tight, dir / (stem + "_tight.raw"));
    nlohmann::json meta = roi_meta_to_json(roi, g);
    meta["files"] = {{"loose", stem + "_loose.raw"}, {"tight", stem + "_tight.raw"}};
    write_json_file(dir / (stem + "_roi.json"), meta);
}

}  // namespace toothseg
