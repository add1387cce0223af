// Elementwise algebra and resampling on volumes and images. Everything here
// is a pure function over immutable inputs.
#pragma once

#include "toothseg/types.hpp"

namespace toothseg {

/// Elementwise product with a binary mask: out = v where m is set, else 0.
inline Volume3 masked(const Volume3& v, const BinaryVolume3& m) {
    if (v.dims != m.dims)
        throw Error(ErrorCode::invalid_argument, "masked: volume and mask dims differ");
    Volume3 out = v;
    for (size_t i = 0; i < out.data.size(); ++i)
        if (!m.data[i]) out.data[i] = 0.0f;
    return out;
}

/// Sample a volume slice with bilinear interpolation in (x, y), clamping
/// coordinates to the border.
inline double sample_bilinear_clamped(const Volume3& v, double x, double y, int z) {
    x = std::clamp(x, 0.0, static_cast<double>(v.dims[0] - 1));
    y = std::clamp(y, 0.0, static_cast<double>(v.dims[1] - 1));
    int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
    int x1 = std::min(x0 + 1, v.dims[0] - 1);
    int y1 = std::min(y0 + 1, v.dims[1] - 1);
    double fx = x - x0, fy = y - y0;
    double v00 = v(x0, y0, z), v10 = v(x1, y0, z);
    double v01 = v(x0, y1, z), v11 = v(x1, y1, z);
    return (1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10 + (1 - fx) * fy * v01 + fx * fy * v11;
}

/// Trilinear sample at a continuous index position, clamped to the border.
inline double sample_trilinear_clamped(const Volume3& v, double x, double y, double z) {
    x = std::clamp(x, 0.0, static_cast<double>(v.dims[0] - 1));
    y = std::clamp(y, 0.0, static_cast<double>(v.dims[1] - 1));
    z = std::clamp(z, 0.0, static_cast<double>(v.dims[2] - 1));
    int x0 = static_cast<int>(x), y0 = static_cast<int>(y), z0 = static_cast<int>(z);
    int x1 = std::min(x0 + 1, v.dims[0] - 1);
    int y1 = std::min(y0 + 1, v.dims[1] - 1);
    int z1 = std::min(z0 + 1, v.dims[2] - 1);
    double fx = x - x0, fy = y - y0, fz = z - z0;
    auto lerp = [](double a, double b, double f) { return a + (b - a) * f; };
    double c00 = lerp(v(x0, y0, z0), v(x1, y0, z0), fx);
    double c10 = lerp(v(x0, y1, z0), v(x1, y1, z0), fx);
    double c01 = lerp(v(x0, y0, z1), v(x1, y0, z1), fx);
    double c11 = lerp(v(x0, y1, z1), v(x1, y1, z1), fx);
    return lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz);
}

namespace detail {
// Unit-normalized index lattice: output index i maps to input coordinate
// i*(n_in-1)/(n_out-1) (both lattices span the same unit interval), so a
// constant field stays constant and endpoints map to endpoints.
inline double lattice_coord(int i, int n_out, int n_in) {
    if (n_out <= 1) return (n_in - 1) / 2.0;
    return static_cast<double>(i) * (n_in - 1) / (n_out - 1);
}
}  // namespace detail

/// Resample a volume to target dims by trilinear interpolation on the
/// unit-normalized index lattice. Physical spacing rescales accordingly.
inline Volume3 resample_trilinear(const Volume3& v, std::array<int, 3> target_dims) {
    if (target_dims[0] <= 0 || target_dims[1] <= 0 || target_dims[2] <= 0)
        throw Error(ErrorCode::invalid_argument, "resample: target dims must be positive");
    std::array<double, 3> sp;
    for (int a = 0; a < 3; ++a) {
        double extent = v.spacing[a] * (v.dims[a] > 1 ? v.dims[a] - 1 : 1);
        sp[a] = target_dims[a] > 1 ? extent / (target_dims[a] - 1) : extent;
    }
    Volume3 out(target_dims, sp);
    for (int z = 0; z < target_dims[2]; ++z) {
        double sz = detail::lattice_coord(z, target_dims[2], v.dims[2]);
        for (int y = 0; y < target_dims[1]; ++y) {
            double sy = detail::lattice_coord(y, target_dims[1], v.dims[1]);
            for (int x = 0; x < target_dims[0]; ++x) {
                double sx = detail::lattice_coord(x, target_dims[0], v.dims[0]);
                out.at(x, y, z) = static_cast<float>(sample_trilinear_clamped(v, sx, sy, sz));
            }
        }
    }
    return out;
}

/// Bilinear image resampling on the same lattice convention.
inline Image2 resample_bilinear(const Image2& img, std::array<int, 2> target_dims) {
    if (target_dims[0] <= 0 || target_dims[1] <= 0)
        throw Error(ErrorCode::invalid_argument, "resample: target dims must be positive");
    Image2 out(target_dims, img.spacing);
    for (int v = 0; v < target_dims[1]; ++v) {
        double sv = detail::lattice_coord(v, target_dims[1], img.dims[1]);
        int v0 = static_cast<int>(sv);
        int v1 = std::min(v0 + 1, img.dims[1] - 1);
        double fv = sv - v0;
        for (int u = 0; u < target_dims[0]; ++u) {
            double su = detail::lattice_coord(u, target_dims[0], img.dims[0]);
            int u0 = static_cast<int>(su);
            int u1 = std::min(u0 + 1, img.dims[0] - 1);
            double fu = su - u0;
            out.at(u, v) = (1 - fu) * (1 - fv) * img(u0, v0) + fu * (1 - fv) * img(u1, v0) +
                           (1 - fu) * fv * img(u0, v1) + fu * fv * img(u1, v1);
        }
    }
    return out;
}

/// Crop a volume to the half-open voxel box [lo, hi).
inline Volume3 crop(const Volume3& v, std::array<int, 3> lo, std::array<int, 3> hi) {
    for (int a = 0; a < 3; ++a)
        if (lo[a] < 0 || hi[a] > v.dims[a] || lo[a] >= hi[a])
            throw Error(ErrorCode::invalid_argument, "crop: box outside volume");
    Volume3 out({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]}, v.spacing);
    for (int z = lo[2]; z < hi[2]; ++z)
        for (int y = lo[1]; y < hi[1]; ++y)
            for (int x = lo[0]; x < hi[0]; ++x)
                out.at(x - lo[0], y - lo[1], z - lo[2]) = v(x, y, z);
    return out;
}

/// Drop the first n_bottom z-slices (slices that never contain teeth).
inline Volume3 crop_bottom_slices(const Volume3& v, int n_bottom) {
    if (n_bottom < 0) throw Error(ErrorCode::invalid_argument, "negative slice crop");
    if (n_bottom == 0) return v;
    if (n_bottom >= v.dims[2])
        throw Error(ErrorCode::invalid_argument, "slice crop removes the whole volume");
    return crop(v, {0, 0, n_bottom}, {v.dims[0], v.dims[1], v.dims[2]});
}

inline Image2 crop_image(const Image2& img, std::array<int, 2> lo, std::array<int, 2> hi) {
    for (int a = 0; a < 2; ++a)
        if (lo[a] < 0 || hi[a] > img.dims[a] || lo[a] >= hi[a])
            throw Error(ErrorCode::invalid_argument, "crop: box outside image");
    Image2 out({hi[0] - lo[0], hi[1] - lo[1]}, img.spacing);
    for (int v = lo[1]; v < hi[1]; ++v)
        for (int u = lo[0]; u < hi[0]; ++u)
            out.at(u - lo[0], v - lo[1]) = img(u, v);
    return out;
}

inline double sum(const Volume3& v) {
    double s = 0.0;
    for (float x : v.data) s += x;
    return s;
}

}  // namespace toothseg
