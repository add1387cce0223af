// Binary 2D morphology with a disk structuring element. Closing is computed
// on a canvas padded by the radius so the operation matches set-theoretic
// dilation-then-erosion with background outside the image; the result is
// cropped back to the original frame.
#pragma once

#include "toothseg/types.hpp"

namespace toothseg {

/// Offsets of a disk structuring element of the given radius.
inline std::vector<PixelCoord> disk_offsets(int radius) {
    std::vector<PixelCoord> offs;
    for (int dv = -radius; dv <= radius; ++dv)
        for (int du = -radius; du <= radius; ++du)
            if (du * du + dv * dv <= radius * radius) offs.push_back({du, dv});
    return offs;
}

inline BinaryImage2 dilate_2d(const BinaryImage2& img, int radius) {
    if (radius < 1) throw Error(ErrorCode::invalid_argument, "dilate: radius must be >= 1");
    auto offs = disk_offsets(radius);
    BinaryImage2 out(img.dims);
    for (int v = 0; v < img.dims[1]; ++v)
        for (int u = 0; u < img.dims[0]; ++u) {
            if (!img(u, v)) continue;
            for (auto o : offs) {
                int uu = u + o.u, vv = v + o.v;
                if (img.in_bounds(uu, vv)) out.at(uu, vv) = 1;
            }
        }
    return out;
}

inline BinaryImage2 erode_2d(const BinaryImage2& img, int radius) {
    if (radius < 1) throw Error(ErrorCode::invalid_argument, "erode: radius must be >= 1");
    auto offs = disk_offsets(radius);
    BinaryImage2 out(img.dims);
    for (int v = 0; v < img.dims[1]; ++v)
        for (int u = 0; u < img.dims[0]; ++u) {
            if (!img(u, v)) continue;
            bool keep = true;
            for (auto o : offs) {
                int uu = u + o.u, vv = v + o.v;
                if (!img.in_bounds(uu, vv) || !img(uu, vv)) {
                    keep = false;
                    break;
                }
            }
            out.at(u, v) = keep ? 1 : 0;
        }
    return out;
}

/// Morphological closing with a disk of the given radius: dilation then
/// erosion. The output contains the input, and the operation is idempotent
/// away from effects clipped at the image frame.
inline BinaryImage2 closing_2d(const BinaryImage2& img, int radius) {
    if (radius < 1) throw Error(ErrorCode::invalid_argument, "closing: radius must be >= 1");
    const int pad = radius;
    BinaryImage2 canvas({img.dims[0] + 2 * pad, img.dims[1] + 2 * pad});
    for (int v = 0; v < img.dims[1]; ++v)
        for (int u = 0; u < img.dims[0]; ++u)
            canvas.at(u + pad, v + pad) = img(u, v);
    BinaryImage2 closed = erode_2d(dilate_2d(canvas, radius), radius);
    BinaryImage2 out(img.dims);
    for (int v = 0; v < img.dims[1]; ++v)
        for (int u = 0; u < img.dims[0]; ++u)
            out.at(u, v) = closed(u + pad, v + pad);
    return out;
}

}  // namespace toothseg
