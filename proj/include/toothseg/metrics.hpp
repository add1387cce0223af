// Segmentation and detection metrics: Dice, Hausdorff and average symmetric
// surface distance on surface voxels (exact Euclidean distance transform,
// anisotropic spacing), identification precision/recall/F1, and all-point
// interpolated average precision.
#pragma once

#include <limits>

#include "toothseg/detection.hpp"
#include "toothseg/identify.hpp"
#include "toothseg/types.hpp"

namespace toothseg {

inline double dice(const BinaryVolume3& a, const BinaryVolume3& b) {
    if (a.dims != b.dims)
        throw Error(ErrorCode::invalid_argument, "dice: mask dims differ");
    size_t inter = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        bool va = a.data[i] != 0, vb = b.data[i] != 0;
        inter += (va && vb);
        na += va;
        nb += vb;
    }
    if (na + nb == 0) return 1.0;  // both empty: identical
    return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

namespace detail {

// Felzenszwalb-Huttenlocher 1D squared-distance transform of a sampled
// function, with anisotropic step size.
inline void edt_1d(std::vector<double>& f, std::vector<double>& scratch, double step, int n) {
    static constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<int> v(n);
    std::vector<double> zb(n + 1);
    const double s2 = step * step;
    int k = -1;  // top of the lower-envelope stack; infinite parabolas are skipped
    for (int q = 0; q < n; ++q) {
        if (f[q] == kInf) continue;
        double inter = 0.0;
        while (k >= 0) {
            inter = ((f[q] + s2 * q * q) - (f[v[k]] + s2 * v[k] * v[k])) /
                    (2.0 * s2 * (q - v[k]));
            if (inter <= zb[k]) --k;
            else break;
        }
        ++k;
        v[k] = q;
        zb[k] = k == 0 ? -kInf : inter;
        zb[k + 1] = kInf;
    }
    if (k < 0) return;  // no sources in this line
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (j < k && zb[j + 1] < q) ++j;
        double d = (q - v[j]) * step;
        scratch[q] = d * d + f[v[j]];
    }
    std::copy(scratch.begin(), scratch.begin() + n, f.begin());
}

}  // namespace detail

/// Exact Euclidean distance (mm) from every voxel to the nearest set voxel
/// of the mask. Voxels of the mask itself get 0.
inline std::vector<double> distance_transform(const BinaryVolume3& mask,
                                              std::array<double, 3> spacing) {
    static constexpr double kInf = std::numeric_limits<double>::infinity();
    const int nx = mask.dims[0], ny = mask.dims[1], nz = mask.dims[2];
    std::vector<double> dist(mask.data.size());
    for (size_t i = 0; i < mask.data.size(); ++i) dist[i] = mask.data[i] ? 0.0 : kInf;

    std::vector<double> line(std::max({nx, ny, nz})), scratch(std::max({nx, ny, nz}));
    // x pass
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y) {
            size_t base = mask.index(0, y, z);
            std::copy(dist.begin() + base, dist.begin() + base + nx, line.begin());
            detail::edt_1d(line, scratch, spacing[0], nx);
            std::copy(line.begin(), line.begin() + nx, dist.begin() + base);
        }
    // y pass
    for (int z = 0; z < nz; ++z)
        for (int x = 0; x < nx; ++x) {
            for (int y = 0; y < ny; ++y) line[y] = dist[mask.index(x, y, z)];
            detail::edt_1d(line, scratch, spacing[1], ny);
            for (int y = 0; y < ny; ++y) dist[mask.index(x, y, z)] = line[y];
        }
    // z pass
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
            for (int z = 0; z < nz; ++z) line[z] = dist[mask.index(x, y, z)];
            detail::edt_1d(line, scratch, spacing[2], nz);
            for (int z = 0; z < nz; ++z) dist[mask.index(x, y, z)] = line[z];
        }
    for (auto& d : dist) d = d == kInf ? kInf : std::sqrt(d);
    return dist;
}

/// Surface voxels: set voxels with at least one 6-neighbor outside the mask
/// (volume border counts as outside).
inline std::vector<size_t> surface_voxels(const BinaryVolume3& m) {
    std::vector<size_t> surf;
    for (int z = 0; z < m.dims[2]; ++z)
        for (int y = 0; y < m.dims[1]; ++y)
            for (int x = 0; x < m.dims[0]; ++x) {
                if (!m(x, y, z)) continue;
                bool boundary = x == 0 || x == m.dims[0] - 1 || y == 0 || y == m.dims[1] - 1 ||
                                z == 0 || z == m.dims[2] - 1 || !m(x - 1, y, z) ||
                                !m(x + 1, y, z) || !m(x, y - 1, z) || !m(x, y + 1, z) ||
                                !m(x, y, z - 1) || !m(x, y, z + 1);
                if (boundary) surf.push_back(m.index(x, y, z));
            }
    return surf;
}

struct SurfaceDistances {
    double hausdorff_mm = 0.0;
    double assd_mm = 0.0;
};

/// Symmetric surface distances between two masks on the same grid.
inline SurfaceDistances surface_distances(const BinaryVolume3& a, const BinaryVolume3& b,
                                          std::array<double, 3> spacing) {
    if (a.dims != b.dims)
        throw Error(ErrorCode::invalid_argument, "surface distance: mask dims differ");
    auto sa = surface_voxels(a);
    auto sb = surface_voxels(b);
    if (sa.empty() || sb.empty())
        throw Error(ErrorCode::degenerate_data, "surface distance: empty mask");

    BinaryVolume3 surf_a(a.dims), surf_b(b.dims);
    for (size_t i : sa) surf_a.data[i] = 1;
    for (size_t i : sb) surf_b.data[i] = 1;
    auto dist_to_a = distance_transform(surf_a, spacing);
    auto dist_to_b = distance_transform(surf_b, spacing);

    double hd = 0.0, sum = 0.0;
    for (size_t i : sa) {
        hd = std::max(hd, dist_to_b[i]);
        sum += dist_to_b[i];
    }
    for (size_t i : sb) {
        hd = std::max(hd, dist_to_a[i]);
        sum += dist_to_a[i];
    }
    return {hd, sum / static_cast<double>(sa.size() + sb.size())};
}

// --- detection / identification metrics --------------------------------------

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    int tp = 0, fp = 0, fn = 0;
};

inline PrecisionRecall precision_recall(int tp, int fp, int fn) {
    PrecisionRecall pr;
    pr.tp = tp;
    pr.fp = fp;
    pr.fn = fn;
    pr.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    pr.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    pr.f1 = pr.precision + pr.recall > 0
                ? 2.0 * pr.precision * pr.recall / (pr.precision + pr.recall)
                : 0.0;
    return pr;
}

struct LabeledBox {
    PanoBox box;
    int fdi = 0;  // 0 = unnumbered
    double score = 1.0;
};

/// Identification scoring: a prediction is a true positive when it carries
/// an FDI code, overlaps a truth tooth at IoU >= iou_min, and the codes
/// agree. Each truth tooth can be matched once.
inline PrecisionRecall identification_metrics(const std::vector<LabeledBox>& pred,
                                              const std::vector<LabeledBox>& truth,
                                              double iou_min = 0.5) {
    std::vector<bool> used(truth.size(), false);
    int tp = 0, fp = 0;
    for (const auto& p : pred) {
        int best = -1;
        double best_iou = iou_min;
        for (size_t t = 0; t < truth.size(); ++t) {
            if (used[t]) continue;
            double v = iou(p.box, truth[t].box);
            if (v >= best_iou) {
                best_iou = v;
                best = static_cast<int>(t);
            }
        }
        if (best >= 0 && p.fdi != 0 && truth[best].fdi == p.fdi) {
            used[best] = true;
            ++tp;
        } else {
            ++fp;
        }
    }
    int fn = static_cast<int>(truth.size()) - tp;
    return precision_recall(tp, fp, fn);
}

/// All-point interpolated average precision (area under the monotone
/// precision envelope of the PR curve), predictions matched greedily in
/// score order at the given IoU threshold.
inline double average_precision(std::vector<LabeledBox> pred,
                                const std::vector<LabeledBox>& truth, double iou_min = 0.5) {
    if (truth.empty()) return 0.0;
    std::stable_sort(pred.begin(), pred.end(),
                     [](const LabeledBox& a, const LabeledBox& b) { return a.score > b.score; });
    std::vector<bool> used(truth.size(), false);
    std::vector<double> precisions, recalls;
    int tp = 0;
    for (size_t k = 0; k < pred.size(); ++k) {
        int best = -1;
        double best_iou = iou_min;
        for (size_t t = 0; t < truth.size(); ++t) {
            if (used[t]) continue;
            double v = iou(pred[k].box, truth[t].box);
            if (v >= best_iou) {
                best_iou = v;
                best = static_cast<int>(t);
            }
        }
        if (best >= 0) {
            used[best] = true;
            ++tp;
        }
        precisions.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
        recalls.push_back(static_cast<double>(tp) / static_cast<double>(truth.size()));
    }
    // monotone envelope, integrated over recall
    double ap = 0.0, prev_recall = 0.0;
    for (size_t k = 0; k < precisions.size(); ++k) {
        double pmax = 0.0;
        for (size_t m = k; m < precisions.size(); ++m) pmax = std::max(pmax, precisions[m]);
        ap += (recalls[k] - prev_recall) * pmax;
        prev_recall = recalls[k];
    }
    return ap;
}

}  // namespace toothseg
