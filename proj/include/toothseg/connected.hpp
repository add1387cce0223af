// Connected-component labeling (26-connectivity in 3D, 8 in 2D) and the
// jaw-separation step built on it.
#pragma once

#include <numeric>

#include "toothseg/types.hpp"

namespace toothseg {

struct ComponentInfo {
    int label = 0;          // 1-based label in the label map
    size_t voxels = 0;
    size_t first_index = 0; // smallest linear voxel index, for deterministic ordering
};

struct Labeling3 {
    std::vector<int32_t> labels;  // 0 = background
    std::vector<ComponentInfo> components;  // ordered by (voxels desc, first_index asc)
};

/// Label all 26-connected components of a binary volume. Component order is
/// deterministic: by voxel count descending, ties by smallest linear index.
inline Labeling3 label_components_26(const BinaryVolume3& b) {
    const int nx = b.dims[0], ny = b.dims[1], nz = b.dims[2];
    const size_t plane = static_cast<size_t>(nx) * ny;
    Labeling3 out;
    out.labels.assign(b.data.size(), 0);
    std::vector<size_t> queue;
    int next_label = 0;
    for (size_t seed = 0; seed < b.data.size(); ++seed) {
        if (!b.data[seed] || out.labels[seed]) continue;
        ++next_label;
        ComponentInfo info;
        info.label = next_label;
        info.first_index = seed;
        queue.clear();
        queue.push_back(seed);
        out.labels[seed] = next_label;
        while (!queue.empty()) {
            size_t idx = queue.back();
            queue.pop_back();
            ++info.voxels;
            int z = static_cast<int>(idx / plane);
            int rem = static_cast<int>(idx % plane);
            int y = rem / nx;
            int x = rem % nx;
            for (int dz = -1; dz <= 1; ++dz) {
                int zz = z + dz;
                if (zz < 0 || zz >= nz) continue;
                for (int dy = -1; dy <= 1; ++dy) {
                    int yy = y + dy;
                    if (yy < 0 || yy >= ny) continue;
                    size_t row = static_cast<size_t>(zz) * plane + static_cast<size_t>(yy) * nx;
                    for (int dx = -1; dx <= 1; ++dx) {
                        int xx = x + dx;
                        if (xx < 0 || xx >= nx || (dx == 0 && dy == 0 && dz == 0)) continue;
                        size_t nidx = row + xx;
                        if (b.data[nidx] && !out.labels[nidx]) {
                            out.labels[nidx] = next_label;
                            queue.push_back(nidx);
                        }
                    }
                }
            }
        }
        out.components.push_back(info);
    }
    std::sort(out.components.begin(), out.components.end(),
              [](const ComponentInfo& a, const ComponentInfo& c) {
                  if (a.voxels != c.voxels) return a.voxels > c.voxels;
                  return a.first_index < c.first_index;
              });
    return out;
}

struct JawPair {
    BinaryVolume3 upper;
    BinaryVolume3 lower;
};

/// Split a bone mask into the two jaws: the largest connected component is
/// the lower jaw, the second largest the upper jaw. Components smaller than
/// min_fraction of the total foreground do not count as jaw candidates.
inline JawPair split_jaws(const BinaryVolume3& b, double min_fraction = 0.01) {
    Labeling3 lab = label_components_26(b);
    size_t foreground = 0;
    for (const auto& c : lab.components) foreground += c.voxels;
    auto floor_voxels = static_cast<size_t>(min_fraction * static_cast<double>(foreground));
    std::vector<const ComponentInfo*> candidates;
    for (const auto& c : lab.components)
        if (c.voxels >= floor_voxels) candidates.push_back(&c);
    if (candidates.size() < 2)
        throw Error(ErrorCode::jaws_not_separated,
                    "bone mask has fewer than two connected components of jaw size");
    JawPair jaws{BinaryVolume3(b.dims), BinaryVolume3(b.dims)};
    int lower_label = candidates[0]->label;
    int upper_label = candidates[1]->label;
    for (size_t i = 0; i < lab.labels.size(); ++i) {
        if (lab.labels[i] == lower_label) jaws.lower.data[i] = 1;
        else if (lab.labels[i] == upper_label) jaws.upper.data[i] = 1;
    }
    return jaws;
}

/// 8-connected component count for 2D masks.
inline int count_components_8(const BinaryImage2& img) {
    const int nu = img.dims[0], nv = img.dims[1];
    std::vector<int32_t> labels(img.size(), 0);
    std::vector<size_t> queue;
    int n = 0;
    for (size_t seed = 0; seed < img.data.size(); ++seed) {
        if (!img.data[seed] || labels[seed]) continue;
        ++n;
        queue.clear();
        queue.push_back(seed);
        labels[seed] = n;
        while (!queue.empty()) {
            size_t idx = queue.back();
            queue.pop_back();
            int v = static_cast<int>(idx) / nu;
            int u = static_cast<int>(idx) % nu;
            for (int dv = -1; dv <= 1; ++dv)
                for (int du = -1; du <= 1; ++du) {
                    int uu = u + du, vv = v + dv;
                    if ((du == 0 && dv == 0) || uu < 0 || uu >= nu || vv < 0 || vv >= nv) continue;
                    size_t nidx = static_cast<size_t>(vv) * nu + uu;
                    if (img.data[nidx] && !labels[nidx]) {
                        labels[nidx] = n;
                        queue.push_back(nidx);
                    }
                }
        }
    }
    return n;
}

/// Keep only the largest 8-connected component (ties by smallest index).
inline BinaryImage2 largest_component_8(const BinaryImage2& img) {
    const int nu = img.dims[0], nv = img.dims[1];
    std::vector<int32_t> labels(img.size(), 0);
    std::vector<size_t> queue;
    int n = 0;
    size_t best_count = 0;
    int best_label = 0;
    for (size_t seed = 0; seed < img.data.size(); ++seed) {
        if (!img.data[seed] || labels[seed]) continue;
        ++n;
        size_t count = 0;
        queue.clear();
        queue.push_back(seed);
        labels[seed] = n;
        while (!queue.empty()) {
            size_t idx = queue.back();
            queue.pop_back();
            ++count;
            int v = static_cast<int>(idx) / nu;
            int u = static_cast<int>(idx) % nu;
            for (int dv = -1; dv <= 1; ++dv)
                for (int du = -1; du <= 1; ++du) {
                    int uu = u + du, vv = v + dv;
                    if ((du == 0 && dv == 0) || uu < 0 || uu >= nu || vv < 0 || vv >= nv) continue;
                    size_t nidx = static_cast<size_t>(vv) * nu + uu;
                    if (img.data[nidx] && !labels[nidx]) {
                        labels[nidx] = n;
                        queue.push_back(nidx);
                    }
                }
        }
        if (count > best_count) {
            best_count = count;
            best_label = n;
        }
    }
    BinaryImage2 out(img.dims);
    if (best_label)
        for (size_t i = 0; i < img.size(); ++i) out.data[i] = (labels[i] == best_label) ? 1 : 0;
    return out;
}

}  // namespace toothseg
