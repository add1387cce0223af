// Medial-axis extraction for the dental-arch region: Zhang-Suen thinning to
// a 1-px-wide 8-connected skeleton, then pruning to the longest geodesic
// path through the skeleton graph so downstream spline fitting sees a single
// ordered curve without side branches.
#pragma once

#include <deque>

#include "toothseg/connected.hpp"
#include "toothseg/types.hpp"

namespace toothseg {

namespace detail {

// One Zhang-Suen subiteration. Pixels are examined against the image state
// at entry; deletions apply simultaneously.
inline bool thinning_pass(BinaryImage2& img, int subiter) {
    const int nu = img.dims[0], nv = img.dims[1];
    std::vector<size_t> kill;
    auto px = [&](int u, int v) -> int {
        return img.in_bounds(u, v) ? (img(u, v) != 0) : 0;
    };
    for (int v = 0; v < nv; ++v) {
        for (int u = 0; u < nu; ++u) {
            if (!img(u, v)) continue;
            int p2 = px(u, v - 1), p3 = px(u + 1, v - 1), p4 = px(u + 1, v);
            int p5 = px(u + 1, v + 1), p6 = px(u, v + 1), p7 = px(u - 1, v + 1);
            int p8 = px(u - 1, v), p9 = px(u - 1, v - 1);
            int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
            if (b < 2 || b > 6) continue;
            int seq[9] = {p2, p3, p4, p5, p6, p7, p8, p9, p2};
            int a = 0;
            for (int k = 0; k < 8; ++k)
                if (seq[k] == 0 && seq[k + 1] == 1) ++a;
            if (a != 1) continue;
            int c1 = subiter == 0 ? p2 * p4 * p6 : p2 * p4 * p8;
            int c2 = subiter == 0 ? p4 * p6 * p8 : p2 * p6 * p8;
            if (c1 == 0 && c2 == 0) kill.push_back(img.index(u, v));
        }
    }
    for (size_t idx : kill) img.data[idx] = 0;
    return !kill.empty();
}

}  // namespace detail

/// Thin a binary image to its skeleton (Zhang-Suen). Topology of a single
/// connected foreground component is preserved.
inline BinaryImage2 thin_zhang_suen(const BinaryImage2& img) {
    BinaryImage2 out = img;
    bool changed = true;
    while (changed) {
        bool c0 = detail::thinning_pass(out, 0);
        bool c1 = detail::thinning_pass(out, 1);
        changed = c0 || c1;
    }
    return out;
}

/// Skeletonize a single-component binary image to an ordered point path.
/// The result is the longest geodesic path through the thinned skeleton:
/// a 1-px-wide 8-connected curve contained in the input foreground, with at
/// most two path neighbors per pixel.
inline std::vector<PixelCoord> skeletonize_2d(const BinaryImage2& img) {
    if (img.count() == 0)
        throw Error(ErrorCode::invalid_argument, "skeletonize: empty image");
    if (count_components_8(img) != 1)
        throw Error(ErrorCode::invalid_argument,
                    "skeletonize: input must be a single 8-connected component");

    BinaryImage2 skel = thin_zhang_suen(img);
    const int nu = skel.dims[0];

    // BFS over the skeleton pixel graph; ties resolved by linear index so
    // the extracted path is deterministic.
    auto bfs_farthest = [&](size_t start, std::vector<int32_t>* parent_out) {
        std::vector<int32_t> dist(skel.size(), -1);
        std::vector<int32_t> parent(skel.size(), -1);
        std::deque<size_t> q{start};
        dist[start] = 0;
        size_t far = start;
        while (!q.empty()) {
            size_t idx = q.front();
            q.pop_front();
            if (dist[idx] > dist[far] || (dist[idx] == dist[far] && idx < far)) far = idx;
            int v = static_cast<int>(idx) / nu;
            int u = static_cast<int>(idx) % nu;
            for (int dv = -1; dv <= 1; ++dv)
                for (int du = -1; du <= 1; ++du) {
                    int uu = u + du, vv = v + dv;
                    if ((du == 0 && dv == 0) || !skel.in_bounds(uu, vv) || !skel(uu, vv)) continue;
                    size_t nidx = skel.index(uu, vv);
                    if (dist[nidx] < 0) {
                        dist[nidx] = dist[idx] + 1;
                        parent[nidx] = static_cast<int32_t>(idx);
                        q.push_back(nidx);
                    }
                }
        }
        if (parent_out) *parent_out = std::move(parent);
        return far;
    };

    size_t first = 0;
    while (first < skel.size() && !skel.data[first]) ++first;
    size_t end_a = bfs_farthest(first, nullptr);
    std::vector<int32_t> parent;
    size_t end_b = bfs_farthest(end_a, &parent);

    std::vector<PixelCoord> path;
    for (int64_t idx = static_cast<int64_t>(end_b); idx >= 0; idx = parent[idx]) {
        path.push_back({static_cast<int>(idx % nu), static_cast<int>(idx / nu)});
        if (parent[idx] == static_cast<int32_t>(idx)) break;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

}  // namespace toothseg
